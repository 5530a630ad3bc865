"""Problem definitions and pointwise evaluations.

A control problem is a :class:`ProblemSpec`: dynamics ``f(y, u)``, running
cost ``f0(y, u)``, and a compact control box.  Everything downstream (static
solve, transcription, dissipativity checks, costate integration) consumes one
of these, either a built-in benchmark or a JSON document with expression
strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import AdmissibilityError, NumericalDomainError
from .expressions import ExpressionError, compile_expression

CLAMP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Immutable problem description.

    ``dynamics`` maps ``(y, u) -> dy/dt`` and ``cost_rate`` maps
    ``(y, u) -> scalar``; both must be total on R^n x Omega.  The optional
    ``dynamics_jacobians`` / ``cost_gradients`` callbacks return analytic
    partials ``(A, B)`` / ``(grad_y, grad_u)`` and take precedence over
    finite differencing in :func:`linearize`.
    """

    state_dim: int
    control_dim: int
    dynamics: Callable
    cost_rate: Callable
    control_lower: np.ndarray
    control_upper: np.ndarray
    velocity_bound_hint: float | None = None
    dynamics_jacobians: Callable | None = None
    cost_gradients: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if self.state_dim < 1 or self.control_dim < 1:
            raise ValueError("state_dim and control_dim must be positive")
        lower = np.asarray(self.control_lower, dtype=float).reshape(self.control_dim)
        upper = np.asarray(self.control_upper, dtype=float).reshape(self.control_dim)
        if np.any(lower > upper):
            raise ValueError("control_lower must be <= control_upper componentwise")
        object.__setattr__(self, "control_lower", lower)
        object.__setattr__(self, "control_upper", upper)

    @property
    def control_radius(self) -> float:
        # the constant c of the admissible ball; diagnostics only
        return float(np.max(np.abs(np.stack([self.control_lower, self.control_upper]))))


@dataclass(frozen=True, eq=False)
class LinearizationData:
    """Partial derivatives of the problem data at one point."""

    A: np.ndarray            # d f / d y, n x n
    B: np.ndarray            # d f / d u, n x p
    cost_grad_y: np.ndarray  # d f0 / d y, n
    cost_grad_u: np.ndarray  # d f0 / d u, p


def _as_vector(v, dim: int, label: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    if arr.shape != (dim,):
        raise ValueError(f"{label} must have length {dim}, got shape {arr.shape}")
    return arr


def clamp_control(spec: ProblemSpec, u) -> np.ndarray:
    """Project ``u`` onto the control box, allowing only rounding-level spill."""
    u = _as_vector(u, spec.control_dim, "control")
    clamped = np.minimum(np.maximum(u, spec.control_lower), spec.control_upper)
    overshoot = float(np.max(np.abs(u - clamped), initial=0.0))
    if overshoot > CLAMP_TOLERANCE:
        raise AdmissibilityError(
            f"control outside admissible box by {overshoot:.3e} "
            f"(clamp tolerance {CLAMP_TOLERANCE:.0e})"
        )
    return clamped


def evaluate_dynamics(spec: ProblemSpec, y, u) -> np.ndarray:
    """Evaluate f(y, u) with admissibility checking of the control."""
    y = _as_vector(y, spec.state_dim, "state")
    u = clamp_control(spec, u)
    return np.asarray(spec.dynamics(y, u), dtype=float).reshape(spec.state_dim)


def shifted_cost(spec: ProblemSpec, static, y, u) -> float:
    """w(y, u) = f0(y, u) - f0 at the static solution.

    ``static`` is a StaticSolution (or anything with a ``v_bar`` attribute,
    or a bare float reference value).
    """
    v_bar = getattr(static, "v_bar", static)
    y = _as_vector(y, spec.state_dim, "state")
    u = clamp_control(spec, u)
    return float(spec.cost_rate(y, u)) - float(v_bar)


def linearize(spec: ProblemSpec, y, u) -> LinearizationData:
    """Jacobians of dynamics and cost gradients at (y, u).

    Uses the spec's analytic callbacks when present, otherwise central
    finite differences with per-component step max(1e-6, 1e-6*|component|).
    Evaluates the raw callables (no control clamping): differencing at the
    box boundary must be allowed to step outside.
    """
    y = _as_vector(y, spec.state_dim, "state")
    u = _as_vector(u, spec.control_dim, "control")
    n, p = spec.state_dim, spec.control_dim

    if spec.dynamics_jacobians is not None:
        A, B = spec.dynamics_jacobians(y, u)
        A = np.asarray(A, dtype=float).reshape(n, n)
        B = np.asarray(B, dtype=float).reshape(n, p)
    else:
        A = np.empty((n, n))
        B = np.empty((n, p))
        for j in range(n):
            h = max(1e-6, 1e-6 * abs(y[j]))
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            A[:, j] = (np.asarray(spec.dynamics(yp, u), float)
                       - np.asarray(spec.dynamics(ym, u), float)) / (2 * h)
        for j in range(p):
            h = max(1e-6, 1e-6 * abs(u[j]))
            up = u.copy(); up[j] += h
            um = u.copy(); um[j] -= h
            B[:, j] = (np.asarray(spec.dynamics(y, up), float)
                       - np.asarray(spec.dynamics(y, um), float)) / (2 * h)

    if spec.cost_gradients is not None:
        gy, gu = spec.cost_gradients(y, u)
        gy = np.asarray(gy, dtype=float).reshape(n)
        gu = np.asarray(gu, dtype=float).reshape(p)
    else:
        gy = np.empty(n)
        gu = np.empty(p)
        for j in range(n):
            h = max(1e-6, 1e-6 * abs(y[j]))
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            gy[j] = (spec.cost_rate(yp, u) - spec.cost_rate(ym, u)) / (2 * h)
        for j in range(p):
            h = max(1e-6, 1e-6 * abs(u[j]))
            up = u.copy(); up[j] += h
            um = u.copy(); um[j] -= h
            gu[j] = (spec.cost_rate(y, up) - spec.cost_rate(y, um)) / (2 * h)

    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
            and np.all(np.isfinite(gy)) and np.all(np.isfinite(gu))):
        raise NumericalDomainError(f"non-finite derivative at y={y}, u={u}")
    return LinearizationData(A=A, B=B, cost_grad_y=gy, cost_grad_u=gu)


def kalman_rank(lin: LinearizationData) -> bool:
    """True iff [B, AB, ..., A^(n-1)B] has full row rank.

    Rank counted by singular values above 1e-10 times the largest one.
    """
    A, B = lin.A, lin.B
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    sigma = np.linalg.svd(ctrb, compute_uv=False)
    if sigma[0] == 0.0:
        return n == 0
    return int(np.sum(sigma > 1e-10 * sigma[0])) == n


###############################################################################
# Built-in benchmark problems
###############################################################################

def _p1() -> ProblemSpec:
    # scalar integrator tracking y=1: f = u, f0 = (y-1)^2 + u^2
    return ProblemSpec(
        state_dim=1,
        control_dim=1,
        dynamics=lambda y, u: np.array([u[0]]),
        cost_rate=lambda y, u: (y[0] - 1.0) ** 2 + u[0] ** 2,
        control_lower=np.array([-4.0]),
        control_upper=np.array([4.0]),
        velocity_bound_hint=4.0,
        dynamics_jacobians=lambda y, u: (np.array([[0.0]]), np.array([[1.0]])),
        cost_gradients=lambda y, u: (np.array([2.0 * (y[0] - 1.0)]),
                                     np.array([2.0 * u[0]])),
        name="P1",
    )


def _p2() -> ProblemSpec:
    # double integrator tracking position 1: f = (y2, u), f0 = (y1-1)^2 + y2^2 + u^2
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    return ProblemSpec(
        state_dim=2,
        control_dim=1,
        dynamics=lambda y, u: np.array([y[1], u[0]]),
        cost_rate=lambda y, u: (y[0] - 1.0) ** 2 + y[1] ** 2 + u[0] ** 2,
        control_lower=np.array([-4.0]),
        control_upper=np.array([4.0]),
        velocity_bound_hint=None,
        dynamics_jacobians=lambda y, u: (A, B),
        cost_gradients=lambda y, u: (np.array([2.0 * (y[0] - 1.0), 2.0 * y[1]]),
                                     np.array([2.0 * u[0]])),
        name="P2",
    )


def _p3() -> ProblemSpec:
    # cubic scalar system: f = -y^3 + u, f0 = (y-0.5)^2 + u^2
    return ProblemSpec(
        state_dim=1,
        control_dim=1,
        dynamics=lambda y, u: np.array([-y[0] ** 3 + u[0]]),
        cost_rate=lambda y, u: (y[0] - 0.5) ** 2 + u[0] ** 2,
        control_lower=np.array([-4.0]),
        control_upper=np.array([4.0]),
        velocity_bound_hint=None,
        dynamics_jacobians=lambda y, u: (np.array([[-3.0 * y[0] ** 2]]),
                                         np.array([[1.0]])),
        cost_gradients=lambda y, u: (np.array([2.0 * (y[0] - 0.5)]),
                                     np.array([2.0 * u[0]])),
        name="P3",
    )


_BUILTINS = {"P1": _p1, "P2": _p2, "P3": _p3}


def builtin_problem(name: str) -> ProblemSpec:
    """Return one of the named benchmark problems (P1, P2, P3)."""
    try:
        return _BUILTINS[str(name).upper()]()
    except KeyError:
        raise ValueError(f"unknown built-in problem {name!r}; "
                         f"choices: {sorted(_BUILTINS)}") from None


###############################################################################
# JSON problem documents
###############################################################################

_REQUIRED_KEYS = {"state_dim", "control_dim", "dynamics", "cost_rate",
                  "control_lower", "control_upper"}
_OPTIONAL_KEYS = {"name", "velocity_bound_hint"}


def problem_from_dict(doc: dict) -> ProblemSpec:
    """Build a ProblemSpec from a parsed JSON document.

    Schema: {"state_dim": n, "control_dim": p, "dynamics": [expr, ...] (n
    component expressions), "cost_rate": expr, "control_lower": [...],
    "control_upper": [...]}.  Expressions use variables y1..yn, u1..up and the
    grammar of :mod:`turnpike.expressions`.
    """
    if not isinstance(doc, dict):
        raise ValueError("problem document must be a JSON object")
    missing = _REQUIRED_KEYS - doc.keys()
    if missing:
        raise ValueError(f"problem document missing keys: {sorted(missing)}")
    unknown = doc.keys() - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise ValueError(f"problem document has unknown keys: {sorted(unknown)}")

    n = int(doc["state_dim"])
    p = int(doc["control_dim"])
    if n < 1 or p < 1:
        raise ValueError("state_dim and control_dim must be positive")
    exprs = doc["dynamics"]
    if not isinstance(exprs, list) or len(exprs) != n:
        raise ValueError(f"dynamics must be a list of {n} expression strings")
    try:
        components = [compile_expression(e, n, p) for e in exprs]
        cost = compile_expression(doc["cost_rate"], n, p)
    except ExpressionError as exc:
        raise ValueError(f"bad expression in problem document: {exc}") from exc

    def dynamics(y, u, _components=components):
        return np.array([c(y, u) for c in _components])

    hint = doc.get("velocity_bound_hint")
    return ProblemSpec(
        state_dim=n,
        control_dim=p,
        dynamics=dynamics,
        cost_rate=lambda y, u, _c=cost: _c(y, u),
        control_lower=np.asarray(doc["control_lower"], dtype=float),
        control_upper=np.asarray(doc["control_upper"], dtype=float),
        velocity_bound_hint=None if hint is None else float(hint),
        name=str(doc.get("name", "")),
    )


def load_problem(source: str | Path) -> ProblemSpec:
    """Resolve a problem by built-in name or JSON file path."""
    if isinstance(source, str) and source.upper() in _BUILTINS:
        return builtin_problem(source)
    path = Path(source)
    if not path.exists():
        raise ValueError(f"{source!r} is neither a built-in problem name nor a file")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"could not parse {path}: {exc}") from exc
    spec = problem_from_dict(doc)
    if not spec.name:
        object.__setattr__(spec, "name", path.stem)
    return spec
