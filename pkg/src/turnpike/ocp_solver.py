"""Finite-horizon two-point solver by direct transcription.

Controls are piecewise constant on a uniform grid, states propagate by
classical fixed-step RK4, and the running (shifted) cost is accumulated by
the matching RK4 quadrature.  The terminal equality y(T) = z is enforced by
an augmented-Lagrangian outer loop; the inner bound-constrained subproblem
is minimized by L-BFGS-B with exact discrete-adjoint gradients (reverse-mode
through the RK4 stages, no finite differencing of the rollout).

Also provides minimum-time steering by bisection over the horizon, used by
the reachability assumption checks and the witness construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import BlowUpError, InfeasibleError, ReachabilityError
from .model import ProblemSpec, _as_vector, clamp_control
from .static_opt import StaticSolution

TAU_MAX = 50.0
_BISECTION_WIDTH = 1e-3
_PENALTY_INITIAL = 10.0
_PENALTY_CAP = 1e14
_BLOWUP_VALUE = 1e12


@dataclass(frozen=True)
class SolverConfig:
    intervals_per_unit_time: int = 20
    nlp_tolerance: float = 1e-8
    endpoint_tolerance: float = 1e-6
    max_outer_iterations: int = 50
    penalty_growth: float = 10.0

    def __post_init__(self):
        for name in ("intervals_per_unit_time", "nlp_tolerance",
                     "endpoint_tolerance", "max_outer_iterations",
                     "penalty_growth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SolverConfig.{name} must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass(eq=False)
class Trajectory:
    grid: np.ndarray       # (N+1,) uniform, grid[0] = 0
    states: np.ndarray     # (N+1, n)
    controls: np.ndarray   # (N, p), piecewise constant
    shifted_cost_total: float
    raw_cost_total: float
    endpoint_violation: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def n_intervals(self) -> int:
        return self.controls.shape[0]


###############################################################################
# Problem kernels: fast dynamics / cost / derivative callables
###############################################################################

def _fd_dynamics_jacobians(spec: ProblemSpec):
    f, n, p = spec.dynamics, spec.state_dim, spec.control_dim

    def jac(y, u):
        A = np.empty((n, n))
        B = np.empty((n, p))
        for j in range(n):
            h = max(1e-6, 1e-6 * abs(y[j]))
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            A[:, j] = (f(yp, u) - f(ym, u)) / (2 * h)
        for j in range(p):
            h = max(1e-6, 1e-6 * abs(u[j]))
            up = u.copy(); up[j] += h
            um = u.copy(); um[j] -= h
            B[:, j] = (f(y, up) - f(y, um)) / (2 * h)
        return A, B

    return jac


def _fd_cost_gradients(spec: ProblemSpec):
    f0, n, p = spec.cost_rate, spec.state_dim, spec.control_dim

    def grads(y, u):
        gy = np.empty(n)
        gu = np.empty(p)
        for j in range(n):
            h = max(1e-6, 1e-6 * abs(y[j]))
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            gy[j] = (f0(yp, u) - f0(ym, u)) / (2 * h)
        for j in range(p):
            h = max(1e-6, 1e-6 * abs(u[j]))
            up = u.copy(); up[j] += h
            um = u.copy(); um[j] -= h
            gu[j] = (f0(y, up) - f0(y, um)) / (2 * h)
        return gy, gu

    return grads


def _kernels(spec: ProblemSpec):
    jac = spec.dynamics_jacobians or _fd_dynamics_jacobians(spec)
    grads = spec.cost_gradients or _fd_cost_gradients(spec)
    return spec.dynamics, spec.cost_rate, jac, grads


###############################################################################
# RK4 rollout with cost quadrature, and its exact adjoint
###############################################################################

def _rollout(f, f0, v_bar, x, controls, h, want_cache):
    """Integrate forward; returns (states, shifted, raw, stage_cache).

    The stage cache holds s2, s3, s4 per interval for the reverse sweep
    (s1 is states[k] itself).
    """
    N, _p = controls.shape
    n = x.size
    states = np.empty((N + 1, n))
    states[0] = x
    cache = np.empty((N, 3, n)) if want_cache else None
    shifted = 0.0
    raw = 0.0
    h2 = 0.5 * h
    h6 = h / 6.0
    y = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            u = controls[k]
            k1 = f(y, u)
            s2 = y + h2 * k1
            k2 = f(s2, u)
            s3 = y + h2 * k2
            k3 = f(s3, u)
            s4 = y + h * k3
            k4 = f(s4, u)
            c1 = f0(y, u); c2 = f0(s2, u); c3 = f0(s3, u); c4 = f0(s4, u)
            raw += h6 * (c1 + 2.0 * (c2 + c3) + c4)
            shifted += h6 * ((c1 - v_bar)
                             + 2.0 * ((c2 - v_bar) + (c3 - v_bar))
                             + (c4 - v_bar))
            y = y + h6 * (k1 + 2.0 * (k2 + k3) + k4)
            if not math.isfinite(float(np.abs(y).sum())):
                raise BlowUpError(f"state became non-finite at interval {k}",
                                  k)
            states[k + 1] = y
            if want_cache:
                cache[k, 0] = s2
                cache[k, 1] = s3
                cache[k, 2] = s4
    return states, shifted, raw, cache


def _adjoint_sweep(jac, grads, states, cache, controls, h, lam_terminal,
                   include_cost):
    """Reverse-mode sweep through the RK4 stages.

    Returns the gradient of
        include_cost * (RK4 quadrature of shifted cost) + <lam_terminal, y_N>
    with respect to the flattened controls (the linear-in-y_N term is how the
    augmented-Lagrangian terminal penalty enters: its gradient seeds
    lam_terminal).
    """
    N, p = controls.shape
    n = states.shape[1]
    g = np.empty((N, p))
    lam = lam_terminal.astype(float, copy=True)
    h2 = 0.5 * h
    h6 = h / 6.0
    zeros_n = np.zeros(n)
    for k in range(N - 1, -1, -1):
        u = controls[k]
        s1 = states[k]
        s2 = cache[k, 0]; s3 = cache[k, 1]; s4 = cache[k, 2]
        A1, B1 = jac(s1, u)
        A2, B2 = jac(s2, u)
        A3, B3 = jac(s3, u)
        A4, B4 = jac(s4, u)
        if include_cost:
            q1, r1 = grads(s1, u)
            q2, r2 = grads(s2, u)
            q3, r3 = grads(s3, u)
            q4, r4 = grads(s4, u)
            sb1 = h6 * q1
            sb2 = (2.0 * h6) * q2
            sb3 = (2.0 * h6) * q3
            sb4 = h6 * q4
            ub = h6 * (r1 + 2.0 * (r2 + r3) + r4)
        else:
            sb1 = zeros_n.copy(); sb2 = zeros_n.copy()
            sb3 = zeros_n.copy(); sb4 = zeros_n.copy()
            ub = np.zeros(p)
        kb4 = h6 * lam
        sb4 += A4.T @ kb4
        ub += B4.T @ kb4
        kb3 = (2.0 * h6) * lam + h * sb4
        sb3 += A3.T @ kb3
        ub += B3.T @ kb3
        kb2 = (2.0 * h6) * lam + h2 * sb3
        sb2 += A2.T @ kb2
        ub += B2.T @ kb2
        kb1 = h6 * lam + h2 * sb2
        sb1 += A1.T @ kb1
        ub += B1.T @ kb1
        g[k] = ub
        lam = lam + sb1 + sb2 + sb3 + sb4
    return g


class _Transcription:
    """Per-solve workspace binding the problem kernels to one grid."""

    def __init__(self, spec: ProblemSpec, v_bar: float, x: np.ndarray,
                 h: float, N: int):
        self.f, self.f0, self.jac, self.grads = _kernels(spec)
        self.v_bar = v_bar
        self.x = x
        self.h = h
        self.N = N
        self.n = spec.state_dim
        self.p = spec.control_dim

    def rollout(self, controls, want_cache=False):
        return _rollout(self.f, self.f0, self.v_bar, self.x, controls,
                        self.h, want_cache)

    def al_objective(self, u_flat, mu, rho, z):
        controls = u_flat.reshape(self.N, self.p)
        try:
            states, shifted, _raw, cache = self.rollout(controls,
                                                        want_cache=True)
        except (BlowUpError, OverflowError):
            # soft failure: the line search backs off a trial point whose
            # rollout left the finite range
            return _BLOWUP_VALUE, np.zeros(u_flat.size)
        c = states[-1] - z
        value = shifted + mu @ c + 0.5 * rho * (c @ c)
        g = _adjoint_sweep(self.jac, self.grads, states, cache, controls,
                           self.h, mu + rho * c, include_cost=True)
        return value, g.ravel()

    def steer_objective(self, u_flat, target):
        controls = u_flat.reshape(self.N, self.p)
        try:
            states, _shifted, _raw, cache = self.rollout(controls,
                                                         want_cache=True)
        except (BlowUpError, OverflowError):
            return _BLOWUP_VALUE, np.zeros(u_flat.size)
        c = states[-1] - target
        g = _adjoint_sweep(self.jac, self.grads, states, cache, controls,
                           self.h, 2.0 * c, include_cost=False)
        return c @ c, g.ravel()


def _bounds_list(spec: ProblemSpec, N: int):
    lo, hi = spec.control_lower, spec.control_upper
    return [(lo[j], hi[j]) for _ in range(N) for j in range(spec.control_dim)]


def _lbfgsb(fun, u0, bounds, config: SolverConfig, args=()):
    return minimize(fun, u0, args=args, jac=True, method="L-BFGS-B",
                    bounds=bounds,
                    options={"maxiter": 2000, "maxfun": 6000,
                             "ftol": 1e-15,
                             "gtol": 0.1 * config.nlp_tolerance})


def _resample_piecewise(grid, controls, T_new, N_new, fallback):
    """Sample a piecewise-constant control signal onto a new uniform grid."""
    if controls.shape[0] == 0:
        return np.tile(fallback, (N_new, 1))
    t_mid = (np.arange(N_new) + 0.5) * (T_new / N_new)
    idx = np.clip(np.searchsorted(grid, t_mid, side="right") - 1,
                  0, controls.shape[0] - 1)
    return controls[idx].copy()


###############################################################################
# Public operations
###############################################################################

def integrate(spec: ProblemSpec, x, controls, grid) -> np.ndarray:
    """RK4 state propagation along a uniform grid with piecewise-constant
    controls; returns the (N+1) state samples."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must contain at least two time samples")
    steps = np.diff(grid)
    h = float(steps[0])
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
        raise ValueError("grid must be uniform and strictly increasing")
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls.reshape(-1, spec.control_dim)
    if controls.shape != (grid.size - 1, spec.control_dim):
        raise ValueError(f"controls must have shape ({grid.size - 1}, "
                         f"{spec.control_dim})")
    controls = np.vstack([clamp_control(spec, u) for u in controls])
    x = _as_vector(x, spec.state_dim, "initial state")
    f, f0, _, _ = _kernels(spec)
    states, _, _, _ = _rollout(f, f0, 0.0, x, controls, h, want_cache=False)
    return states


def solve_finite_horizon(spec: ProblemSpec, static: StaticSolution, T: float,
                         x, z, config: SolverConfig | None = None, *,
                         initial_controls=None,
                         warm_start: Trajectory | None = None,
                         n_intervals: int | None = None) -> Trajectory:
    """Solve the two-endpoint problem: minimize the shifted cost over
    admissible controls with y(0) = x and y(T) = z.

    The terminal equality is driven below ``config.endpoint_tolerance`` by
    the multiplier loop; failure to get there raises
    :class:`InfeasibleError` carrying the best iterate.
    """
    config = config or DEFAULT_CONFIG
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"horizon must be positive and finite, got {T}")
    x = _as_vector(x, spec.state_dim, "initial state")
    z = _as_vector(z, spec.state_dim, "terminal state")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ValueError("endpoint states must be finite")

    N = int(n_intervals) if n_intervals else max(1, round(
        config.intervals_per_unit_time * T))
    h = T / N
    p = spec.control_dim
    u_rest = clamp_control(spec, np.clip(static.u_bar, spec.control_lower,
                                         spec.control_upper))
    if initial_controls is not None:
        controls = np.asarray(initial_controls, dtype=float).reshape(N, p)
        controls = np.clip(controls, spec.control_lower, spec.control_upper)
    elif warm_start is not None:
        controls = _resample_piecewise(warm_start.grid, warm_start.controls,
                                       T, N, u_rest)
        controls = np.clip(controls, spec.control_lower, spec.control_upper)
    else:
        # near-steady initialization: rest at the static control
        controls = np.tile(u_rest, (N, 1))

    work = _Transcription(spec, static.v_bar, x, h, N)
    bounds = _bounds_list(spec, N)
    u_flat = controls.ravel()
    mu = np.zeros(spec.state_dim)
    rho = _PENALTY_INITIAL
    prev_violation = np.inf
    best = (np.inf, u_flat)
    outer_used = 0
    for outer in range(config.max_outer_iterations):
        outer_used = outer + 1
        res = _lbfgsb(work.al_objective, u_flat, bounds, config,
                      args=(mu, rho, z))
        u_flat = res.x
        states, shifted, raw, _ = work.rollout(u_flat.reshape(N, p))
        c = states[-1] - z
        violation = float(np.linalg.norm(c))
        if violation < best[0]:
            best = (violation, u_flat.copy())
        if violation <= config.endpoint_tolerance:
            break
        mu = mu + rho * c
        if violation > 0.25 * prev_violation:
            rho = min(rho * config.penalty_growth, _PENALTY_CAP)
        prev_violation = violation
    else:
        violation, u_flat = best
        states, shifted, raw, _ = work.rollout(u_flat.reshape(N, p))
        traj = Trajectory(
            grid=np.linspace(0.0, T, N + 1),
            states=states, controls=u_flat.reshape(N, p).copy(),
            shifted_cost_total=shifted, raw_cost_total=raw,
            endpoint_violation=violation,
            diagnostics={"outer_iterations": outer_used, "penalty": rho,
                         "converged": False},
        )
        raise InfeasibleError(
            f"terminal constraint stalled at violation {violation:.3e} "
            f"after {outer_used} multiplier updates", best=traj,
            violation=violation)

    controls = u_flat.reshape(N, p).copy()
    return Trajectory(
        grid=np.linspace(0.0, T, N + 1),
        states=states, controls=controls,
        shifted_cost_total=shifted, raw_cost_total=raw,
        endpoint_violation=violation,
        diagnostics={"outer_iterations": outer_used, "penalty": rho,
                     "converged": True,
                     # first-order multiplier for the terminal equality:
                     # cost(pinned exactly) ~ cost + multiplier . slack
                     "endpoint_multiplier": mu + rho * c},
    )


def value(spec: ProblemSpec, static: StaticSolution, T: float, x, z,
          config: SolverConfig | None = None) -> float:
    """v(T, x, z): the raw (unshifted) optimal cost of the two-point problem."""
    return solve_finite_horizon(spec, static, T, x, z, config).raw_cost_total


def _steer_attempt(spec: ProblemSpec, from_state, target, tau, config,
                   tolerance, guess):
    N = max(4, int(math.ceil(config.intervals_per_unit_time * tau)))
    h = tau / N
    p = spec.control_dim
    center = np.clip(np.zeros(p), spec.control_lower, spec.control_upper)
    if guess is None:
        controls = np.tile(center, (N, 1))
    else:
        controls = _resample_piecewise(guess[0], guess[1], tau, N, center)
    work = _Transcription(spec, 0.0, from_state, h, N)
    res = _lbfgsb(work.steer_objective, controls.ravel(),
                  _bounds_list(spec, N), config, args=(target,))
    controls = res.x.reshape(N, p)
    states, shifted, raw, _ = work.rollout(controls)
    miss = float(np.linalg.norm(states[-1] - target))
    traj = Trajectory(grid=np.linspace(0.0, tau, N + 1), states=states,
                      controls=controls.copy(), shifted_cost_total=shifted,
                      raw_cost_total=raw, endpoint_violation=miss)
    return miss <= tolerance, traj


def min_time_steer(spec: ProblemSpec, from_state, to_state,
                   config: SolverConfig | None = None, *,
                   target_tolerance: float | None = None):
    """Shortest horizon tau in (0, 50] steering from -> to within tolerance.

    Bisection over the horizon: each candidate tau is accepted iff the
    feasibility transcription (minimize the terminal miss over box controls)
    lands within ``target_tolerance``.  The bracket is closed to width 1e-3
    and the smallest accepted tau is returned with its trajectory.
    """
    config = config or DEFAULT_CONFIG
    tolerance = (config.endpoint_tolerance if target_tolerance is None
                 else target_tolerance)
    from_state = _as_vector(from_state, spec.state_dim, "from")
    to_state = _as_vector(to_state, spec.state_dim, "to")

    initial_miss = float(np.linalg.norm(from_state - to_state))
    if initial_miss <= tolerance:
        trivial = Trajectory(grid=np.array([0.0]),
                             states=from_state.reshape(1, -1),
                             controls=np.zeros((0, spec.control_dim)),
                             shifted_cost_total=0.0, raw_cost_total=0.0,
                             endpoint_violation=initial_miss)
        return 0.0, trivial

    # doubling scan for a feasible upper horizon
    lo = 0.0
    tau = 1.0 / 16.0
    feasible = None
    while True:
        ok, traj = _steer_attempt(spec, from_state, to_state, tau, config,
                                  tolerance, None)
        if ok:
            hi, feasible = tau, traj
            break
        lo = tau
        if tau >= TAU_MAX:
            raise ReachabilityError(
                f"target not reachable within horizon {TAU_MAX}; "
                f"best terminal miss {traj.endpoint_violation:.3e}")
        tau = min(2.0 * tau, TAU_MAX)

    while hi - lo > _BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        ok, traj = _steer_attempt(spec, from_state, to_state, mid, config,
                                  tolerance, (feasible.grid, feasible.controls))
        if ok:
            hi, feasible = mid, traj
        else:
            lo = mid
    return hi, feasible
