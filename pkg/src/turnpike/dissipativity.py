"""Strict dissipativity certificates along solved trajectories.

A storage function S certifies strict dissipativity with margin kappa when

    S(y(a)) + integral of w over [a, b]
        >= S(y(b)) + kappa * integral of |y - y_bar|^2 + |u - u_bar|^2

holds on every sub-window [a, b].  The default storage is the linear one
built from the static multiplier.  Checks evaluate the inequality on many
windows of a trajectory by trapezoid quadrature (node convention: the
control at node k is the one active on the interval starting there, with
the final node reusing the last interval's control, matching the solver's
cost quadrature).  ``fit_alpha`` calibrates the largest kappa on a grid by
doubling and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError
from .model import ProblemSpec
from .ocp_solver import Trajectory
from .static_opt import StaticSolution

SLACK_TOLERANCE = 1e-6
_FIT_GRID_BASE = 1e-4
_FIT_BISECTIONS = 20
_FIT_FLOOR = 1e-9
_RANDOM_WINDOWS = 32


@dataclass(frozen=True)
class StorageCertificate:
    evaluate: Callable[[np.ndarray], float]
    kind: str
    description: str


def default_storage(static: StaticSolution) -> StorageCertificate:
    """Linear storage from the static multiplier: S(y) = <lambda_bar, y - y_bar>.

    Degenerates to the zero storage when the multiplier vanishes.
    """
    lam = np.asarray(static.lambda_bar, dtype=float)
    y_bar = np.asarray(static.y_bar, dtype=float)
    if float(np.abs(lam).max(initial=0.0)) <= 1e-12:
        return StorageCertificate(evaluate=lambda y: 0.0, kind="zero",
                                  description="S(y) = 0")
    return StorageCertificate(
        evaluate=lambda y: float(lam @ (np.asarray(y, dtype=float) - y_bar)),
        kind="linear",
        description="S(y) = <lambda_bar, y - y_bar>")


def negate_storage(storage: StorageCertificate) -> StorageCertificate:
    """The time-reversal companion -S (what the reversed problem dissipates)."""
    inner = storage.evaluate
    return StorageCertificate(evaluate=lambda y: -inner(y),
                              kind=storage.kind + "-negated",
                              description="-(" + storage.description + ")")


def _node_profiles(spec: ProblemSpec, static: StaticSolution,
                   storage: StorageCertificate, traj: Trajectory):
    """Per-node storage values plus trapezoid prefix integrals of the
    shifted cost and of the squared deviation from the static pair."""
    states = traj.states
    N = traj.n_intervals
    if N < 1:
        raise PreconditionError("trajectory has no intervals")
    h = float(traj.grid[1] - traj.grid[0])
    idx = np.minimum(np.arange(N + 1), N - 1)
    controls = traj.controls[idx]
    w = np.array([spec.cost_rate(states[k], controls[k]) - static.v_bar
                  for k in range(N + 1)])
    dev = (((states - static.y_bar) ** 2).sum(axis=1)
           + ((controls - static.u_bar) ** 2).sum(axis=1))
    s = np.array([storage.evaluate(states[k]) for k in range(N + 1)])
    # prefix trapezoid integrals: integral over [t_i, t_j] = W[j] - W[i]
    W = np.concatenate(([0.0], np.cumsum(0.5 * h * (w[:-1] + w[1:]))))
    D = np.concatenate(([0.0], np.cumsum(0.5 * h * (dev[:-1] + dev[1:]))))
    return s, W, D


def _window_pairs(n_nodes: int, extra_random: int, seed: int = 0):
    """All prefix windows [0, j] plus seeded random interior windows."""
    starts = [0] * (n_nodes - 1)
    ends = list(range(1, n_nodes))
    if extra_random > 0 and n_nodes > 2:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, n_nodes - 1, size=extra_random)
        b = rng.integers(0, n_nodes - 1, size=extra_random)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b) + 1
        starts.extend(int(v) for v in lo)
        ends.extend(int(v) for v in hi)
    return np.array(starts), np.array(ends)


@dataclass(frozen=True)
class DissipativityReport:
    passes: bool
    alpha_coefficient: float  # the margin kappa in alpha(r) = kappa * r^2
    worst_violation: float    # most negative window slack
    worst_window: tuple
    window_count: int
    trajectories_checked: int
    storage_description: str


def check_dissipativity(spec: ProblemSpec, static: StaticSolution,
                        storage: StorageCertificate, kappa: float,
                        traj: Trajectory,
                        window_count: int = _RANDOM_WINDOWS
                        ) -> DissipativityReport:
    """Evaluate the dissipation inequality with margin ``kappa`` on every
    prefix window of ``traj`` plus ``window_count`` seeded random windows.

    Passes when the worst slack is above -1e-6 (quadrature slop allowance).
    """
    s, W, D = _node_profiles(spec, static, storage, traj)
    i, j = _window_pairs(s.size, window_count)
    slack = (s[i] - s[j]) + (W[j] - W[i]) - kappa * (D[j] - D[i])
    worst = int(np.argmin(slack))
    worst_slack = float(slack[worst])
    t = traj.grid
    return DissipativityReport(
        passes=worst_slack >= -SLACK_TOLERANCE,
        alpha_coefficient=float(kappa),
        worst_violation=worst_slack,
        worst_window=(float(t[i[worst]]), float(t[j[worst]])),
        window_count=int(slack.size),
        trajectories_checked=1,
        storage_description=storage.kind)


def fit_alpha(spec: ProblemSpec, static: StaticSolution,
              storage: StorageCertificate,
              trajectories: Sequence[Trajectory]) -> float:
    """Largest margin kappa certified by ``storage`` across all windows of
    the given trajectories.

    A margin counts as certified exactly when ``check_dissipativity`` would
    pass it, i.e. worst window slack >= -SLACK_TOLERANCE; anything tighter
    would zero out on quadrature noise alone.  Doubling on the grid
    {1e-4 * 2**k : k = 0..20} finds an infeasible bracket, twenty bisections
    tighten it, and the feasible endpoint is floored to the 1e-9 grid.
    Requires at least one trajectory that actually leaves the static pair.
    """
    if len(trajectories) == 0:
        raise PreconditionError("need at least one trajectory to calibrate")
    profiles = []
    total_dev = 0.0
    for traj in trajectories:
        s, W, D = _node_profiles(spec, static, storage, traj)
        i, j = _window_pairs(s.size, _RANDOM_WINDOWS)
        base = (s[i] - s[j]) + (W[j] - W[i])
        weight = D[j] - D[i]
        profiles.append((base, weight))
        total_dev += float(D[-1])
    if total_dev <= 1e-14:
        raise PreconditionError(
            "trajectories never leave the static pair; margin is undefined")

    def feasible(kappa: float) -> bool:
        return all(float(np.min(base - kappa * weight)) >= -SLACK_TOLERANCE
                   for base, weight in profiles)

    if not feasible(0.0):
        return 0.0
    lo = 0.0
    hi = _FIT_GRID_BASE
    while feasible(hi):
        lo = hi
        hi *= 2.0
        if hi > _FIT_GRID_BASE * 2.0 ** _FIT_BISECTIONS:
            break
    for _ in range(_FIT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return math.floor(lo * (1.0 / _FIT_FLOOR)) / (1.0 / _FIT_FLOOR)
