"""Two-term value expansion: residual series and suboptimal witness.

For dissipative problems the two-point value with horizon T splits into
T * v_bar plus two horizon-independent boundary layers (one leaving x, one
arriving at z) up to a residual that vanishes as T grows.  This module
measures that residual on a list of horizons, and builds the five-piece
witness control that certifies the upper half of the estimate:

    A  play the forward boundary-layer control on [0, T/2 - 1]
    B  short steer onto the static state
    C  rest at the static pair
    D  short steer off the static state (planned on the reversed field,
       played backwards in time)
    E  play the backward boundary-layer control reversed on the final
       [T/2 - 1] stretch, landing on z

Pieces are integrated with four RK4 substeps per control interval so the
played-backwards segments retrace their planning orbits tightly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BlowUpError, ConvergenceError, InfeasibleError,
                     PreconditionError, ReachabilityError)
from .infinite_horizon import (InfiniteValueEstimate, estimate_backward,
                               estimate_forward, reversed_problem,
                               truncation_ladder)
from .model import ProblemSpec, _as_vector
from .ocp_solver import (DEFAULT_CONFIG, SolverConfig, Trajectory, _kernels,
                         _rollout, min_time_steer, solve_finite_horizon)
from .static_opt import StaticSolution

_STEER_TOLERANCE = 1e-8
_SETTLE_RADIUS = 0.75
_WITNESS_SUBSTEPS = 4
_MONOTONE_SLACK = 1e-6
_RESIDUAL_BOUND_FACTOR = 0.02


def midpoint(traj: Trajectory, static: StaticSolution) -> float:
    """State deviation from the static optimum at the grid node nearest to
    half the horizon (earliest such node on a tie)."""
    half = 0.5 * traj.horizon
    idx = int(np.argmin(np.abs(traj.grid - half)))
    return float(np.linalg.norm(traj.states[idx] - static.y_bar))


@dataclass(frozen=True)
class WitnessPiece:
    name: str
    start: float
    step: float
    controls: np.ndarray  # (m, p); empty pieces are dropped before this

    @property
    def duration(self) -> float:
        return self.step * self.controls.shape[0]


@dataclass(eq=False)
class WitnessPlan:
    pieces: list
    horizon: float
    shifted_cost: float
    raw_cost: float
    endpoint_violation: float
    segment_costs: dict = field(default_factory=dict)

    def control_at(self, t: float) -> np.ndarray:
        """Control the plan plays at time t (right-continuous lookup)."""
        chosen = self.pieces[0].controls[0]
        for piece in self.pieces:
            m = piece.controls.shape[0]
            if t < piece.start - 1e-12:
                break
            j = int(min(m - 1, max(0.0, math.floor(
                (t - piece.start) / piece.step + 1e-12))))
            chosen = piece.controls[j]
        return chosen


def _node_count(duration: float, step: float) -> int:
    """Whole control intervals of size ``step`` fitting inside ``duration``."""
    return int(math.floor(duration / step + 1e-9))


def build_witness(spec: ProblemSpec, static: StaticSolution,
                  fwd: InfiniteValueEstimate, bwd: InfiniteValueEstimate,
                  T: float, config: SolverConfig | None = None):
    """Assemble and integrate the five-piece witness control for horizon T.

    Returns ``(plan, shifted_cost)``.  The boundary-layer estimates must
    retain trajectories at least T/2 - 1 long and settled within 0.75 of the
    static state at that time; otherwise a PreconditionError asks for longer
    truncation horizons.
    """
    config = config or DEFAULT_CONFIG
    if T <= 2.0:
        raise PreconditionError(
            f"witness needs horizon > 2 to fit its boundary layers, got {T}")
    layer = 0.5 * T - 1.0
    ftraj, btraj = fwd.trajectory, bwd.trajectory
    h_f = float(ftraj.grid[1] - ftraj.grid[0])
    h_b = float(btraj.grid[1] - btraj.grid[0])
    k_a = min(_node_count(layer, h_f), ftraj.n_intervals)
    k_e = min(_node_count(layer, h_b), btraj.n_intervals)
    if ftraj.horizon < layer - 1e-9 or btraj.horizon < layer - 1e-9:
        raise PreconditionError(
            f"boundary-layer trajectories are shorter than {layer:.6g}; "
            f"recompute the estimates with truncation horizons of at least "
            f"{layer + 1:.6g}")
    a_end = k_a * h_f           # piece A occupies [0, a_end]
    e_dur = k_e * h_b           # piece E occupies [T - e_dur, T]
    y_handoff = ftraj.states[k_a]
    y_pickup = btraj.states[k_e]
    if (np.linalg.norm(y_handoff - static.y_bar) > _SETTLE_RADIUS
            or np.linalg.norm(y_pickup - static.y_bar) > _SETTLE_RADIUS):
        raise PreconditionError(
            "boundary layers have not settled near the static state by "
            "half-horizon; recompute the estimates with longer truncation "
            "horizons")

    tau1, steer_on = min_time_steer(spec, y_handoff, static.y_bar, config,
                                    target_tolerance=_STEER_TOLERANCE)
    tau4, steer_off_rev = min_time_steer(reversed_problem(spec), y_pickup,
                                         static.y_bar, config,
                                         target_tolerance=_STEER_TOLERANCE)
    rest = T - a_end - e_dur - tau1 - tau4
    if rest < -1e-9:
        raise PreconditionError(
            f"steering pieces ({tau1:.3g} + {tau4:.3g}) do not fit in the "
            f"middle stretch of length {T - a_end - e_dur:.6g}; recompute "
            "the estimates with longer truncation horizons")
    rest = max(rest, 0.0)

    u_bar = np.clip(static.u_bar, spec.control_lower, spec.control_upper)
    pieces = []
    t = 0.0
    if k_a > 0:
        pieces.append(WitnessPiece("forward-layer", t, h_f,
                                   ftraj.controls[:k_a].copy()))
        t += a_end
    if steer_on.n_intervals > 0:
        h1 = float(steer_on.grid[1] - steer_on.grid[0])
        pieces.append(WitnessPiece("steer-on", t, h1,
                                   steer_on.controls.copy()))
        t += tau1
    if rest > 1e-12:
        m = max(1, int(round(rest / min(rest, 1.0 /
                                        config.intervals_per_unit_time))))
        pieces.append(WitnessPiece("rest", t, rest / m, np.tile(u_bar,
                                                                (m, 1))))
        t += rest
    if steer_off_rev.n_intervals > 0:
        h4 = float(steer_off_rev.grid[1] - steer_off_rev.grid[0])
        pieces.append(WitnessPiece("steer-off", t, h4,
                                   steer_off_rev.controls[::-1].copy()))
        t += tau4
    if k_e > 0:
        pieces.append(WitnessPiece("backward-layer", t, h_b,
                                   btraj.controls[:k_e][::-1].copy()))
        t += e_dur
    if not pieces:
        raise PreconditionError("witness construction produced no pieces")

    # integrate the stitched control from x with substeps per interval
    f, f0, _jac, _grads = _kernels(spec)
    y = ftraj.states[0].copy()
    shifted_total = 0.0
    raw_total = 0.0
    segment_costs = {}
    for piece in pieces:
        sub_controls = np.repeat(piece.controls, _WITNESS_SUBSTEPS, axis=0)
        states, shifted, raw, _ = _rollout(
            f, f0, static.v_bar, y, sub_controls,
            piece.step / _WITNESS_SUBSTEPS, want_cache=False)
        y = states[-1]
        segment_costs[piece.name] = shifted
        shifted_total += shifted
        raw_total += raw
    z = btraj.states[0]
    plan = WitnessPlan(pieces=pieces, horizon=T,
                       shifted_cost=shifted_total, raw_cost=raw_total,
                       endpoint_violation=float(np.linalg.norm(y - z)),
                       segment_costs=segment_costs)
    return plan, shifted_total


@dataclass(eq=False)
class ExpansionRow:
    T: float
    solved: bool
    shifted_value: float = math.nan
    raw_value: float = math.nan
    residual: float = math.nan
    witness_cost: float = math.nan
    witness_gap: float = math.nan
    witness_endpoint: float = math.nan
    midpoint_deviation: float = math.nan
    endpoint_violation: float = math.nan
    error: str = ""
    trajectory: Trajectory | None = None


@dataclass(eq=False)
class ExpansionReport:
    problem: str
    v_bar: float
    forward_value: float
    backward_value: float
    forward: InfiniteValueEstimate
    backward: InfiniteValueEstimate
    rows: list
    passes: bool
    failure_reason: str = ""

    def residuals(self):
        return np.array([row.residual for row in self.rows])


def _witness_initial_controls(plan: WitnessPlan, T: float, N: int,
                              p: int) -> np.ndarray:
    t_mid = (np.arange(N) + 0.5) * (T / N)
    out = np.empty((N, p))
    for i, t in enumerate(t_mid):
        out[i] = plan.control_at(float(t))
    return out


def residual_series(spec: ProblemSpec, static: StaticSolution, x, z, T_list,
                    config: SolverConfig | None = None, *,
                    horizons=None,
                    forward_estimate: InfiniteValueEstimate | None = None,
                    backward_estimate: InfiniteValueEstimate | None = None,
                    sequential_warm_start: bool = False) -> ExpansionReport:
    """Measure r(T) = C_T(x, z) - v_f(x) - v_b(z) over the given horizons.

    C_T is the optimal shifted cost of the two-point problem; v_f and v_b
    come from truncated infinite-horizon estimates whose retained
    trajectories are long enough to seed every witness.  Each row's solve is
    initialized from its witness control; rows that fail are recorded and
    the report is returned partially filled with ``passes`` false.

    The report passes when every row solved, |r| is non-increasing along the
    rows (1e-6 slack), and the final |r| is at most 2 percent of
    (1 + |v_f| + |v_b|).
    """
    config = config or DEFAULT_CONFIG
    Ts = sorted(float(T) for T in T_list)
    if len(Ts) == 0:
        raise ValueError("T_list must be non-empty")
    if len(set(Ts)) != len(Ts):
        raise ValueError("T_list entries must be distinct")
    if Ts[0] <= 0:
        raise ValueError("horizons must be positive")
    x = _as_vector(x, spec.state_dim, "initial state")
    z = _as_vector(z, spec.state_dim, "terminal state")

    if horizons is None:
        horizons = truncation_ladder(max(8.0, 0.5 * Ts[-1] + 1.0))
    fwd = forward_estimate or estimate_forward(spec, static, x, horizons,
                                               config, stop_early=False)
    bwd = backward_estimate or estimate_backward(spec, static, z, horizons,
                                                 config, stop_early=False)
    min_span = 0.5 * Ts[-1] - 1.0
    if (fwd.trajectory.horizon < min_span - 1e-9
            or bwd.trajectory.horizon < min_span - 1e-9):
        raise PreconditionError(
            f"supplied estimates retain trajectories shorter than "
            f"{min_span:.6g}; recompute them with longer truncation horizons")

    rows = []
    prev = None
    for T in Ts:
        N = max(1, round(config.intervals_per_unit_time * T))
        try:
            plan, w_cost = build_witness(spec, static, fwd, bwd, T, config)
            if sequential_warm_start and prev is not None:
                traj = solve_finite_horizon(spec, static, T, x, z, config,
                                            warm_start=prev)
            else:
                init = _witness_initial_controls(plan, T, N,
                                                 spec.control_dim)
                traj = solve_finite_horizon(spec, static, T, x, z, config,
                                            initial_controls=init)
            prev = traj
            c_T = traj.shifted_cost_total
            rows.append(ExpansionRow(
                T=T, solved=True, shifted_value=c_T,
                raw_value=traj.raw_cost_total,
                residual=c_T - fwd.value - bwd.value,
                witness_cost=w_cost, witness_gap=w_cost - c_T,
                witness_endpoint=plan.endpoint_violation,
                midpoint_deviation=midpoint(traj, static),
                endpoint_violation=traj.endpoint_violation,
                trajectory=traj))
        except (InfeasibleError, BlowUpError, PreconditionError,
                ReachabilityError, ConvergenceError) as exc:
            rows.append(ExpansionRow(T=T, solved=False, error=str(exc)))

    passes = True
    reason = ""
    if not all(row.solved for row in rows):
        passes = False
        bad = next(row for row in rows if not row.solved)
        reason = f"row T={bad.T:g} failed: {bad.error}"
    else:
        r = np.abs([row.residual for row in rows])
        if np.any(np.diff(r) > _MONOTONE_SLACK):
            passes = False
            reason = "|r| is not non-increasing along the horizon list"
        bound = _RESIDUAL_BOUND_FACTOR * (1.0 + abs(fwd.value)
                                          + abs(bwd.value))
        if passes and r[-1] > bound:
            passes = False
            reason = (f"final |r| = {r[-1]:.3e} exceeds the expansion bound "
                      f"{bound:.3e}")

    return ExpansionReport(
        problem=spec.name, v_bar=static.v_bar,
        forward_value=fwd.value, backward_value=bwd.value,
        forward=fwd, backward=bwd, rows=rows, passes=passes,
        failure_reason=reason)
