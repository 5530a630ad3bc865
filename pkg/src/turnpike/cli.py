"""Command-line front end.

Subcommands mirror the library: ``static``, ``solve``, ``infinite``,
``dissipativity``, ``pmp``, ``expansion``, ``lq``.  All artifacts are CSV
with ``#`` comment headers recording the subcommand, problem, seed, and
tolerances, and all floats use the %.12g format, so a rerun with the same
seed produces byte-identical bodies.  Exit codes: 0 on success, 2 when the
numerics fail (solver stall, blow-up, unreachable target), 1 on usage or
I/O errors.  TURNPIKE_THREADS caps the toolkit's own worker threads (used
to run independent boundary-layer estimates side by side).
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dissipativity as dissip
from . import expansion as expansion_mod
from . import infinite_horizon as infinite_mod
from .errors import TurnpikeError
from .lq_oracle import LqProblem, lq_static, lq_value, power_iteration_bound, \
    solve_are
from .model import load_problem
from .ocp_solver import SolverConfig, Trajectory, min_time_steer, \
    solve_finite_horizon
from .pmp import check_extremal
from .static_opt import solve_static


def _fmt(v) -> str:
    return "%.12g" % float(v)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise _UsageError(message)


@dataclass
class RunManifest:
    subcommand: str
    seed: int
    parameters: dict = field(default_factory=dict)

    def header_lines(self):
        lines = [f"# turnpike {self.subcommand}", f"# seed: {self.seed}"]
        lines.extend(f"# {key}: {value}"
                     for key, value in self.parameters.items())
        return lines


def thread_count() -> int:
    raw = os.environ.get("TURNPIKE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise _UsageError(f"TURNPIKE_THREADS must be an integer, got {raw!r}")


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise _UsageError(f"could not parse vector {text!r}")


def _parse_matrix(text: str) -> np.ndarray:
    rows = []
    for chunk in text.split(";"):
        entries = chunk.replace(",", " ").split()
        if entries:
            rows.append([float(v) for v in entries])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise _UsageError(f"could not parse matrix {text!r}")
    return np.array(rows)


def _write_lines(path, lines):
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def write_trajectory_csv(path, traj: Trajectory, manifest: RunManifest):
    n = traj.states.shape[1]
    p = traj.controls.shape[1] if traj.n_intervals else 0
    header = ["t"] + [f"y{i+1}" for i in range(n)] + [
        f"u{j+1}" for j in range(p)]
    lines = manifest.header_lines() + [",".join(header)]
    N = traj.n_intervals
    for k in range(traj.states.shape[0]):
        row = [_fmt(traj.grid[k])]
        row.extend(_fmt(v) for v in traj.states[k])
        if p:
            row.extend(_fmt(v) for v in traj.controls[min(k, N - 1)])
        lines.append(",".join(row))
    _write_lines(path, lines)


def read_trajectory_csv(path) -> Trajectory:
    """Rebuild a trajectory from the CSV layout written above.  The control
    column of the final node duplicates the last interval's control and is
    dropped on the way in."""
    rows = []
    columns = None
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if columns is None or not rows:
        raise ValueError(f"{path}: no data rows")
    n = sum(1 for c in columns if c.startswith("y"))
    p = sum(1 for c in columns if c.startswith("u"))
    data = np.array(rows)
    grid = data[:, 0]
    states = data[:, 1:1 + n]
    controls = data[:-1, 1 + n:1 + n + p] if p else np.zeros(
        (len(rows) - 1, 0))
    return Trajectory(grid=grid, states=states, controls=controls,
                      shifted_cost_total=float("nan"),
                      raw_cost_total=float("nan"),
                      endpoint_violation=float("nan"))


def _config_from_args(args) -> SolverConfig:
    return SolverConfig(
        intervals_per_unit_time=args.intervals,
        nlp_tolerance=args.nlp_tol,
        endpoint_tolerance=args.endpoint_tol)


def _manifest(args, subcommand, **extra) -> RunManifest:
    params = {"problem": getattr(args, "problem", "-")}
    params.update({"nlp_tolerance": _fmt(args.nlp_tol),
                   "endpoint_tolerance": _fmt(args.endpoint_tol),
                   "intervals_per_unit_time": str(args.intervals)}
                  if hasattr(args, "nlp_tol") else {})
    params.update({k: str(v) for k, v in extra.items()})
    return RunManifest(subcommand=subcommand, seed=args.seed,
                       parameters=params)


def _add_common(sub, solver_options=True):
    sub.add_argument("--problem", required=True,
                     help="built-in name (p1, p2, p3) or JSON file path")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--output", default=None)
    if solver_options:
        sub.add_argument("--intervals", type=int, default=20,
                         help="control intervals per unit time")
        sub.add_argument("--nlp-tol", dest="nlp_tol", type=float,
                         default=1e-8)
        sub.add_argument("--endpoint-tol", dest="endpoint_tol", type=float,
                         default=1e-6)


def _cmd_static(args) -> int:
    spec = load_problem(args.problem)
    static = solve_static(spec, seed=args.seed)
    header = ([f"y{i+1}" for i in range(spec.state_dim)]
              + [f"u{j+1}" for j in range(spec.control_dim)]
              + [f"lambda{i+1}" for i in range(spec.state_dim)]
              + ["v_bar", "kkt_residual"])
    row = (list(static.y_bar) + list(static.u_bar)
           + list(static.lambda_bar)
           + [static.v_bar, static.kkt_residual])
    if args.output:
        manifest = RunManifest("static", args.seed,
                               {"problem": args.problem})
        _write_lines(args.output, manifest.header_lines()
                     + [",".join(header), ",".join(_fmt(v) for v in row)])
    print("# " + ",".join(header))
    print(",".join(_fmt(v) for v in row))
    return 0


def _cmd_solve(args) -> int:
    spec = load_problem(args.problem)
    static = solve_static(spec, seed=args.seed)
    config = _config_from_args(args)
    x = _parse_vector(args.x)
    z = _parse_vector(args.z)
    traj = solve_finite_horizon(spec, static, args.T, x, z, config,
                                n_intervals=args.N)
    if args.output:
        write_trajectory_csv(args.output, traj,
                             _manifest(args, "solve", T=_fmt(args.T)))
    print("# T,value,shifted_cost,endpoint_violation")
    print(",".join([_fmt(traj.horizon), _fmt(traj.raw_cost_total),
                    _fmt(traj.shifted_cost_total),
                    _fmt(traj.endpoint_violation)]))
    return 0


def _cmd_infinite(args) -> int:
    spec = load_problem(args.problem)
    static = solve_static(spec, seed=args.seed)
    config = _config_from_args(args)
    state = _parse_vector(args.x)
    horizons = ([float(v) for v in args.horizons.split(",")]
                if args.horizons else None)
    if args.direction in ("f", "forward"):
        est = infinite_mod.estimate_forward(spec, static, state, horizons,
                                            config)
    else:
        est = infinite_mod.estimate_backward(spec, static, state, horizons,
                                             config)
    tail = infinite_mod.tail_decay_check(est, static)
    manifest = _manifest(args, "infinite", direction=est.direction)
    table = manifest.header_lines() + ["horizon,value"]
    table.extend(f"{_fmt(T)},{_fmt(v)}"
                 for T, v in zip(est.horizons, est.values))
    if args.output:
        _write_lines(args.output, table)
    else:
        for line in table:
            print(line)
    print(f"value={_fmt(est.value)} converged={est.converged} "
          f"tail_decay={'pass' if tail.passes else 'fail'}")
    return 0


def _cmd_dissipativity(args) -> int:
    spec = load_problem(args.problem)
    static = solve_static(spec, seed=args.seed)
    storage = dissip.default_storage(static)
    paths = []
    for pattern in args.trajectories:
        matches = sorted(glob.glob(pattern))
        paths.extend(matches if matches else [pattern])
    trajectories = [read_trajectory_csv(p) for p in paths]
    if args.fit:
        kappa = dissip.fit_alpha(spec, static, storage, trajectories)
    else:
        kappa = args.kappa
    worst = None
    windows = 0
    for traj in trajectories:
        report = dissip.check_dissipativity(spec, static, storage, kappa,
                                            traj, window_count=args.windows)
        windows += report.window_count
        if worst is None or report.worst_violation < worst.worst_violation:
            worst = report
    row = ",".join([storage.kind, _fmt(kappa), _fmt(worst.worst_violation),
                    "pass" if worst.passes else "fail"])
    if args.output:
        manifest = _manifest(args, "dissipativity",
                             windows=str(windows),
                             fitted=str(bool(args.fit)))
        _write_lines(args.output, manifest.header_lines()
                     + ["storage,kappa,worst_violation,result", row])
    print("# storage,kappa,worst_violation,result")
    print(row)
    return 0 if worst.passes else 2


def _cmd_pmp(args) -> int:
    spec = load_problem(args.problem)
    traj = read_trajectory_csv(args.trajectory)
    guess = _parse_vector(args.lambda0) if args.lambda0 else None
    check = check_extremal(spec, traj, guess)
    header = ("stationarity_residual,hamiltonian_drift,result,"
              + ",".join(f"lambda0_{i+1}" for i in range(spec.state_dim)))
    row = ",".join([_fmt(check.stationarity_residual),
                    _fmt(check.hamiltonian_drift),
                    "pass" if check.passes else "fail"]
                   + [_fmt(v) for v in check.lambda0])
    if args.output:
        manifest = _manifest(args, "pmp", trajectory=args.trajectory)
        _write_lines(args.output, manifest.header_lines() + [header, row])
    print("# " + header)
    print(row)
    return 0


def _cmd_expansion(args) -> int:
    spec = load_problem(args.problem)
    static = solve_static(spec, seed=args.seed)
    config = _config_from_args(args)
    x = _parse_vector(args.x)
    z = _parse_vector(args.z)
    T_list = [float(v) for v in args.horizons.split(",")]
    ladder = infinite_mod.truncation_ladder(max(8.0, 0.5 * max(T_list) + 1.0))
    if thread_count() >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fwd_future = pool.submit(infinite_mod.estimate_forward, spec,
                                     static, x, ladder, config,
                                     stop_early=False)
            bwd_future = pool.submit(infinite_mod.estimate_backward, spec,
                                     static, z, ladder, config,
                                     stop_early=False)
            fwd, bwd = fwd_future.result(), bwd_future.result()
    else:
        fwd = infinite_mod.estimate_forward(spec, static, x, ladder, config,
                                            stop_early=False)
        bwd = infinite_mod.estimate_backward(spec, static, z, ladder, config,
                                             stop_early=False)
    report = expansion_mod.residual_series(
        spec, static, x, z, T_list, config,
        forward_estimate=fwd, backward_estimate=bwd)

    manifest = _manifest(args, "expansion",
                         horizons=",".join(_fmt(T) for T in T_list))
    columns = ("T,shifted_value,residual,witness_cost,witness_gap,"
               "witness_endpoint,midpoint_deviation,endpoint_violation,"
               "solved")
    report_lines = manifest.header_lines() + [columns]
    residual_lines = manifest.header_lines() + ["T,residual"]
    for row in report.rows:
        report_lines.append(",".join([
            _fmt(row.T), _fmt(row.shifted_value), _fmt(row.residual),
            _fmt(row.witness_cost), _fmt(row.witness_gap),
            _fmt(row.witness_endpoint), _fmt(row.midpoint_deviation),
            _fmt(row.endpoint_violation), str(row.solved)]))
        residual_lines.append(f"{_fmt(row.T)},{_fmt(row.residual)}")

    if args.output:
        os.makedirs(args.output, exist_ok=True)
        _write_lines(os.path.join(args.output, "report.csv"), report_lines)
        _write_lines(os.path.join(args.output, "residuals.csv"),
                     residual_lines)
        for row in report.rows:
            if row.trajectory is None:
                continue
            traj = row.trajectory
            dev_state = np.linalg.norm(traj.states - static.y_bar, axis=1)
            lines = manifest.header_lines() + ["t,state_deviation"]
            lines.extend(f"{_fmt(t)},{_fmt(a)}"
                         for t, a in zip(traj.grid, dev_state))
            _write_lines(os.path.join(args.output,
                                      f"distance_T{row.T:g}.csv"), lines)
    else:
        for line in report_lines:
            print(line)

    solved_rows = [row for row in report.rows if row.solved]
    r_last = solved_rows[-1].residual if solved_rows else float("nan")
    print(",".join([
        "pass" if report.passes else "fail",
        _fmt(report.v_bar), _fmt(report.forward_value),
        _fmt(report.backward_value), _fmt(r_last)]))
    if not solved_rows:
        return 2
    return 0


def _cmd_lq(args) -> int:
    A = _parse_matrix(args.A)
    B = _parse_matrix(args.B)
    n = A.shape[0]
    p = B.shape[1]
    Q = _parse_matrix(args.Q) if args.Q else np.eye(n)
    R = _parse_matrix(args.R) if args.R else np.eye(p)
    yt = _parse_vector(args.y_target) if args.y_target else None
    ut = _parse_vector(args.u_target) if args.u_target else None
    lq = LqProblem(A=A, B=B, Q=Q, R=R, y_target=yt, u_target=ut)
    solution = solve_are(lq)
    bound = power_iteration_bound(solution.P, seed=args.seed)
    if args.output:
        manifest = RunManifest("lq", args.seed,
                               {"A": args.A, "B": args.B})
        lines = manifest.header_lines() + [
            ",".join(f"p{i+1}{j+1}" for i in range(n) for j in range(n)),
            ",".join(_fmt(v) for v in solution.P.ravel())]
        _write_lines(args.output, lines)
    print("# P (one CSV row per matrix row)")
    for row in solution.P:
        print(",".join(_fmt(v) for v in row))
    tail_header = "residual,spectral_bound"
    tail_row = [solution.residual, bound]
    if args.x is not None:
        static = lq_static(lq)
        tail_header += ",value"
        tail_row.append(lq_value(solution.P, static, _parse_vector(args.x)))
    print("# " + tail_header)
    print(",".join(_fmt(v) for v in tail_row))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="turnpike",
                     description="large-horizon expansion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("static", help="solve the static optimum")
    _add_common(s, solver_options=False)
    s.set_defaults(handler=_cmd_static)

    s = sub.add_parser("solve", help="solve a two-point problem")
    _add_common(s)
    s.add_argument("--T", dest="T", type=float, required=True,
                   help="horizon length")
    s.add_argument("--x", required=True, help="initial state (csv)")
    s.add_argument("--z", required=True, help="terminal state (csv)")
    s.add_argument("--N", dest="N", type=int, default=None,
                   help="override the control-interval count")
    s.set_defaults(handler=_cmd_solve)

    s = sub.add_parser("infinite", help="truncated boundary-layer estimate")
    _add_common(s)
    s.add_argument("--direction", choices=("f", "b", "forward", "backward"),
                   required=True)
    s.add_argument("--x", required=True, help="deviating endpoint state (csv)")
    s.add_argument("--horizons", default=None,
                   help="comma-separated truncation ladder override")
    s.set_defaults(handler=_cmd_infinite)

    s = sub.add_parser("dissipativity", help="storage-inequality checks")
    _add_common(s)
    s.add_argument("--trajectories", action="append", required=True,
                   help="trajectory CSV path or glob (repeatable)")
    s.add_argument("--kappa", type=float, default=None)
    s.add_argument("--fit", action="store_true",
                   help="fit the largest feasible quadratic margin")
    s.add_argument("--windows", type=int, default=32)
    s.set_defaults(handler=_cmd_dissipativity)

    s = sub.add_parser("pmp", help="stationarity check for a trajectory")
    _add_common(s, solver_options=False)
    s.add_argument("--trajectory", required=True)
    s.add_argument("--lambda0", default=None)
    s.set_defaults(handler=_cmd_pmp)

    s = sub.add_parser("expansion", help="residual series and witness")
    _add_common(s)
    s.add_argument("--x", required=True, help="initial state (csv)")
    s.add_argument("--z", required=True, help="terminal state (csv)")
    s.add_argument("--horizons", required=True,
                   help="comma-separated horizon list")
    s.set_defaults(handler=_cmd_expansion)

    s = sub.add_parser("lq", help="Riccati oracle for linear-quadratic data")
    s.add_argument("--A", required=True, help="matrix, rows split by ';'")
    s.add_argument("--B", required=True)
    s.add_argument("--Q", default=None)
    s.add_argument("--R", default=None)
    s.add_argument("--y-target", dest="y_target", default=None)
    s.add_argument("--u-target", dest="u_target", default=None)
    s.add_argument("--x", default=None,
                   help="evaluate the boundary-layer value at this state")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default=None)
    s.set_defaults(handler=_cmd_lq)

    return parser


def run(argv) -> int:
    """Parse ``argv`` (no program name) and execute one subcommand."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "dissipativity" and not args.fit \
                and args.kappa is None:
            raise _UsageError("dissipativity needs --kappa or --fit")
        return args.handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TurnpikeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
