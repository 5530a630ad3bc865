"""Numerical toolkit for the large-horizon structure of two-point optimal
control: static optimum, finite-horizon transcription, boundary-layer
estimates, dissipativity certificates, stationarity checks, and the
two-term value expansion with its witness construction."""

from .dissipativity import (DissipativityReport, StorageCertificate,
                            check_dissipativity, default_storage, fit_alpha,
                            negate_storage)
from .errors import (AdmissibilityError, BlowUpError, ConditioningError,
                     ConvergenceError, DegenerateProblemError,
                     InfeasibleError, NumericalDomainError,
                     PreconditionError, ReachabilityError,
                     StabilizabilityError, TurnpikeError,
                     UnsupportedCaseError)
from .expansion import (ExpansionReport, ExpansionRow, WitnessPiece,
                        WitnessPlan, build_witness, midpoint,
                        residual_series)
from .expressions import ExpressionError, compile_expression
from .infinite_horizon import (DEFAULT_HORIZONS, InfiniteValueEstimate,
                               TailDecayReport, estimate_backward,
                               estimate_forward, reversed_problem,
                               tail_decay_check, truncation_ladder)
from .lq_oracle import (LqProblem, RiccatiSolution, lq_static, lq_value,
                        power_iteration_bound, solve_are, solve_lyapunov)
from .model import (LinearizationData, ProblemSpec, builtin_problem,
                    clamp_control, evaluate_dynamics, kalman_rank, linearize,
                    load_problem, problem_from_dict, shifted_cost)
from .ocp_solver import (DEFAULT_CONFIG, SolverConfig, Trajectory, integrate,
                         min_time_steer, solve_finite_horizon, value)
from .pmp import ExtremalCheck, check_extremal, hamiltonian
from .static_opt import StaticSolution, kkt_residual, solve_static

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "BlowUpError", "ConditioningError",
    "ConvergenceError", "DEFAULT_CONFIG", "DEFAULT_HORIZONS",
    "DegenerateProblemError", "DissipativityReport", "ExpansionReport",
    "ExpansionRow", "ExpressionError", "ExtremalCheck", "InfeasibleError",
    "InfiniteValueEstimate", "LinearizationData", "LqProblem",
    "NumericalDomainError", "PreconditionError", "ProblemSpec",
    "ReachabilityError", "RiccatiSolution", "SolverConfig",
    "StabilizabilityError", "StaticSolution", "StorageCertificate",
    "TailDecayReport", "Trajectory", "TurnpikeError", "UnsupportedCaseError",
    "WitnessPiece", "WitnessPlan", "build_witness", "builtin_problem",
    "check_dissipativity", "check_extremal", "clamp_control",
    "compile_expression", "default_storage", "estimate_backward",
    "estimate_forward", "evaluate_dynamics", "fit_alpha", "hamiltonian",
    "integrate", "kalman_rank", "kkt_residual", "linearize", "load_problem",
    "lq_static", "lq_value", "midpoint", "min_time_steer", "negate_storage",
    "power_iteration_bound", "problem_from_dict", "residual_series",
    "reversed_problem", "shifted_cost", "solve_are", "solve_finite_horizon",
    "solve_lyapunov", "solve_static", "tail_decay_check",
    "truncation_ladder", "value",
]
