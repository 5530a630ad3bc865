"""Exception types shared across the toolkit.

Everything numerical raises a subclass of :class:`TurnpikeError`, so the
command-line layer can map "the math said no" to one exit code and genuine
usage mistakes to another.
"""

from __future__ import annotations


class TurnpikeError(Exception):
    """Base class for all solver and model failures."""


class AdmissibilityError(TurnpikeError):
    """A control lies outside the admissible box beyond clamping tolerance."""


class NumericalDomainError(TurnpikeError):
    """Problem data evaluated to a non-finite number."""


class BlowUpError(TurnpikeError):
    """State integration left the finite range.

    Carries ``step_index``, the first interval at which a non-finite
    component appeared.
    """

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


class ConvergenceError(TurnpikeError):
    """An iterative solver ran out of iterations before reaching tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateProblemError(TurnpikeError):
    """A linear system that the method requires to be invertible is singular."""


class InfeasibleError(TurnpikeError):
    """Terminal constraint could not be met; carries the best iterate found."""

    def __init__(self, message: str, best=None, violation: float = float("nan")):
        super().__init__(message)
        self.best = best
        self.violation = violation


class ReachabilityError(TurnpikeError):
    """Target state not reachable within the steering horizon cap."""


class StabilizabilityError(TurnpikeError):
    """No stabilizing initial gain could be constructed for the Riccati solve."""


class ConditioningError(TurnpikeError):
    """A diagnostic computation (costate propagation) lost all precision."""


class UnsupportedCaseError(TurnpikeError):
    """Requested a formula outside its validity region (e.g. nonzero multiplier)."""


class PreconditionError(TurnpikeError):
    """Inputs violate a documented precondition of the routine."""
