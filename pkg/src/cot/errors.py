"""Exception hierarchy.

Every error raised by the library derives from :class:`CotError` so callers
(and the CLI) can catch library failures without masking programming errors.
"""


class CotError(Exception):
    """Base class for all library errors."""


class NoSignChange(CotError):
    """Root bracket endpoints do not straddle a sign change."""


class NonFinite(CotError):
    """A function evaluation produced NaN or infinity."""


class SingularJacobian(CotError):
    """Newton step could not be computed from the Jacobian."""


class MaxIterExceeded(CotError):
    """Iteration budget exhausted; carries the best iterate found."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class DegenerateSample(CotError):
    """Sample set too small or has zero spread for the requested statistic."""


class EmptyMeasure(CotError):
    """Operation requires at least one sample point."""


class DimensionMismatch(CotError):
    """Point/measure dimension incompatible with the requested operation."""


class DomainError(CotError):
    """Argument outside the mathematical domain of the operation."""


class ZeroMass(CotError):
    """Restriction region carries (numerically) no prior mass."""


class BracketFailure(CotError):
    """No bracket containing a root could be established."""


class DivergentTilt(CotError):
    """Exponential tilt overflows on the capped domain."""


class NegativeTarget(CotError):
    """Constraint target must be nonnegative."""


class NoFeasibleCandidate(CotError):
    """None of the closed-form candidate systems has a solution."""


class InfeasibleTargets(CotError):
    """Constraint targets admit no solution; carries the failing segment."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class InconsistentOrder(CotError):
    """Thresholds must be strictly ascending."""


class CoverageGap(CotError):
    """Transport map pieces leave prior mass unmapped."""


class GridInfeasible(CotError):
    """No grid assignment meets the constraints at the stated tolerance."""


class BarrierInfeasible(CotError):
    """A log-barrier argument is non-positive; names the violated bound."""


class StepUnderflow(CotError):
    """Line search failed to find an acceptable step above underflow."""


class Unsupported(CotError):
    """Combination of inputs is outside the supported feature set."""


class ConfigError(CotError):
    """Run configuration failed validation; message names the offending key."""
