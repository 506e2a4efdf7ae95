"""Exception types shared across the package."""


class ClarkeDPError(Exception):
    """Base class for every error raised by clarkedp."""

    #: short machine-readable name used in CLI error JSON
    code = "ClarkeDPError"


class DomainEscape(ClarkeDPError):
    code = "DomainEscape"


class NonFinite(ClarkeDPError):
    code = "NonFinite"


class NotConvex(ClarkeDPError):
    code = "NotConvex"


class EstimatorInconsistent(ClarkeDPError):
    """Sampled directional derivatives contradict sublinearity by more than 2*tol."""

    code = "EstimatorInconsistent"


class NoCompactBound(ClarkeDPError):
    code = "NoCompactBound"


class EmptyFeasible(ClarkeDPError):
    code = "EmptyFeasible"


class MaxIterExceeded(ClarkeDPError):
    """Value iteration hit ``max_iter``; ``partial`` holds (ValueFunction, SolveReport)."""

    code = "MaxIterExceeded"

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class TooLarge(ClarkeDPError):
    code = "TooLarge"


class UntrustedRegion(ClarkeDPError):
    code = "UntrustedRegion"


class SchemaError(ClarkeDPError):
    code = "SchemaError"
