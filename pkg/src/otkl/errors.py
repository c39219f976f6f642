"""Exception types raised on invalid inputs."""


class OTKLError(ValueError):
    """Base class for all input/contract errors raised by this package."""


class DimensionError(OTKLError):
    """Array shapes or space sizes do not agree."""


class SupportError(OTKLError):
    """A measure has zero mass where the operation needs it to be positive."""


class MarginalMismatchError(OTKLError):
    """A joint measure does not have the marginal the caller claimed."""


class BudgetError(OTKLError):
    """Information budget is negative or otherwise unusable."""


class SolverStateError(OTKLError):
    """A solver result is in a state the operation cannot consume."""
