"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but degenerate, e.g. an all-zero raw
    vector or a zero-variance sample."""


class ConservationError(RuntimeError):
    """Total wealth drifted beyond the per-run tolerance."""
