"""Exception types shared across the package."""


class TopoprobeError(Exception):
    """Base class for all errors raised by topoprobe."""


class ParameterError(TopoprobeError, ValueError):
    """A parameter lies outside its valid domain."""


class ShapeError(TopoprobeError, ValueError):
    """Array shapes or point-cloud dimensions do not line up."""


class CapacityError(TopoprobeError, RuntimeError):
    """A combinatorial structure would exceed its configured size cap."""

    def __init__(self, message, cap):
        super().__init__(message)
        self.cap = cap


class CorruptFiltrationError(TopoprobeError, ValueError):
    """A filtration is missing a face or is out of order."""


class DivergenceError(TopoprobeError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


class NumericOverflowError(TopoprobeError, FloatingPointError):
    """A forward pass produced non-finite activations."""
