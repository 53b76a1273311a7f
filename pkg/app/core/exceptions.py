"""
Exception types for the Duality Tool.
Every error raised by the core modules derives from DualityToolError.
"""


class DualityToolError(Exception):
    """Base class for all errors raised by the tool."""


class DimensionError(DualityToolError, ValueError):
    """Operand shapes do not fit the requested operation."""


class NotHermitianError(DualityToolError, ValueError):
    """A matrix expected to be Hermitian is not."""


class InvalidStateError(DualityToolError, ValueError):
    """A matrix or vector violates the state invariants."""


class FilteredStateError(DualityToolError, ValueError):
    """A lossy channel removed (almost) the whole state."""


class PriorError(DualityToolError, ValueError):
    """Prior probabilities are negative or do not sum to one."""


class InvalidPovmError(DualityToolError, ValueError):
    """POVM elements are not positive or do not sum to the identity."""


class HypothesisCountError(DualityToolError, ValueError):
    """The operation only supports a specific number of hypotheses."""


class DualityViolationError(DualityToolError, RuntimeError):
    """A computed point lies outside the coherence / path-information bound."""


class TomographyError(DualityToolError, RuntimeError):
    """Reconstruction failed or too many Monte Carlo rounds were lost."""


class ConfigError(DualityToolError, ValueError):
    """Configuration file or override could not be interpreted."""
