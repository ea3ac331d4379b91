"""Exception types shared across the package."""


class OmegaScaleError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OmegaScaleError, ValueError):
    """Invalid configuration, malformed input file, or bad argument combination."""


class DomainError(OmegaScaleError, ValueError):
    """Argument outside the mathematical or numerical domain of an operation."""


class UnsupportedModelError(OmegaScaleError, ValueError):
    """Operation not available for the given process model."""


class GuardViolationError(OmegaScaleError, RuntimeError):
    """A stability guard of the forward Volterra scheme was violated."""


class ConvergenceError(OmegaScaleError, RuntimeError):
    """An iterative computation failed to converge within its budget."""


class NonFiniteError(OmegaScaleError, RuntimeError):
    """A computation produced NaN or infinity."""
