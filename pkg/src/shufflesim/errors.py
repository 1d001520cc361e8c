"""Exception types shared across the package."""


class ShuffleSimError(Exception):
    """Base class for all package errors."""


class ConfigError(ShuffleSimError):
    """Invalid experiment configuration (bad field, missing section, ...)."""


class InvalidModelError(ShuffleSimError, ValueError):
    """Model definition violates a structural constraint."""


class InvariantViolationError(ShuffleSimError, RuntimeError):
    """A runtime object broke one of its declared invariants."""


class IntegrationError(ShuffleSimError, RuntimeError):
    """ODE trajectory left the admissible region or the stepper failed."""


class ResolutionError(ShuffleSimError, ValueError):
    """Recorded data is too coarse for the requested computation."""
