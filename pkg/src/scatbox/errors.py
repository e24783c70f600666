"""Exception types shared across the toolkit."""


class ScatboxError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(ScatboxError, ValueError):
    """A configuration value is out of its valid range."""


class InputError(ScatboxError, ValueError):
    """Input data violates a contract (shape, emptiness, format)."""


class ConfigurationError(ScatboxError, ValueError):
    """A dataset or run cannot be built from the given inputs."""


class TrainingDiverged(ScatboxError, RuntimeError):
    """The optimizer produced a non-finite loss."""
