"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid schedule, environment or experiment configuration."""


class SynchronizationError(RuntimeError):
    """A client update is missing at a communication round."""
