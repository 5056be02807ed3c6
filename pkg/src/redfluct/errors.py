class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class ConfigError(ValueError):
    """A study configuration is malformed."""


class ValidationError(ValueError):
    """An output file violates the result schema."""
