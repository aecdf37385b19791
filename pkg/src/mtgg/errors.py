"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside an operation's domain."""


class SolverError(RuntimeError):
    """A numerical solver could not produce a result."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class ConfigError(ValueError):
    """An experiment configuration is malformed or violates a precondition."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
