"""Exception types shared across the package."""


class GraphError(ValueError):
    """Invalid graph construction or malformed edge-list input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidStateError(RuntimeError):
    """Operation applied to a particle in a state it does not support."""


class UndefinedResultError(ArithmeticError):
    """A quantity is undefined for the given input (e.g. division by zero probability)."""


class ConfigError(ValueError):
    """Bad experiment or estimator configuration."""
