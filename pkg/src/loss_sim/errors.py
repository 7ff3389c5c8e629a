"""Exception hierarchy shared by the solver, runtime and CLI."""


class LossError(Exception):
    """Base class for all errors raised by loss_sim."""


class DomainError(LossError, ValueError):
    """A position or index lies outside the valid domain."""


class DimensionError(LossError, ValueError):
    """Array shapes or lengths disagree."""


class LayoutError(LossError, ValueError):
    """Invalid patch decomposition or stencil width."""


class ExchangeError(LossError, RuntimeError):
    """A neighbor message was missing when a patch needed it."""


class HorizonError(LossError, ValueError):
    """Reference run would be contaminated by periodic wrap-around."""


class ConfigError(LossError, ValueError):
    """Malformed scenario configuration."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteError(LossError, FloatingPointError):
    """A wavefield became NaN or infinite during time stepping."""

    def __init__(self, step: int, field: str):
        self.step = step
        self.field = field
        super().__init__(f"non-finite values in {field!r} at step {step}")
