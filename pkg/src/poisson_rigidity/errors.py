"""Exception types raised by the toolkit."""


class RigidityError(Exception):
    """Base class for all package errors."""


class DimensionError(RigidityError, ValueError):
    """Arguments have incompatible sizes."""


class BackendMismatchError(RigidityError, ValueError):
    """Fields living on different backends were combined."""


class NotSemisimpleError(RigidityError):
    """The Killing form of the algebra is (numerically) degenerate."""


class MissingCobracketError(RigidityError):
    """An operation needs a cobracket but the algebra carries none."""


class FlowDivergenceError(RigidityError, FloatingPointError):
    """Non-finite values appeared while integrating a flow."""


class HomotopyConditioningError(RigidityError):
    """A pseudo-inverse lost rank or became too ill-conditioned."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class PreconditionError(RigidityError, ValueError):
    """Inputs to an iteration fail the validation gate."""

    def __init__(self, message: str, measured: dict | None = None):
        super().__init__(message)
        self.measured = dict(measured or {})


class ConfigError(RigidityError, ValueError):
    """Malformed or unknown configuration."""
