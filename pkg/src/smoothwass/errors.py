"""Exception hierarchy shared by every module."""


class SwdError(Exception):
    """Base class for all errors raised by smoothwass."""


class ParameterError(SwdError, ValueError):
    """Invalid numeric parameter (non-positive scale, bad weights, ...)."""


class DimensionError(SwdError, ValueError):
    """Mismatched or unsupported dimension."""


class PreconditionError(SwdError, ValueError):
    """An operation's input precondition does not hold."""


class ResourceError(SwdError, RuntimeError):
    """A problem exceeds a configured size cap."""


class QuadratureError(SwdError, RuntimeError):
    """Numerical integration failed to reach the requested accuracy."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class FitError(SwdError, RuntimeError):
    """Estimation failed (non-finite objective, too many failed trials)."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class ConfigError(SwdError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CellError(SwdError, RuntimeError):
    """An experiment cell failed; ``cell`` identifies it."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell
