"""
Error types raised by the relkernel layers
"""


class RelKernelError(Exception):
    """Base class for every error raised by the package"""


class ConfigError(RelKernelError, ValueError):
    """A configuration value is missing, unknown or out of its domain"""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ParameterDomainError(RelKernelError, ValueError):
    """A function was called outside the set where it is defined"""


class QuadratureError(RelKernelError):
    """Adaptive quadrature did not reach the requested tolerance"""

    def __init__(self, message, partial=None, abs_error=None):
        self.partial = partial
        self.abs_error = abs_error
        detail = ""
        if partial is not None:
            detail = f" (partial estimate {partial!r}, error estimate {abs_error!r})"
        super().__init__(message + detail)


class InsufficientDataError(RelKernelError):
    """Too few surviving paths to fit the requested statistic"""


class NonIntegrableError(RelKernelError):
    """The requested time integral diverges"""


class IncompatibleSweepError(RelKernelError, ValueError):
    """Theorem tag and domain kind do not fit together"""


class EmptySweepError(RelKernelError):
    """Every sweep point was removed by the standard-error filter"""

    def __init__(self, dropped):
        self.dropped = dropped
        super().__init__(f"no sweep points retained ({dropped} dropped by the SE filter)")
