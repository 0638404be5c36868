"""Exception hierarchy shared by every module."""


class FracMonoError(Exception):
    """Base class for all errors raised by fracmono."""


class ArgumentError(FracMonoError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(FracMonoError):
    """A scenario file failed to parse or validate."""


class NumericalError(FracMonoError):
    """A factorization, solve or eigenvalue computation failed."""


class ResourceError(FracMonoError):
    """A problem exceeds the configured size limits."""
