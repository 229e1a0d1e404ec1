"""Exception hierarchy. The CLI maps each class to its own exit code."""


class QkdRouteError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(QkdRouteError, ValueError):
    exit_code = 2


class InputFileError(QkdRouteError, OSError):
    exit_code = 3


class PreconditionError(QkdRouteError, ValueError):
    exit_code = 4


class SizeLimitError(QkdRouteError):
    exit_code = 5


class NetworkMismatchError(QkdRouteError):
    exit_code = 6


class DisconnectedError(PreconditionError):
    """No path exists between two nodes."""


class GenerationError(QkdRouteError, RuntimeError):
    """Random graph generation did not produce a connected graph."""

    exit_code = 7
