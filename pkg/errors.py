"""Exceptions shared by the estimation, protocol and command-line layers."""


class QDSError(Exception):
    """Base class for every error raised by this project."""


class ConfigError(QDSError, ValueError):
    """A config file or config value failed validation."""


class CountsFormatError(QDSError, ValueError):
    """A counts file is malformed or violates 0 <= m <= n."""


class EstimationError(QDSError):
    """Finite-size estimation cannot proceed (e.g. no X-basis statistics)."""


class InfeasibleError(QDSError):
    """No secure configuration exists for the requested inputs."""


class InfeasibleTargetError(InfeasibleError):
    """The requested security parameter lies below the floor the bounds can reach."""


class PoolExhaustedError(QDSError):
    """The key pool holds fewer unused bits than the request needs."""


class PositionMismatchError(QDSError, ValueError):
    """Symmetrized key positions do not line up with a signature bundle."""
