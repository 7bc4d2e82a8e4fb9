"""Exception types raised by the driven-level solvers."""


class DrivenLevelError(Exception):
    """Base class for every numerical or configuration failure in the package."""


class InvalidParams(DrivenLevelError, ValueError):
    pass


class TruncationUnconverged(DrivenLevelError):
    """The Bessel or sideband series was cut before its terms fell below tolerance."""


class QuadratureFailure(DrivenLevelError):
    """An energy or time integral could not reach the requested tolerance."""


class PathMismatch(DrivenLevelError):
    """Two independent evaluation paths of the same flux disagree."""


class AlphaTooLarge(DrivenLevelError):
    """Drive ratio V_ac / (hbar Omega) is too large for the harmonic double sums."""


class DegenerateFit(DrivenLevelError):
    pass


class InvariantViolation(DrivenLevelError):
    """A computed trace broke one of its declared consistency checks."""


class ConfigError(DrivenLevelError, ValueError):
    pass
