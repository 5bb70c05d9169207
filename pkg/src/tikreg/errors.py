"""Exception and warning classes."""


class TikregError(Exception):
    """Base class for all package errors."""


class ConfigError(TikregError, ValueError):
    """Invalid configuration or parameter combination."""


class DataError(TikregError):
    """Input data is missing, malformed or inconsistent."""


class SourceError(DataError):
    """A source file could not be read or has an unusable shape."""


class ShapeMismatch(DataError):
    pass


class ZeroReference(DataError):
    """Relative error requested against a reference with zero error measure."""


class SymmetryViolation(DataError):
    """PSF or stencil lacks the double symmetry needed by the cosine transform."""


class NumericalError(TikregError):
    """Base class for numerical failures."""


class RankDeficient(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class NumericalBreakdown(NumericalError):
    pass


class InvalidFactors(NumericalError):
    pass


class SpectralMismatch(NumericalError):
    """Transform-path solution has a non-negligible imaginary part."""


class NoRoot(NumericalError):
    def __init__(self, msg, interval=None):
        super().__init__(msg)
        self.interval = interval


class StallNoDescent(NumericalError):
    """Line search failed; ``lam`` holds the last accepted iterate."""

    def __init__(self, msg, lam=None):
        super().__init__(msg)
        self.lam = lam


class FlatObjective(UserWarning):
    pass


class BoundaryMinimum(UserWarning):
    pass
