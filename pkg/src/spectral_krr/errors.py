"""Exception hierarchy shared by all modules."""


class SpectralKRRError(Exception):
    """Base class for errors raised by this package."""


class UnsupportedManifoldError(SpectralKRRError, ValueError):
    pass


class InvalidPointError(SpectralKRRError, ValueError):
    pass


class InvalidSpecError(SpectralKRRError, ValueError):
    pass


class NotInRKHSError(SpectralKRRError, ValueError):
    pass


class LevelSplitError(SpectralKRRError, ValueError):
    """A function-count cutoff falls strictly inside a degenerate eigen-level."""


class ValidityError(SpectralKRRError, ValueError):
    """Inputs outside the range where a bound formula is defined."""


class NumericalError(SpectralKRRError, ArithmeticError):
    """A linear solve produced non-finite output."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
