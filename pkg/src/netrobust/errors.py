"""Exception and warning classes shared across netrobust."""


class NetrobustError(Exception):
    """Base class for every error raised by this package."""


class UnstableMatrix(NetrobustError):
    """Spectral radius is not safely below one."""


class NoConvergence(NetrobustError):
    """An iterative routine hit its iteration cap."""


class RenormalizationOverflow(NetrobustError, OverflowError):
    """Gelfand squaring over/underflowed; the matrix is extremely non-normal.

    ``upper_bound`` holds the last valid Gelfand estimate (an upper bound on
    the spectral radius) when one was reached.
    """

    def __init__(self, message, upper_bound=None):
        self.upper_bound = upper_bound
        super().__init__(message)


class NotSymmetric(NetrobustError):
    pass


class NotNonnegative(NetrobustError):
    pass


class SingularSystem(NetrobustError):
    pass


class DimensionMismatch(NetrobustError, ValueError):
    pass


class BadSpec(NetrobustError, ValueError):
    pass


class BadConfig(NetrobustError, ValueError):
    pass


class BadShock(NetrobustError, ValueError):
    pass


class PatternTooLarge(NetrobustError, ValueError):
    pass


class SingularK(NetrobustError):
    pass


class UnstableClosedLoop(NetrobustError):
    pass


class TailUnresolved(NetrobustError):
    """Monte Carlo produced no hits at the requested tail level."""


class InsufficientGrid(NetrobustError, ValueError):
    pass


class MeasureMismatch(NetrobustError, ValueError):
    pass


class ParseError(NetrobustError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NegativeEntry(NetrobustError, ValueError):
    def __init__(self, i, j, value):
        self.index = (i, j)
        super().__init__(f"negative entry {value!r} at ({i}, {j})")


class ZeroRow(NetrobustError, ValueError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"sector {label!r} has an all-zero row")


class HorizonTooShort(NetrobustError):
    pass


class TooFewHits(UserWarning):
    """Monte Carlo tail estimate rests on fewer than 20 hits."""


class ZeroDegreeRow(UserWarning):
    """Degree normalization met isolated nodes; their rows were left at zero."""
