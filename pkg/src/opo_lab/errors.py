"""Exception types raised by opo_lab."""


class OpoLabError(Exception):
    """Base class for every error raised by this package."""


class RangeError(OpoLabError, ValueError):
    """A parameter lies outside its admissible domain."""


class NotDiagonal(OpoLabError, ValueError):
    pass


class NegativeThermal(OpoLabError, ValueError):
    pass


class NotCoherent(OpoLabError, ValueError):
    pass


class NoBracket(OpoLabError, ValueError):
    """The function does not change sign on the search interval."""


class NoHalfCrossing(OpoLabError, ArithmeticError):
    """The phase density never drops to half its peak before re-rising or reaching pi."""


class NoThreshold(OpoLabError, ArithmeticError):
    pass


class SingularPurity(OpoLabError, ArithmeticError):
    pass


class NumericalError(OpoLabError, ArithmeticError):
    """Base for non-convergence failures (CLI exit code 3)."""


class NormalizationError(NumericalError):
    pass


class IntegrationNotConverged(NumericalError):
    pass


class NotUnimodal(NumericalError):
    """Golden-section search discarded its best point; the bracket is not unimodal."""


class ConfigError(OpoLabError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""
