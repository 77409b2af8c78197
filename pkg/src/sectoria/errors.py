"""Exception hierarchy shared by every module."""


class SectoriaError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SectoriaError, ValueError):
    """Malformed matrix file, bad family parameters, out-of-range arguments."""


class SingularOperatorError(SectoriaError):
    """The operator has a (numerically) non-trivial kernel."""


class ResolventSingularError(SectoriaError):
    """The requested point is too close to the spectrum."""


class NotSectorialError(SectoriaError):
    """No finite resolvent constant could be certified at the requested angle."""


class DegenerateGramError(SectoriaError):
    """The square-function Gram matrix is not positive definite."""


class MarginError(SectoriaError, ValueError):
    """An evaluation point violates the boundary-distance margin."""


class QuadratureError(SectoriaError):
    """Adaptive refinement did not converge.

    ``iterates`` holds the last two approximations so callers can report them.
    """

    def __init__(self, message, iterates=None, change=None):
        super().__init__(message)
        self.iterates = iterates
        self.change = change
