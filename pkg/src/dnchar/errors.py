"""Exception types shared across the package."""


class DNCharError(Exception):
    """Base class for all library errors."""


class NonZeroMean(DNCharError, ValueError):
    """J was applied to a function whose mean is not (numerically) zero."""


class GridMismatch(DNCharError, ValueError):
    pass


class TruncationLoss(UserWarning):
    """A product had energy beyond the truncation order and it was discarded."""


class NotRealOperator(DNCharError, ValueError):
    pass


class OnBoundaryCurve(DNCharError, ValueError):
    """The point z lies (numerically) on the image curve eta(Gamma)."""


class RankAmbiguous(DNCharError):
    """No singular-value gap of the required size brackets the threshold."""

    def __init__(self, message, candidates=(), singular_values=None):
        super().__init__(message)
        self.candidates = tuple(candidates)
        self.singular_values = singular_values


class WindingIllConditioned(DNCharError):
    def __init__(self, message, raw=None):
        super().__init__(message)
        self.raw = raw


class DegenerateMesh(DNCharError, ValueError):
    pass


class SingularInterior(DNCharError):
    pass


class Underresolved(DNCharError, ValueError):
    pass


class NoCoordinateCandidate(DNCharError):
    pass


class WitnessNotInvertible(DNCharError, ValueError):
    pass


class EmptyRegion(DNCharError):
    pass


class NoUnivalentCandidate(DNCharError):
    pass


class OddRank(DNCharError):
    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank
