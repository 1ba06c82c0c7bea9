"""Exception hierarchy.

``ValidationError`` marks malformed input (CLI exit status 2); every other
``OseenLabError`` is a numerical precondition failure (exit status 3).
"""


class OseenLabError(Exception):
    pass


class ValidationError(OseenLabError, ValueError):
    pass


class SingularPoint(OseenLabError):
    """A symbol was evaluated where its denominator vanishes."""


class NotFound(OseenLabError):
    """A bounded lattice search produced no admissible pair."""


class InfimumZero(OseenLabError):
    """The positive part of the lattice has infimum zero (irrational ratio)."""


class Infeasible(OseenLabError):
    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class IrrationalRatio(OseenLabError):
    pass


class SmallS(OseenLabError):
    pass


class BandwidthUnknown(UserWarning):
    """Grid input without a declared angular bandwidth; quadrature is not exact."""
