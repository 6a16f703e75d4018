"""Exception hierarchy shared by all sievelab modules."""


class SieveError(Exception):
    """Base class for every error raised by sievelab."""


class LawError(SieveError, ValueError):
    """Invalid W-law parameters or an unparsable law string."""


class LatticeLawError(LawError):
    """The law of |log W| is lattice; the limit theory does not apply."""


class CapabilityError(SieveError):
    """The requested quantity is not defined or not supported for this law."""


class NumericError(SieveError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``achieved`` holds the best error estimate that was reached, if known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class PrecisionError(NumericError):
    """Requested evaluation lies outside the regime where the precision is trusted."""


class ConsistencyError(NumericError):
    """An internal identity (e.g. total probability) is violated beyond tolerance."""
