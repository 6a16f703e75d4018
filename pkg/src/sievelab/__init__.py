"""Bernoulli sieve: simulation, exact distributions and limit laws of the
occupancy statistics K_n, M_n, L_n and Z_n."""

from .errors import (CapabilityError, ConsistencyError, LatticeLawError, LawError,
                     NumericError, PrecisionError, SieveError)
from .laws import (Beta, Dirac, ExampleGamma, InverseCdf, LogPareto, MomentProfile, WLaw,
                   parse_law)

__version__ = "0.1.0"

__all__ = [
    "Beta", "Dirac", "ExampleGamma", "InverseCdf", "LogPareto", "MomentProfile", "WLaw",
    "parse_law", "SieveError", "LawError", "LatticeLawError", "CapabilityError",
    "NumericError", "PrecisionError", "ConsistencyError", "__version__",
]
