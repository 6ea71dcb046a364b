"""
lamperti
========
Numerical lab for the Lamperti maximal branching process
X_{n+1} = max of X_n independent copies of a branching number nu.

Modules:
  series      formal power series and Lagrange inversion of the design equation
  laws        target laws, invariant measures, pgfs and extinction conditioning
  design      branching cdf F for a target invariant law
  chain       truncated transition matrices, structure checks, classification
  hitting     strong stationary times, quasi-stationarity and hitting-time bounds
  montecarlo  seedable simulation of the recursion
  cli         command-line runs with reproducible artifacts
"""

from lamperti.config import TOOL_VERSION as __version__
from lamperti.errors import (
    LampertiError,
    ParameterError,
    RuntimeCapError,
    SeriesDivergenceError,
    ValidationError,
)

__all__ = [
    "__version__",
    "LampertiError",
    "ParameterError",
    "RuntimeCapError",
    "SeriesDivergenceError",
    "ValidationError",
]
