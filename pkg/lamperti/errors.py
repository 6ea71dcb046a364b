"""
errors.py
=========
Exception hierarchy shared by every LampertiLab module.

Each class carries the process exit status the command-line front end
reports when the exception escapes a run:

  1  usage error (bad flags, out-of-range parameters)
  2  numerical-validation failure (oracle discrepancy, non-cdf output, ...)
  3  runtime cap breached (iteration, step or state caps)
"""


class LampertiError(Exception):
    """Base class for all errors raised by the lamperti package."""

    exit_code = 1


class ParameterError(LampertiError, ValueError):
    """An input is malformed or outside its documented range."""

    exit_code = 1


class SeriesDivergenceError(LampertiError):
    """The Lagrange-inversion series cannot be summed or certified at a point."""

    exit_code = 2


class ValidationError(LampertiError):
    """A numerical cross-check or structural assertion failed."""

    exit_code = 2


class RuntimeCapError(LampertiError):
    """An iteration, step or state cap was reached before completion."""

    exit_code = 3
