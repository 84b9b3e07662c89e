"""Numerical toolkit for concentration bounds of heavy-tailed product measures."""

from . import constants, dist, numerics  # noqa: F401
from .numerics import PreconditionError, UnsupportedOperation  # noqa: F401

__version__ = "0.1.0"
