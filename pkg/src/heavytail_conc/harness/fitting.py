"""Fitting unspecified constants against empirical curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..numerics import BISECT_MAX_ITER

FIT_LO, FIT_HI = 1e-6, 1e6


@dataclass
class FitResult:
    value: float
    status: str  # ok, at-lower-bound, at-upper-bound, fit-failure


@dataclass
class ConstantFit:
    name: str
    value: float
    cells: list
    per_cell: list
    stability: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "cells": self.cells,
                "per_cell": self.per_cell, "stability": self.stability, "flags": self.flags}


def fit_constant(admissible: Callable[[float], bool], increasing: bool = True,
                 lo: float = FIT_LO, hi: float = FIT_HI, rel_tol: float = 1e-6) -> FitResult:
    """Extreme admissible constant in ``[lo, hi]`` by bisection in log scale.

    ``increasing=True``: admissibility is upward closed (a multiplier ``C``);
    returns the smallest admissible value.  ``increasing=False``: downward
    closed (a rate ``c``); returns the largest.
    """
    ok_lo, ok_hi = admissible(lo), admissible(hi)
    if increasing:
        if not ok_hi:
            return FitResult(math.inf, "fit-failure")
        if ok_lo:
            return FitResult(lo, "at-lower-bound")
    else:
        if not ok_lo:
            return FitResult(0.0, "fit-failure")
        if ok_hi:
            return FitResult(hi, "at-upper-bound")
    a, b = math.log(lo), math.log(hi)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (a + b)
        good = admissible(math.exp(mid))
        if good == increasing:
            b = mid
        else:
            a = mid
        if b - a <= rel_tol:
            break
    return FitResult(math.exp(b if increasing else a), "ok")


def fit_rate_to_curve(prob_of: Callable[[float, float], float], t_grid, ci_high) -> FitResult:
    """Largest rate ``c`` with ``prob_of(c, t) >= ci_high(t)`` on the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    ci_high = np.asarray(ci_high, dtype=float)

    def admissible(c):
        return all(prob_of(c, t) >= h for t, h in zip(t_grid, ci_high))
    return fit_constant(admissible, increasing=False)


def fit_threshold_multiplier(threshold_unit: Callable[[float], float], prob: Callable[[float], float],
                             emp, t_grid):
    """Smallest ``C`` with the upper Wilson limit of ``P{dev > C u(t)}`` at most ``prob(t)``.

    Grid points whose target probability lies below the Wilson upper limit of
    zero exceedances cannot be resolved by the sample and are left out;
    the returned mask marks the points used.
    """
    from .montecarlo import wilson_interval

    t_grid = np.asarray(t_grid, dtype=float)
    units = np.array([threshold_unit(t) for t in t_grid])
    targets = np.array([prob(t) for t in t_grid])
    size = emp.deviations.size
    floor = float(wilson_interval(0, size)[1])
    resolved = targets >= floor

    def admissible(C):
        k = emp.exceed_count(C * units[resolved])
        _, hi = wilson_interval(k, size)
        return bool(np.all(hi <= targets[resolved]))
    if not resolved.any():
        return FitResult(math.nan, "fit-failure"), resolved
    return fit_constant(admissible, increasing=True), resolved


def stability_ratio(values) -> float:
    v = np.asarray([x for x in values if np.isfinite(x) and x > 0], dtype=float)
    if v.size == 0:
        return math.inf
    return float(v.max() / v.min())
