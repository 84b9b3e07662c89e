"""Small numerical kernels shared by the modules: bracketing, bisection, quadrature."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

BISECT_MAX_ITER = 200
BISECT_TOL = 1e-12


class PreconditionError(ValueError):
    """An operation was called outside the hypotheses it certifies."""


class UnsupportedOperation(RuntimeError):
    """The object lacks what the operation needs (e.g. a density)."""


class DivergentIntegralWarning(RuntimeWarning):
    pass


def bisect_increasing(fn, target, lo, hi, tol=BISECT_TOL, max_iter=BISECT_MAX_ITER):
    """Vectorised bisection for ``fn(x) = target`` with ``fn`` non-decreasing.

    Returns the smallest ``x`` in ``[lo, hi]`` (to ``tol``) with ``fn(x) >= target``,
    which is the generalized-inverse convention.  ``lo``/``hi`` broadcast
    against ``target``; no bracket expansion is done here.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        up = fn(mid) >= target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= tol * (1.0 + np.abs(hi))):
            break
    return hi


def expand_bracket(fn, target, lo=-1.0, hi=1.0, max_doublings=2000):
    """Grow ``[lo, hi]`` until ``fn(lo) < target <= fn(hi)`` elementwise."""
    target = np.asarray(target, dtype=float)
    lo = np.full(target.shape, lo, dtype=float)
    hi = np.full(target.shape, hi, dtype=float)
    width = hi - lo
    for _ in range(max_doublings):
        bad_lo = fn(lo) >= target
        bad_hi = fn(hi) < target
        if not (bad_lo.any() or bad_hi.any()):
            return lo, hi
        width = width * 2.0
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            break
    raise RuntimeError("could not bracket the target value")


def quad(fn, a, b, epsabs=1e-12, epsrel=1e-10, limit=400):
    """Scalar adaptive Gauss-Kronrod quadrature.

    Returns ``inf`` (with a :class:`DivergentIntegralWarning`) when QUADPACK
    reports failure and the error estimate is not small, which is how
    divergent improper integrals present themselves.
    """
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)[:2]
    if not math.isfinite(val) or err > 1e-6 * (1.0 + abs(val)):
        warnings.warn("integral appears divergent", DivergentIntegralWarning, stacklevel=2)
        return math.inf
    return float(val)


def integrate_on_unit(fn, a, b, **kw):
    """``∫_a^b fn(x) dx`` for ``0 <= a < b <= 1`` with ``fn`` possibly singular at 0.

    Uses ``x = exp(-v)`` so the singular endpoint goes to ``v = inf``.
    Contributions from ``x`` below the normal float range are dropped; if
    ``v * fn(x) * x`` has not started to decay there the integral is treated
    as divergent (it is then at least of order ``∫ dv / v``).
    """
    if b <= a:
        return 0.0
    va = math.inf if a <= 0.0 else -math.log(a)
    vb = -math.log(b) if b < 1.0 else 0.0

    def integrand(v):
        x = math.exp(-v)
        if x < 1e-300:
            return 0.0
        return fn(x) * x

    if math.isinf(va):
        v_far = -math.log(1e-300)
        far, mid = abs(integrand(v_far)) * v_far, abs(integrand(0.5 * v_far)) * 0.5 * v_far
        if far > 0.0 and far >= mid:
            warnings.warn("integral appears divergent", DivergentIntegralWarning, stacklevel=2)
            return math.inf
    return quad(integrand, vb, va, **kw)


def golden_section_max(fn, lo, hi, tol=1e-12, max_iter=400):
    """Maximise a unimodal scalar function on ``[lo, hi]``; returns (x, fn(x), lo, hi)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if hi - lo <= tol * (1.0 + abs(lo) + abs(hi)):
            break
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fn(d)
    x = 0.5 * (lo + hi)
    return x, fn(x), lo, hi
