"""Scalar laws described through their CDF, quantile function and density.

Every law exposes both the quantile ``H(s) = inf{t : F(t) >= s}`` and the
reflected quantile ``H*(x) = H(1 - x)``.  The reflected form is evaluated
directly (not through ``1 - x``) so that far right tails keep full relative
precision.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .numerics import (
    PreconditionError,
    UnsupportedOperation,
    bisect_increasing,
    expand_bracket,
    integrate_on_unit,
)

__all__ = [
    "Distribution1D", "Normal", "Uniform", "Exponential", "Weibull2", "Pareto",
    "SymPareto", "PointMass", "Discrete", "QuantileLaw", "CdfLaw", "TopAtomLaw",
    "QuantileStar", "TransportMap", "parse_law", "quantile_eval",
    "local_lip_quantile", "check_tail_condition", "transport_apply",
    "min_of_inverses",
]


def _check_prob(s, open_right=True):
    s = np.asarray(s, dtype=float)
    bad = (s <= 0.0) | ((s >= 1.0) if open_right else (s > 1.0)) | np.isnan(s)
    if np.any(bad):
        raise ValueError("probability argument must lie in (0, 1)")
    return s


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


class Distribution1D:
    """Base class.  Subclasses override what they know in closed form.

    The generic fallbacks are: quantile by monotone bisection of the CDF,
    ``H*`` through the quantile, sampling by inverse transform, and tail
    integrals by quadrature on the quantile representation.
    """

    name = "law"
    atomic = False

    @property
    def params(self) -> tuple:
        return ()

    # distribution function ---------------------------------------------
    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def cdf_left(self, x):
        """``P{Y < x}``; equals ``cdf`` for laws without atoms."""
        return self.cdf(x)

    # quantiles -----------------------------------------------------------
    def quantile(self, s):
        s = _check_prob(s)
        lo, hi = expand_bracket(self.cdf, s)
        out = bisect_increasing(self.cdf, s, lo, hi)
        return _scalar_or_array(out, s)

    def isf(self, x):
        """Reflected quantile ``H*(x) = H(1 - x)``."""
        x = _check_prob(x)
        if np.all(x >= 0.5):
            return self.quantile(1.0 - x)

        # H(1-x) = inf{t : sf(t) <= x}, bisected on sf to keep tail precision
        def neg_sf(t):
            return -np.asarray(self.sf(t))

        lo, hi = expand_bracket(neg_sf, -x)
        out = bisect_increasing(neg_sf, -x, lo, hi)
        return _scalar_or_array(out, x)

    def from_gauss(self, z):
        """``F^{-1}(Phi(z))`` with both tails evaluated without cancellation."""
        z = np.asarray(z, dtype=float)
        lower = np.minimum(z, 0.0)
        upper = np.maximum(z, 0.0)
        left = np.asarray(self.quantile(np.clip(special.ndtr(lower), 1e-300, 0.5)))
        right = np.asarray(self.isf(np.clip(special.ndtr(-upper), 1e-300, 0.5)))
        out = np.where(z <= 0.0, left, right)
        return _scalar_or_array(out, z)

    # density ---------------------------------------------------------------
    @property
    def has_density(self) -> bool:
        return False

    def density(self, x):
        raise UnsupportedOperation(f"{self.name} has no density")

    # sampling --------------------------------------------------------------
    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        low = u < 0.5
        out = np.empty(np.shape(u))
        if np.any(low):
            out[low] = np.asarray(self.quantile(np.maximum(u[low], 1e-300)))
        if np.any(~low):
            out[~low] = np.asarray(self.isf(np.maximum(1.0 - u[~low], 1e-300)))
        return out if size is not None else float(out)

    # integrals -------------------------------------------------------------
    def star_integral(self, a: float, b: float) -> float:
        """``∫_a^b H*(v) dv`` for ``0 <= a <= b <= 1``; ``inf`` if divergent."""
        if b <= a:
            return 0.0
        total = 0.0
        if a < 0.5:
            total += integrate_on_unit(lambda v: float(self.isf(v)), a, min(b, 0.5))
        if b > 0.5:
            # the left tail of H is near v = 1; integrate H(w) with w = 1 - v
            total += integrate_on_unit(lambda w: float(self.quantile(w)),
                                       1.0 - b, 1.0 - max(a, 0.5))
        return total

    def quantile_integral(self, a: float, b: float) -> float:
        """``∫_a^b H(u) du``."""
        return self.star_integral(1.0 - b, 1.0 - a)

    def mean(self) -> float:
        return self.star_integral(0.0, 1.0)

    def upper_partial_mean(self, s: float) -> float:
        """``E[Y ; Y > s]``."""
        return self.star_integral(0.0, float(self.sf(s)))

    def upper_partial_mean_closed(self, s: float) -> float:
        """``E[Y ; Y >= s]``."""
        return self.star_integral(0.0, 1.0 - float(self.cdf_left(s)))

    def essential_sup(self) -> float:
        return math.inf

    def __repr__(self):
        p = ",".join(f"{v:g}" for v in self.params)
        return f"{self.name}({p})"


class Normal(Distribution1D):
    name = "normal"

    def __init__(self, loc: float = 0.0, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.loc, self.scale = float(loc), float(scale)

    @property
    def params(self):
        return (self.loc, self.scale)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.loc) / self.scale)

    def sf(self, x):
        return special.ndtr((self.loc - np.asarray(x, dtype=float)) / self.scale)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(self.loc + self.scale * special.ndtri(s), s)

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(self.loc - self.scale * special.ndtri(x), x)

    def from_gauss(self, z):
        return self.loc + self.scale * np.asarray(z, dtype=float)

    @property
    def has_density(self):
        return True

    def density(self, x):
        return stats.norm.pdf(x, self.loc, self.scale)

    def sample(self, rng, size=None):
        return self.loc + self.scale * rng.standard_normal(size)

    def mean(self):
        return self.loc

    def upper_partial_mean(self, s):
        z = (s - self.loc) / self.scale
        return self.loc * special.ndtr(-z) + self.scale * stats.norm.pdf(z)

    upper_partial_mean_closed = upper_partial_mean


class Uniform(Distribution1D):
    name = "uniform"

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lo, self.hi = float(lo), float(hi)

    @property
    def params(self):
        return (self.lo, self.hi)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(self.lo + (self.hi - self.lo) * s, s)

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(self.hi - (self.hi - self.lo) * x, x)

    @property
    def has_density(self):
        return True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        w = self.hi - self.lo
        # H*(v) = hi - w v
        return self.hi * (b - a) - 0.5 * w * (b * b - a * a)

    def essential_sup(self):
        return self.hi


class Exponential(Distribution1D):
    name = "exponential"

    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)

    @property
    def params(self):
        return (self.rate,)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(-np.log1p(-s) / self.rate, s)

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(-np.log(x) / self.rate, x)

    @property
    def has_density(self):
        return True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sample(self, rng, size=None):
        return rng.standard_exponential(size) / self.rate

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        # antiderivative of -ln(v)/rate is (v - v ln v)/rate
        def anti(v):
            return 0.0 if v <= 0 else (v - v * math.log(v)) / self.rate
        return anti(b) - anti(a)

    def mean(self):
        return 1.0 / self.rate


class Weibull2(Distribution1D):
    """Symmetric law with ``P{|X| > t} = exp(-t^q)``."""

    name = "weibull2"

    def __init__(self, q: float):
        if not q > 0:
            raise ValueError("q must be positive")
        self.q = float(q)

    @property
    def params(self):
        return (self.q,)

    def _tail(self, x):
        return 0.5 * np.exp(-np.abs(x) ** self.q)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 1.0 - self._tail(x), self._tail(x))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self._tail(x), 1.0 - self._tail(x))

    def isf(self, x):
        x = _check_prob(x)
        v = np.minimum(x, 1.0 - x)
        mag = np.log(0.5 / v) ** (1.0 / self.q)
        return _scalar_or_array(np.where(x <= 0.5, mag, -mag), x)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(-np.asarray(self.isf(s)), s)

    @property
    def has_density(self):
        return True

    def density(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return 0.5 * self.q * a ** (self.q - 1.0) * np.exp(-a ** self.q)

    def sample(self, rng, size=None):
        mag = rng.standard_exponential(size) ** (1.0 / self.q)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return mag * sign

    def mean(self):
        return 0.0

    def variance(self):
        return math.gamma(1.0 + 2.0 / self.q)

    def upper_partial_mean(self, s):
        # by symmetry E[X; X > s] = E[X; X > |s|] = Γ(1 + 1/q, |s|^q) / 2
        a = 1.0 + 1.0 / self.q
        return 0.5 * math.gamma(a) * special.gammaincc(a, abs(s) ** self.q)

    upper_partial_mean_closed = upper_partial_mean


class Pareto(Distribution1D):
    """Law on ``[1, inf)`` with survival ``min{1, x^-q}``."""

    name = "pareto"

    def __init__(self, q: float):
        if not q > 0:
            raise ValueError("q must be positive")
        self.q = float(q)

    @property
    def params(self):
        return (self.q,)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1, -np.expm1(-self.q * np.log(np.maximum(x, 1.0))), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1, np.maximum(x, 1.0) ** -self.q, 1.0)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(np.exp(-np.log1p(-s) / self.q), s)

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(x ** (-1.0 / self.q), x)

    @property
    def has_density(self):
        return True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1, self.q * np.maximum(x, 1.0) ** (-self.q - 1.0), 0.0)

    def sample(self, rng, size=None):
        u = 1.0 - rng.random(size)  # in (0, 1]
        return u ** (-1.0 / self.q)

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        e = 1.0 - 1.0 / self.q
        if e <= 0:
            if a <= 0:
                return math.inf
            return math.log(b / a) if e == 0 else (b ** e - a ** e) / e
        return (b ** e - a ** e) / e

    def mean(self):
        return self.q / (self.q - 1.0) if self.q > 1 else math.inf


class SymPareto(Distribution1D):
    """Symmetric law with density ``(alpha/2)(1+|x|)^(-1-alpha)``."""

    name = "sympareto"

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)

    @property
    def params(self):
        return (self.alpha,)

    def _tail(self, x):
        return 0.5 * (1.0 + np.abs(x)) ** -self.alpha

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 1.0 - self._tail(x), self._tail(x))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self._tail(x), 1.0 - self._tail(x))

    def isf(self, x):
        x = _check_prob(x)
        v = np.minimum(x, 1.0 - x)
        mag = np.expm1(-np.log(2.0 * v) / self.alpha)
        return _scalar_or_array(np.where(x <= 0.5, mag, -mag), x)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(-np.asarray(self.isf(s)), s)

    @property
    def has_density(self):
        return True

    def density(self, x):
        return 0.5 * self.alpha * (1.0 + np.abs(np.asarray(x, dtype=float))) ** (-1.0 - self.alpha)

    def sample(self, rng, size=None):
        u = 1.0 - rng.random(size)
        mag = np.expm1(-np.log(u) / self.alpha)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return mag * sign

    def mean(self):
        return 0.0 if self.alpha > 1 else math.nan

    def abs_moment(self, r: float) -> float:
        """``E|X|^r`` (infinite when ``r >= alpha``)."""
        if r >= self.alpha:
            return math.inf
        return self.alpha * special.beta(r + 1.0, self.alpha - r)


class PointMass(Distribution1D):
    name = "point"
    atomic = True

    def __init__(self, c: float):
        self.c = float(c)

    @property
    def params(self):
        return (self.c,)

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.c, 1.0, 0.0)

    def cdf_left(self, x):
        return np.where(np.asarray(x, dtype=float) > self.c, 1.0, 0.0)

    def quantile(self, s):
        s = _check_prob(s)
        return _scalar_or_array(np.full(np.shape(s), self.c), s)

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(np.full(np.shape(x), self.c), x)

    def sample(self, rng, size=None):
        return np.full(size, self.c) if size is not None else self.c

    def star_integral(self, a, b):
        return max(b - a, 0.0) * self.c

    def essential_sup(self):
        return self.c


class Discrete(Distribution1D):
    """Finitely many atoms ``values`` with probabilities ``weights``."""

    name = "discrete"
    atomic = True

    def __init__(self, values: Sequence[float], weights: Sequence[float]):
        v = np.asarray(values, dtype=float)
        w = np.asarray(weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1 or v.size == 0:
            raise ValueError("values and weights must be equal-length 1-d arrays")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("weights must be a probability vector")
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        keep = w > 0
        self.values, self.weights = v[keep], w[keep]
        self._cum = np.cumsum(self.weights)
        # upper tail masses from the top, accurate for tiny probabilities
        self._upper = np.cumsum(self.weights[::-1])[::-1]

    @property
    def params(self):
        return tuple(self.values)

    def cdf(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)

    def cdf_left(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="left")
        return np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)

    def sf(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        upper = np.append(self._upper, 0.0)
        return upper[idx]

    def quantile(self, s):
        s = _check_prob(s)
        idx = np.searchsorted(self._cum, s, side="left")
        idx = np.minimum(idx, self.values.size - 1)
        return _scalar_or_array(self.values[idx], s)

    def isf(self, x):
        # H(1-x) is the smallest atom v_i with P{Y > v_i} <= x
        x = _check_prob(x)
        strictly_above = np.append(self._upper[1:], 0.0)
        idx = np.searchsorted(-strictly_above, -np.asarray(x), side="left")
        idx = np.minimum(idx, self.values.size - 1)
        return _scalar_or_array(self.values[idx], x)

    def sample(self, rng, size=None):
        return rng.choice(self.values, size=size, p=self.weights)

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        # H* is a step function: atom i (from the top) occupies [U_{i+1}, U_i)
        tops = self._upper
        bottoms = np.append(self._upper[1:], 0.0)
        lo = np.clip(bottoms, a, b)
        hi = np.clip(tops, a, b)
        return float(np.sum(self.values * (hi - lo)))

    def mean(self):
        return float(np.dot(self.values, self.weights))

    def essential_sup(self):
        return float(self.values[-1])


class QuantileLaw(Distribution1D):
    """Law of ``hstar(U)`` for ``U`` uniform on (0,1) and ``hstar`` non-increasing.

    ``hstar`` is the reflected quantile ``H*``; the CDF is recovered by
    bisection.  An optional ``star_antiderivative`` ``A`` with
    ``A(b) - A(a) = ∫_a^b hstar`` gives exact integrals.
    """

    def __init__(self, hstar: Callable, name: str = "quantile-law",
                 star_antiderivative: Callable | None = None,
                 support: tuple[float, float] = (-math.inf, math.inf)):
        self._hstar = hstar
        self.name = name
        self._anti = star_antiderivative
        self.support = support

    def isf(self, x):
        x = _check_prob(x)
        return _scalar_or_array(np.asarray(self._hstar(x), dtype=float), x)

    def quantile(self, s):
        s = _check_prob(s)
        return self.isf(1.0 - s)

    def sf(self, t):
        # P{H*(U) > t} = sup{x : H*(x) > t}, found by bisection in log x
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty(flat.shape)
        for i, ti in enumerate(flat):
            out[i] = self._sf_scalar(ti)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def _sf_scalar(self, t):
        def above(x):
            return float(self._hstar(x)) > t
        lo, hi = 1e-300, 1.0 - 1e-16
        if not above(lo):
            return 0.0
        if above(hi):
            return 1.0
        # bisection on log scale for the left part, linear near 1
        for _ in range(300):
            mid = math.sqrt(lo * hi) if hi < 0.5 else 0.5 * (lo + hi)
            if above(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return hi

    def cdf(self, x):
        return 1.0 - np.asarray(self.sf(x))

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        if self._anti is not None:
            return float(self._anti(b) - self._anti(a))
        return integrate_on_unit(lambda v: float(self._hstar(v)), a, b)

    def essential_sup(self):
        return self.support[1]


class CdfLaw(Distribution1D):
    """Law given by user callables; quantile and density are optional."""

    def __init__(self, cdf: Callable, name: str = "custom", quantile: Callable | None = None,
                 density: Callable | None = None, atomic: bool = False):
        self._cdf = cdf
        self._quantile = quantile
        self._density = density
        self.name = name
        self.atomic = atomic

    def cdf(self, x):
        return np.asarray(self._cdf(np.asarray(x, dtype=float)), dtype=float)

    def quantile(self, s):
        if self._quantile is None:
            return super().quantile(s)
        s = _check_prob(s)
        return _scalar_or_array(np.asarray(self._quantile(s), dtype=float), s)

    @property
    def has_density(self):
        return self._density is not None

    def density(self, x):
        if self._density is None:
            raise UnsupportedOperation(f"{self.name} has no density")
        return np.asarray(self._density(np.asarray(x, dtype=float)), dtype=float)


class TopAtomLaw(Distribution1D):
    """``Y`` below ``s`` kept as is, everything at or above ``s`` moved to one atom.

    This is the law of ``Y 1{Y < s} + m 1{Y >= s}`` with ``m = E(Y | Y >= s)``.
    """

    atomic = True

    def __init__(self, base: Distribution1D, s: float, atom: float, mass: float):
        self.base, self.s, self.atom, self.mass = base, float(s), float(atom), float(mass)
        self._below = 1.0 - self.mass  # P{Y < s}
        self.name = f"top-atom[{base.name}]"

    @property
    def params(self):
        return (self.s, self.atom, self.mass)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lower = np.where(x < self.s, self.base.cdf(np.minimum(x, self.s)), self._below)
        return lower + np.where(x >= self.atom, self.mass, 0.0)

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        lower = np.where(x < self.s, self.base.cdf_left(np.minimum(x, self.s)), self._below)
        return lower + np.where(x > self.atom, self.mass, 0.0)

    def quantile(self, s):
        s = _check_prob(s)
        return self.isf(1.0 - s)

    def isf(self, x):
        x = _check_prob(x)
        at_top = x < self.mass
        safe = np.where(at_top, 0.5, x)
        below = np.asarray(self.base.isf(np.clip(safe, 1e-300, 1.0 - 1e-16)))
        return _scalar_or_array(np.where(at_top, self.atom, below), x)

    def sample(self, rng, size=None):
        y = np.asarray(self.base.sample(rng, size))
        out = np.where(y >= self.s, self.atom, y)
        return out if size is not None else float(out)

    def star_integral(self, a, b):
        if b <= a:
            return 0.0
        top = max(0.0, min(b, self.mass) - a)
        rest = self.base.star_integral(max(a, self.mass), b) if b > self.mass else 0.0
        return self.atom * top + rest

    def essential_sup(self):
        return self.atom


# ---------------------------------------------------------------------------
# parsing of law specifications ("pareto:q=3", "weibull2:q=0.5", "normal")

_LAWS = {
    "normal": (Normal, ("loc", "scale")),
    "uniform": (Uniform, ("lo", "hi")),
    "exponential": (Exponential, ("rate",)),
    "weibull2": (Weibull2, ("q",)),
    "pareto": (Pareto, ("q",)),
    "sympareto": (SymPareto, ("alpha",)),
    "point": (PointMass, ("c",)),
}


def parse_law(spec: str) -> Distribution1D:
    """Build a law from a string such as ``"pareto:q=3"`` or ``"uniform:lo=0,hi=2"``."""
    m = re.fullmatch(r"\s*([a-z0-9_]+)\s*(?::\s*(.*))?", spec.lower())
    if not m or m.group(1) not in _LAWS:
        raise ValueError(f"unknown law specification {spec!r}; known: {sorted(_LAWS)}")
    cls, allowed = _LAWS[m.group(1)]
    kwargs = {}
    if m.group(2):
        for part in m.group(2).split(","):
            if not part.strip():
                continue
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in allowed:
                raise ValueError(f"law {m.group(1)!r} takes parameters {allowed}, got {key!r}")
            kwargs[key] = float(val)
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class QuantileStar:
    """``H*(x) = H(1 - x)`` for a base law; non-increasing on (0,1)."""

    base: Distribution1D

    def __call__(self, x):
        return self.base.isf(x)

    def integral(self, a: float, b: float) -> float:
        return self.base.star_integral(a, b)


@dataclass(frozen=True)
class TransportMap:
    """Coordinatewise map ``z -> (F_i^{-1}(Phi(z_i)))_i``."""

    marginals: tuple

    def __init__(self, marginals):
        object.__setattr__(self, "marginals", tuple(marginals))

    @property
    def n(self) -> int:
        return len(self.marginals)

    @classmethod
    def iid(cls, law: Distribution1D, n: int) -> "TransportMap":
        return cls([law] * n)

    def __call__(self, z):
        return transport_apply(self, z)


def quantile_eval(dist: Distribution1D, s: float) -> float:
    """Generalized inverse ``inf{t : F(t) >= s}``; ``s`` must lie in (0,1)."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    return float(dist.quantile(s))


def local_lip_quantile(dist: Distribution1D, s, mode: str = "plain"):
    """Local Lipschitz constant of ``F^{-1}`` at ``s`` (``mode="plain"``) or of
    ``F^{-1} o Phi`` at the real point ``s`` (``mode="gauss"``).

    Zero densities give ``inf``.
    """
    if not dist.has_density:
        raise UnsupportedOperation(f"{dist.name} has no density")
    s = np.asarray(s, dtype=float)
    if mode == "plain":
        _check_prob(s)
        h = np.asarray(dist.density(dist.quantile(s)), dtype=float)
        num = np.ones_like(h)
    elif mode in ("gauss", "gauss-composed"):
        h = np.asarray(dist.density(dist.from_gauss(s)), dtype=float)
        num = stats.norm.pdf(s) * np.ones_like(h)
    else:
        raise ValueError("mode must be 'plain' or 'gauss'")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(h > 0, num / np.where(h > 0, h, 1.0), math.inf)
    return _scalar_or_array(out, s)


def check_tail_condition(dist: Distribution1D, regime: str, q: float, grid) -> dict:
    """Check the local Lipschitz tail condition of the Weibull or power regime on ``grid``.

    weibull: ``Lip(F^{-1} o Phi, s) <= (1+|s|)^(-1+2/q)`` with ``0 < q < 1``.
    power:   ``Lip(F^{-1}, s) <= min{s, 1-s}^(-1-1/q)`` with ``q > 2``.
    """
    grid = np.asarray(grid, dtype=float)
    if regime == "weibull":
        if not 0 < q < 1:
            raise PreconditionError("weibull regime needs 0 < q < 1")
        lhs = np.asarray(local_lip_quantile(dist, grid, "gauss"), dtype=float)
        rhs = (1.0 + np.abs(grid)) ** (-1.0 + 2.0 / q)
    elif regime == "power":
        if not q > 2:
            raise PreconditionError("power regime needs q > 2")
        lhs = np.asarray(local_lip_quantile(dist, grid, "plain"), dtype=float)
        rhs = np.minimum(grid, 1.0 - grid) ** (-1.0 - 1.0 / q)
    else:
        raise ValueError("regime must be 'weibull' or 'power'")
    lhs = np.atleast_1d(lhs)
    ok = lhs <= rhs * (1.0 + 1e-12)
    points = [{"s": float(s), "lhs": float(a), "rhs": float(b), "ok": bool(k)}
              for s, a, b, k in zip(grid, lhs, rhs, ok)]
    return {"law": repr(dist), "regime": regime, "q": float(q), "grid": points,
            "pass": bool(np.all(ok))}


def transport_apply(tmap: TransportMap, z):
    """Apply ``T`` to ``z`` of shape ``(..., n)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != tmap.n:
        raise ValueError(f"expected last dimension {tmap.n}, got {z.shape[-1]}")
    out = np.empty_like(z)
    first = tmap.marginals[0]
    if all(m is first for m in tmap.marginals):
        return np.asarray(first.from_gauss(z), dtype=float).reshape(z.shape)
    for i, law in enumerate(tmap.marginals):
        out[..., i] = law.from_gauss(z[..., i])
    return out


def min_of_inverses(f_inv: Callable, g_inv: Callable, s: float) -> float:
    """``min{f^{-1}(s), g^{-1}(s)}``: the point where ``max{f, g}`` reaches ``s``."""
    return min(f_inv(s), g_inv(s))
