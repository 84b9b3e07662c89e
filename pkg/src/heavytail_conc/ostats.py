"""Order statistics of uniform samples and bounds on trimmed sums.

Envelopes that hold simultaneously for all ranks ``k`` with explicit
probability, the exponential-spacings representation of uniform order
statistics, and the resulting high-probability bounds on sums of the top
order statistics of an i.i.d. non-negative sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import constants
from .dist import Distribution1D, QuantileStar
from .numerics import (
    DivergentIntegralWarning,
    PreconditionError,
    bisect_increasing,
    golden_section_max,
    quad,
)

__all__ = [
    "xi1", "xi2", "xi_inverse", "xi_inverse_bound", "XiInverse",
    "binomial_chernoff", "order_stat_envelope", "OrderStatEnvelope",
    "renyi_sample", "exp_weighted_sum_tail", "power_integral",
    "power_log_integral", "IntegralSandwich", "trimmed_sum_bound",
    "TrimmedSumBound", "observed_trimmed_sum", "c0_constant", "c0_objective",
    "C0Result", "renyi_transform", "fast_growth_A",
    "pareto_trimmed_bound", "ParetoTrimmedBound", "TOP_BOTTOM_PREFACTOR",
]

TOP_BOTTOM_PREFACTOR = math.pi ** 2 / 3.0
SHRINK = math.exp(-1.0 - 2.0 / math.e)


def xi1(t):
    """``e^t (1 - t)`` on [0, 1], decreasing from 1 to 0."""
    t = np.asarray(t, dtype=float)
    return np.exp(t) * (1.0 - t)


def xi2(t):
    """``e^{-t} (1 + t)`` on [0, inf), decreasing from 1 to 0."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t) * (1.0 + t)


class XiInverse(NamedTuple):
    exact: np.ndarray | float
    bound: np.ndarray | float


def _as_out(x, like):
    return float(x) if np.ndim(like) == 0 else np.asarray(x)


def _xi1_inv_from_log(logy):
    """``xi1^{-1}(y)`` from ``log y``: solve ``-t - log(1-t) = -log y``."""
    z = -np.asarray(logy, dtype=float)
    out = bisect_increasing(lambda t: -t - np.log1p(-t), z, 0.0, 1.0)
    return np.where(np.isinf(z), 1.0, np.where(z <= 0, 0.0, out))


def _xi1_inv_complement_from_log(logy):
    """``1 - xi1^{-1}(y)`` from ``log y``, accurate when the result is tiny.

    With ``u = 1 - t`` the equation is ``log u - u = log y - 1``; solve for
    ``v = log u`` in ``[L, L + 1]``, ``L = log y - 1``.
    """
    L = np.asarray(logy, dtype=float) - 1.0
    lo = L
    hi = np.minimum(L + 1.0, 0.0)
    v = bisect_increasing(lambda v: v - np.exp(v), L, lo, hi, tol=1e-15)
    return np.exp(v)


def _xi2_inv_from_log(logy):
    z = -np.asarray(logy, dtype=float)
    hi = z + np.log1p(4.0 * z) + np.sqrt(2.0 * z + 10.0 * z ** 1.5) + 1.0
    out = bisect_increasing(lambda t: t - np.log1p(t), z, 0.0, hi)
    return np.where(z <= 0, 0.0, out)


def xi_inverse_bound(which: int, y):
    """Closed-form upper bounds on ``xi_1^{-1}`` and ``xi_2^{-1}``."""
    y = np.asarray(y, dtype=float)
    if which == 1:
        return np.minimum(np.sqrt(2.0 * (1.0 - y)), 1.0 - y / math.e)
    with np.errstate(divide="ignore"):
        L = -np.log(y)
    low_branch = L + np.log1p(4.0 * L)
    high_branch = np.sqrt(2.0 * L + 10.0 * L ** 1.5)
    return np.where(y <= 2.0 / math.e, low_branch, high_branch)


def xi_inverse(which: int, y) -> XiInverse:
    """Exact inverse of ``xi_1`` or ``xi_2`` by bisection, with its closed-form bound."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    y_arr = np.asarray(y, dtype=float)
    if which == 1 and np.any((y_arr < 0) | (y_arr > 1)):
        raise ValueError("xi_1^{-1} needs y in [0, 1]")
    if which == 2 and np.any((y_arr <= 0) | (y_arr > 1)):
        raise ValueError("xi_2^{-1} needs y in (0, 1]")
    with np.errstate(divide="ignore"):
        logy = np.log(y_arr)
    exact = _xi1_inv_from_log(logy) if which == 1 else _xi2_inv_from_log(logy)
    bound = xi_inverse_bound(which, y_arr)
    if np.any(exact > bound * (1 + 1e-9) + 1e-12):
        raise AssertionError("inverse exceeds its closed-form bound")
    return XiInverse(_as_out(exact, y), _as_out(bound, y))


def binomial_chernoff(n: int, p: float, s: float) -> float:
    """Exponential-moment bound ``(np/s)^s ((n-np)/(n-s))^{n-s}`` on ``P{Bin(n,p) >= s}``."""
    if not (n * p <= s < n):
        raise ValueError("need np <= s < n")
    if s == 0:
        return 1.0
    log_val = s * math.log(n * p / s) if p > 0 else -math.inf
    log_val += (n - s) * math.log((n - n * p) / (n - s))
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# order-statistic envelopes


@dataclass
class OrderStatEnvelope:
    n: int
    t: float
    k: np.ndarray
    top: np.ndarray
    bottom: np.ndarray
    renyi: np.ndarray
    prob_top_bottom: float
    prob_renyi: float
    top_raw: np.ndarray | None = None

    @property
    def per_k(self):
        return list(zip(self.k.tolist(), self.top.tolist(), self.bottom.tolist(), self.renyi.tolist()))

    @property
    def joint(self) -> np.ndarray:
        """``min(top, bottom)``: the bound holding on the first event."""
        return np.minimum(self.top, self.bottom)


def _renyi_spread(n, k, t):
    logk = np.log(k)
    first = (t + np.sqrt(logk)) * np.sqrt(k) / np.sqrt(n * (n - k + 1.0))
    second = (t * t + logk) / (n - k + 1.0)
    return np.maximum(first, second)


def order_stat_envelope(n: int, t: float, c_low: float | None = None,
                        c_high: float | None = None, C: float | None = None) -> OrderStatEnvelope:
    """Upper envelopes for the uniform order statistics ``gamma_(k)``, k = 1..n."""
    if n < 1 or not t > 0:
        raise ValueError("need n >= 1 and t > 0")
    c_low = constants.get("renyi_c_low", c_low)
    c_high = constants.get("renyi_c_high", c_high)
    C = constants.get("renyi_C", C)
    k = np.arange(1, n + 1, dtype=float)
    m = n - k + 1.0
    top = k / (n + 1.0) * (1.0 + _xi2_inv_from_log((-t * t - 4.0 * np.log(k)) / (2.0 * k)))
    gap = _xi1_inv_complement_from_log((-t * t - 4.0 * np.log(m)) / (2.0 * m))
    bottom = 1.0 - m / (n + 1.0) * gap
    c = np.where(k <= n / 2.0, c_low, c_high)
    renyi = 1.0 - (n - k) / n * np.exp(-c * _renyi_spread(n, k, t))
    tiny = np.finfo(float).tiny
    clamp = lambda v: np.clip(v, tiny, 1.0)  # noqa: E731
    return OrderStatEnvelope(
        n=n, t=float(t), k=k.astype(int), top=clamp(top), bottom=clamp(bottom),
        renyi=clamp(renyi),
        prob_top_bottom=1.0 - TOP_BOTTOM_PREFACTOR * math.exp(-t * t / 2.0),
        prob_renyi=1.0 - C * math.exp(-t * t / 2.0),
        top_raw=top,
    )


def renyi_sample(n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform order statistics ``1 - exp(-sum_{j<=k} Z_j / (n - j + 1))``.

    Returns shape ``(n,)`` or ``(size, n)``, sorted increasingly along the last axis.
    """
    shape = (n,) if size is None else (size, n)
    z = rng.standard_exponential(shape)
    return renyi_transform(z)


def renyi_transform(z) -> np.ndarray:
    """Map standard exponentials ``Z`` (last axis of length n) to ordered uniforms."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    weights = 1.0 / (n - np.arange(n, dtype=float))
    return -np.expm1(-np.cumsum(z * weights, axis=-1))


def exp_weighted_sum_tail(a, r: float, c: float | None = None) -> float:
    """``2 exp(-c min{(r/|a|_2)^2, r/|a|_inf})`` bounding ``P{|sum a_j (Z_j - 1)| > r}``."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ValueError("a must be non-zero")
    c = constants.get("exp_sum_c", c)
    l2 = float(np.linalg.norm(a))
    linf = float(np.max(np.abs(a)))
    return 2.0 * math.exp(-c * min((r / l2) ** 2, r / linf))


# ---------------------------------------------------------------------------
# power integrals


class IntegralSandwich(NamedTuple):
    exact: float
    upper: float
    lower: float


def power_integral(a: float, b: float, r: float, C: float | None = None,
                   c: float | None = None) -> IntegralSandwich:
    """``∫_a^b x^{-r} dx`` with the two-sided estimate
    ``min{|1-r|^{-1}, log(b/a)} (a^{1-r} + b^{1-r})`` scaled by ``C`` and ``c``."""
    if not (0 < a <= b):
        raise ValueError("need 0 < a <= b")
    C = constants.get("power_interp_C", C)
    c = constants.get("power_interp_c", c)
    span = math.log(b / a)
    if r == 1.0:
        exact = span
    else:
        exact = (b ** (1.0 - r) - a ** (1.0 - r)) / (1.0 - r)
    inv = math.inf if r == 1.0 else 1.0 / abs(1.0 - r)
    shape = min(inv, span) * (a ** (1.0 - r) + b ** (1.0 - r))
    return IntegralSandwich(exact, C * shape, c * shape)


def power_log_integral(a: float, b: float, r: float, C: float | None = None,
                       c: float | None = None) -> IntegralSandwich:
    """``∫_a^b x^{-r} (log 1/x)^{-2} dx`` for ``0 < a < b < 1/e``, ``r > 1``, with its
    two-sided closed-form estimate."""
    if not (0 < a < b < 1.0 / math.e) or not r > 1:
        raise ValueError("need 0 < a < b < 1/e and r > 1")
    C = constants.get("power_log_C", C)
    c = constants.get("power_log_c", c)
    La, Lb = -math.log(a), -math.log(b)
    g = r - 1.0
    # x = e^{-v}: integrand e^{g v} v^{-2}, scaled by e^{-g La} for stability
    val = integrate.quad(lambda v: math.exp(g * (v - La)) / (v * v), Lb, La,
                         epsabs=0.0, epsrel=1e-11, limit=400)[0]
    exact = val * math.exp(g * La)
    shape = min(1.0, math.log(La / Lb)) / Lb
    shape += min(1.0 / g, math.log(b / a)) * (1.0 / g + La) ** -2 * a ** (1.0 - r)
    return IntegralSandwich(exact, C * shape, c * shape)


# ---------------------------------------------------------------------------
# trimmed sums


@dataclass
class TrimmedSumBound:
    n: int
    j: int
    k: int
    lam: float
    value: float
    branch: str
    prob: float
    flags: list = field(default_factory=list)


BRANCHES = ("quadrature", "substituted", "fast-growth")


def _hstar_of(H) -> Callable:
    if isinstance(H, (QuantileStar, Distribution1D)):
        return H if isinstance(H, QuantileStar) else QuantileStar(H)
    raise TypeError("expected a QuantileStar or Distribution1D")


def _log_quad(fn, a, b):
    """``∫_a^b fn`` for ``0 < a < b`` via ``x = e^w``."""
    if b <= a:
        return 0.0
    return quad(lambda w: fn(math.exp(w)) * math.exp(w), math.log(a), math.log(b))


def trimmed_sum_bound(H, n: int, j: int, k: int, lam: float, branch: str = "quadrature",
                      p: float | None = None, T: float | None = None,
                      C: float | None = None) -> TrimmedSumBound:
    """High-probability bound on ``sum_{i=n-k}^{n-j} Y_(i)``, the (j+1)-th through
    (k+1)-th largest of ``n`` i.i.d. non-negative draws with reflected
    quantile ``H``.

    Branches: ``quadrature`` integrates the exact envelope, ``substituted``
    uses the weighted change of variables, ``fast-growth`` uses the closed
    correction term (needs ``p``, ``T``).  All hold with probability
    ``1 - (pi^2/3) exp(-lam^2/2)``.
    """
    if not (0 <= j <= k < n):
        raise PreconditionError("need 0 <= j <= k < n")
    if lam < 2:
        raise PreconditionError("need lambda >= 2")
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    hs = _hstar_of(H)
    lam2 = lam * lam
    flags: list = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DivergentIntegralWarning)
        if branch == "quadrature":
            value = _quadrature_branch(hs, n, j, k, lam2)
        elif branch == "substituted":
            value = _substituted_branch(hs, n, j, k, lam2)
        else:
            if p is None or T is None:
                raise PreconditionError("fast-growth branch needs p and T")
            ok, worst = _fast_growth_check(hs, p, T)
            if not ok:
                flags.append(f"growth hypothesis fails at (delta, x) = {worst}")
                warnings.warn(flags[-1], RuntimeWarning, stacklevel=2)
            value = _fast_growth_branch(hs, n, j, k, lam2, p, T, constants.get("fast_growth_C", C))
    for w in caught:
        if issubclass(w.category, DivergentIntegralWarning):
            flags.append("divergent quantile integral")
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if not math.isfinite(value):
        value = math.inf
        if "divergent quantile integral" not in flags:
            flags.append("divergent quantile integral")
    prob = 1.0 - TOP_BOTTOM_PREFACTOR * math.exp(-lam2 / 2.0)
    return TrimmedSumBound(n, j, k, float(lam), float(value), branch, prob, flags)


def _quadrature_branch(hs, n, j, k, lam2):
    def level(m):
        # probability level at (fractional) rank m
        logy = (-lam2 - 4.0 * np.log(m)) / (2.0 * m)
        return m / (n + 1.0) * _xi1_inv_complement_from_log(logy)

    head = float(hs(float(level(j + 1.0))))
    if j == k:
        return head

    def integrand(tt):
        return float(hs(float(level((n + 1.0) * tt))))

    body = (n + 1.0) * _log_quad(integrand, (j + 1.0) / (n + 1.0), (k + 1.0) / (n + 1.0))
    return head + body


def _substituted_branch(hs, n, j, k, lam2):
    head_arg = (j + 1.0) / (n + 1.0) / math.e * math.exp((-lam2 - 4.0 * math.log(j + 1.0)) / (2.0 * (j + 1.0)))
    head = float(hs(head_arg))
    if j == k:
        return head

    def z_of(m):
        return 2.0 * (m + 1.0) / lam2 * math.exp(-lam2 / (2.0 * (m + 1.0)))

    scale = SHRINK * lam2 / (2.0 * (n + 1.0))

    def integrand(z):
        weight = 1.0 + 1.0 / (z * math.log(math.e + 1.0 / z) ** 2)
        return float(hs(scale * z)) * weight

    return head + lam2 * _log_quad(integrand, z_of(j), z_of(k))


def _fast_growth_check(hs, p, T, m: int = 30):
    ds = np.geomspace(1e-6, 0.999, m)
    xs = np.geomspace(1e-6, 0.999, m)
    worst, worst_pt = -math.inf, None
    for d in ds:
        lhs = np.asarray(hs(d * xs), dtype=float)
        rhs = d ** (-1.0 / p) * np.asarray(hs(xs), dtype=float) / T
        gap = (rhs - lhs) / (np.abs(rhs) + 1e-300)
        i = int(np.argmax(gap))
        if gap[i] > worst:
            worst, worst_pt = float(gap[i]), (float(d), float(xs[i]))
    return worst <= 1e-9, worst_pt


def fast_growth_A(n, j, k, lam2, p, C):
    """Correction coefficient ``A`` of the fast-growth bound (0 when ``lam^2/2 <= j+1``)."""
    if lam2 / 2.0 <= j + 1:
        return 0.0
    top = min(lam2 / 2.0, k + 1.0)
    first = C ** (1.0 + 1.0 / p) * min(p, lam2 * (1.0 / (j + 1.0) - 1.0 / top))
    first *= (p + 1.0 + lam2 / (j + 1.0)) ** -2
    u = lam2 / (2.0 * (j + 1.0))
    # [u e^u]^{-1/p} in logs
    second = C * min(1.0, math.log(top / (j + 1.0)))
    second *= math.exp(-(math.log(u) + u) / p) / (1.0 + lam2 / (k + 1.0))
    return first + second


def _fast_growth_branch(hs, n, j, k, lam2, p, T, C):
    A = fast_growth_A(n, j, k, lam2, p, C)
    head = float(hs(SHRINK * (j + 1.0) / (n + 1.0) * math.exp(-lam2 / (2.0 * (j + 1.0)))))

    def x_of(m):
        return (m + 1.0) / (n + 1.0) * math.exp(-lam2 / (2.0 * (m + 1.0)) - 1.0 - 2.0 / math.e)

    body = C * n * hs.integral(x_of(j), x_of(k)) if k > j else 0.0
    return (1.0 + T * lam2 * A) * head + body


def observed_trimmed_sum(sample, j: int, k: int) -> np.ndarray:
    """``sum_{i=n-k}^{n-j} Y_(i)`` for each row of ``sample`` (last axis = n)."""
    s = np.sort(np.asarray(sample, dtype=float), axis=-1)
    n = s.shape[-1]
    # ascending 1-based ranks n-k..n-j are 0-based n-k-1..n-j-1
    return s[..., n - k - 1: n - j].sum(axis=-1)


# ---------------------------------------------------------------------------
# C0 and the Pareto trimmed-sum bound


class C0Result(NamedTuple):
    value: float
    argmax: float
    bracket: tuple


def c0_objective(s):
    """``e^s/(1+s) * [1 + s e^s / log(e + s e^s)^2]^{-1}`` in overflow-free form."""
    s = np.asarray(s, dtype=float)
    L = s + np.log(s + math.e * np.exp(-s))  # log(e + s e^s)
    return 1.0 / ((1.0 + s) * (np.exp(-s) + s / L ** 2))


def c0_constant() -> C0Result:
    """Supremum of :func:`c0_objective` over ``s > 0`` by golden-section search in ``log s``."""
    grid = np.linspace(-10.0, 10.0, 2001)
    vals = c0_objective(np.exp(grid))
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    x, f, lo, hi = golden_section_max(lambda w: float(c0_objective(math.exp(w))), lo, hi, tol=1e-14)
    value = float(f)
    if not 1.0 < value < 2.0:
        raise AssertionError(f"C0 = {value} outside (1, 2)")
    # the sup exceeds fn(x) by at most |f''| (hi - lo)^2 / 8; pad for rounding in fn
    h = 1e-4
    fn = lambda w: float(c0_objective(math.exp(w)))  # noqa: E731
    curv = abs(fn(x + h) - 2.0 * value + fn(x - h)) / (h * h)
    slack = 2.0 * curv * (hi - lo) ** 2 / 8.0 + 1e-13
    return C0Result(value, math.exp(x), (value, float(value + slack)))


class ParetoTrimmedBound(NamedTuple):
    value: float
    glptj: float
    note: str


def pareto_trimmed_bound(p: float, n: int, j: int, lam: float, C: float | None = None) -> ParetoTrimmedBound:
    """Bound on the sum of all but the ``j`` largest of ``n`` Pareto(p) draws
    (survival ``min{1, x^{-p}}``), holding with probability ``1 - C e^{-lam^2/2}``.

    Also returns the comparison value ``12 p (e s)^{1/p} n / (p - 1)`` with
    ``s = exp(lam^2 / (2(j+1)))``.
    """
    if not p > 1 or n < 1 or not 0 <= j < n:
        raise PreconditionError("need p > 1 and 0 <= j < n")
    C = constants.get("pareto_trimmed_C", C)
    m = j + 1.0
    mu = lam * lam / (p * m)
    factor = m * min(mu * mu, 1.0 / mu) if mu > 0 else 0.0
    value = C * p * n / (p - 1.0)
    value += C * (1.0 + factor) * (n / m) ** (1.0 / p) * math.exp(lam * lam / (2.0 * p * m))
    log_s = lam * lam / (2.0 * m)
    glptj = 12.0 * p * math.exp((1.0 + log_s) / p) * n / (p - 1.0)
    note = "" if j <= n / 2 else "j > n/2: outside the regime where the bound is most effective"
    return ParetoTrimmedBound(value, glptj, note)
