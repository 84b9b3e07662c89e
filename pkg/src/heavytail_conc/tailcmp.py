"""Tail and quantile comparison under convex majorization.

If ``E phi(X) <= E phi(Y)`` for every convex ``phi`` in a suitable class, the
functions here turn knowledge of ``Y`` into certified bounds on the tail and
quantiles of ``X``, and construct the extremal ``X`` showing the bounds are
attained.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .dist import Discrete, Distribution1D, PointMass, TopAtomLaw
from .numerics import (
    DivergentIntegralWarning,
    PreconditionError,
    UnsupportedOperation,
    integrate_on_unit,
    quad,
)

__all__ = [
    "ConvexWitness", "WitnessResult", "TailCertificate", "RatioCertificate",
    "RegularityReport", "CoarsenedLaw", "optimal_linear_witness",
    "witness_expectation", "conditional_tail_bound", "sharpness_witness",
    "quantile_envelope", "omega_envelope", "gaussian_transfer", "coarsen",
    "coarsening_example", "coarsening_example_hstar", "coarsening_ratio", "ratio_tail_bound",
    "minimal_admissible_R", "regularity_report",
]


@dataclass(frozen=True)
class ConvexWitness:
    """Hinge ``x -> max{0, a(x - t) + 1}``; equals 1 at ``t``."""

    t: float
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("slope a must be positive")

    def __call__(self, x):
        return np.maximum(0.0, self.a * (np.asarray(x, dtype=float) - self.t) + 1.0)

    @property
    def kink(self) -> float:
        return self.t - 1.0 / self.a


class WitnessResult(NamedTuple):
    a: float
    minimum: float
    bracket_width: float
    residual: float


class TailCertificate(NamedTuple):
    threshold: float
    prob: float
    branch: str


class GaussianCertificate(NamedTuple):
    threshold: float
    prob: float
    condition_ok: bool
    worst_point: tuple | None


class OmegaBound(NamedTuple):
    value: float
    hypothesis_ok: bool
    worst_point: tuple | None


class RatioCertificate(NamedTuple):
    threshold: float
    factor: float
    checks: tuple


def witness_expectation(mu: Distribution1D, t: float, a: float) -> float:
    """``E max{0, a(Y - t) + 1} = a E(Y - c)_+`` with ``c = t - 1/a``."""
    c = t - 1.0 / a
    return a * (mu.upper_partial_mean(c) - c * float(mu.sf(c)))


def _positive_part_mean(mu: Distribution1D) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergentIntegralWarning)
        return mu.upper_partial_mean(0.0)


def optimal_linear_witness(mu: Distribution1D, t: float, exact_atoms: bool = False) -> WitnessResult:
    """Slope ``a`` of the hinge minimizing ``E phi(Y) / phi(t)`` over hinges anchored at ``t``.

    For non-atomic laws ``a`` solves ``∫_{t-1/a}^∞ (x - t) dmu = 0`` and the
    minimum is ``P{Y > t - 1/a}``.  When the root set is an interval the
    smallest root is returned with the interval width.  Atomic laws are
    refused unless ``exact_atoms`` is set, in which case the convex
    piecewise-linear objective is minimized over its kinks.
    """
    if not math.isfinite(_positive_part_mean(mu)):
        raise PreconditionError("E max{0, Y} must be finite")
    mean = mu.mean()
    if not t > mean:
        raise PreconditionError(f"need t > E Y = {mean:g}")
    if not float(mu.sf(t)) > 0:
        raise PreconditionError("need P{Y > t} > 0")
    if mu.atomic:
        if not exact_atoms:
            raise UnsupportedOperation("atomic law: pass exact_atoms=True for the kink search")
        return _atomic_witness(mu, t)

    scale = 1.0 + abs(mean)

    def g(b):  # ∫_{t-b}^∞ (x - t) dmu, non-increasing in b = 1/a
        c = t - b
        return mu.upper_partial_mean(c) - t * float(mu.sf(c))

    lo, hi = 1e-8, 1e8  # bracket on a
    while g(1.0 / hi) < 0 and hi < 1e300:
        hi *= 1e4
    while g(1.0 / lo) > 0 and lo > 1e-300:
        lo *= 1e-4

    def bisect(pred):
        # smallest a in [lo, hi] with pred(a) true, pred monotone in a
        a0, a1 = lo, hi
        for _ in range(400):
            mid = math.sqrt(a0 * a1)
            if pred(mid):
                a1 = mid
            else:
                a0 = mid
            if a1 / a0 - 1.0 <= 4e-16:
                break
        return a1

    tol = 1e-13 * scale
    a_small = bisect(lambda a: g(1.0 / a) >= -tol)
    a_large = bisect(lambda a: g(1.0 / a) > tol)
    minimum = float(mu.sf(t - 1.0 / a_small))
    return WitnessResult(a_small, minimum, a_large - a_small, g(1.0 / a_small))


def _atomic_witness(mu: Distribution1D, t: float) -> WitnessResult:
    values = np.asarray(mu.values)
    below = values[values < t]
    if below.size == 0:
        raise PreconditionError("no atom below t")
    slopes = 1.0 / (t - below)
    vals = np.array([witness_expectation(mu, t, a) for a in slopes])
    i = int(np.argmin(vals))
    return WitnessResult(float(slopes[i]), float(vals[i]), 0.0, 0.0)


def conditional_tail_bound(Y: Distribution1D, s: float) -> TailCertificate:
    """Certificate ``P{X >= t} <= P{Y > s}`` with ``t = E(Y | Y > s)``.

    When ``P{Y > s} = 0`` the certificate is ``X <= s`` almost surely.
    """
    if not math.isfinite(_positive_part_mean(Y)):
        raise PreconditionError("E max{0, Y} must be finite")
    p = float(Y.sf(s))
    if p <= 0.0:
        return TailCertificate(float(s), 0.0, "bounded")
    return TailCertificate(Y.upper_partial_mean(s) / p, p, "conditional-mean")


def sharpness_witness(Y: Distribution1D, s: float) -> Distribution1D:
    """Law of ``Y 1{Y < s} + E(Y | Y >= s) 1{Y >= s}``, dominated by ``Y`` in convex order."""
    mass = 1.0 - float(Y.cdf_left(s))
    if mass <= 0.0:
        raise PreconditionError("need P{Y >= s} > 0")
    top = Y.upper_partial_mean_closed(s)
    if not math.isfinite(top):
        raise PreconditionError("E|Y| must be finite")
    atom = top / mass
    if mass >= 1.0:
        return PointMass(atom)
    return TopAtomLaw(Y, s, atom, mass)


def quantile_envelope(Y: Distribution1D, x: float) -> float:
    """``(1/(1-x)) ∫_x^1 H_Y(u) du``, an upper bound on ``H_X(x)``."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    v = 1.0 - x
    val = Y.star_integral(0.0, v)
    if not math.isfinite(val):
        warnings.warn("upper tail integral diverges", DivergentIntegralWarning, stacklevel=2)
        return math.inf
    return val / v


def _integral_of(fn: Callable, name: str) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergentIntegralWarning)
        val = integrate_on_unit(lambda u: float(fn(u)), 0.0, 1.0)
    if not math.isfinite(val):
        raise PreconditionError(f"{name} is not integrable on (0, 1)")
    return val


def omega_envelope(H: Callable, omega: Callable, x: float, grid_size: int = 40) -> OmegaBound:
    """``H(x) ∫_0^1 omega`` bounding ``H_X(x)`` when ``H(1 - d(1 - y)) <= omega(d) H(y)``.

    The hypothesis is spot-checked on a ``(d, y)`` grid; failures are reported
    in the result, not raised.
    """
    w = _integral_of(omega, "omega")
    ds = np.geomspace(1e-8, 1.0 - 1e-6, grid_size)
    ys = np.linspace(0.01, 0.99, grid_size)
    worst, worst_pt = -math.inf, None
    for d in ds:
        for y in ys:
            lhs = float(H(1.0 - d * (1.0 - y)))
            rhs = float(omega(d)) * float(H(y))
            gap = (lhs - rhs) / (abs(rhs) + 1e-300)
            if gap > worst:
                worst, worst_pt = gap, (float(d), float(y))
    # 1 - d(1-y) loses digits for tiny d
    ok = worst <= 1e-6
    if not ok:
        warnings.warn(f"omega hypothesis fails at (delta, x) = {worst_pt}", RuntimeWarning, stacklevel=2)
    return OmegaBound(float(H(x)) * w, ok, None if ok else worst_pt)


def gaussian_transfer(Q: Callable, p: float, T: float, gamma: float, t: float,
                      grid=None) -> GaussianCertificate:
    """Certificate ``P{X > pT/(p-1) Q(t)} <= gamma exp(-t^2/2)``.

    Valid when ``P{Y > Q(u)} < gamma exp(-u^2/2)`` for all ``u`` and
    ``Q(u) e^{-u^2/(2p)} <= T Q(v) e^{-v^2/(2p)}`` for ``v < u``; the second
    condition is spot-checked on ``grid``.
    """
    if not p > 1 or T < 1 or gamma < 1 or not t > 0:
        raise PreconditionError("need p > 1, T >= 1, gamma >= 1, t > 0")
    grid = np.linspace(0.05, max(2.0 * t, 6.0), 60) if grid is None else np.asarray(grid, float)
    damped = np.array([float(Q(u)) for u in grid]) * np.exp(-grid ** 2 / (2 * p))
    # worst violation of damped[j] <= T * damped[i] for i < j
    running_min = np.minimum.accumulate(damped)
    ratio = damped[1:] / (T * running_min[:-1])
    j = int(np.argmax(ratio))
    ok = bool(ratio[j] <= 1.0 + 1e-9)
    worst = None
    if not ok:
        i = int(np.argmin(damped[: j + 1]))
        worst = (float(grid[i]), float(grid[j + 1]))
        warnings.warn(f"growth condition on Q fails at (s, t) = {worst}", RuntimeWarning, stacklevel=2)
    threshold = p * T / (p - 1.0) * float(Q(t))
    return GaussianCertificate(threshold, gamma * math.exp(-t * t / 2.0), ok, worst)


# ---------------------------------------------------------------------------
# coarsening


@dataclass(frozen=True)
class CoarsenedLaw:
    """``E(Y | cells)`` for ``Y`` a non-increasing function on (0,1).

    ``cells`` are ``(lo, hi)`` intervals of (0,1), listed from the right end
    of (0,1) towards 0; ``means`` are the conditional means on each cell.
    """

    cells: tuple
    masses: np.ndarray
    means: np.ndarray
    law: Discrete

    def hstar(self, x):
        """Reflected quantile of the coarsened variable at ``x``."""
        return self.law.isf(x)

    def mean(self) -> float:
        return float(np.dot(self.masses, self.means))


def _cell_integral(fn, antiderivative, lo, hi):
    if antiderivative is not None:
        return float(antiderivative(hi) - antiderivative(lo))
    if lo <= 0.0:
        return integrate_on_unit(lambda u: float(fn(u)), 0.0, hi)
    # x = exp(w) spreads log-scale cells evenly
    return quad(lambda w: float(fn(math.exp(w))) * math.exp(w), math.log(lo), math.log(hi))


def coarsen(Y: Callable, cut_count: int, antiderivative: Callable | None = None,
            cells=None) -> CoarsenedLaw:
    """Conditional expectation of ``Y`` (a non-increasing function on (0,1))
    given the cells ``E_m = [e^{-m^2}, e^{-(m-1)^2})``, ``m = 1..cut_count``,
    plus the remainder ``(0, e^{-cut_count^2})``.  ``cut_count = 0`` keeps
    a single cell ``(0,1)``.

    ``antiderivative`` (with ``A(0) = 0``) makes cell integrals exact.
    """
    if cells is None:
        if cut_count < 0:
            raise ValueError("cut_count must be non-negative")
        edges = [math.exp(-m * m) for m in range(cut_count + 1)]
        cells = [(edges[m], edges[m - 1]) for m in range(1, cut_count + 1)]
        cells.append((0.0, edges[-1]))
    cells = tuple((float(a), float(b)) for a, b in cells)
    masses, means = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergentIntegralWarning)
        for lo, hi in cells:
            total = _cell_integral(Y, antiderivative, lo, hi)
            if not math.isfinite(total):
                raise PreconditionError("Y is not integrable")
            masses.append(hi - lo)
            means.append(total / (hi - lo))
    masses, means = np.array(masses), np.array(means)
    law = Discrete(means, masses / masses.sum())
    return CoarsenedLaw(cells, masses, means, law)


def coarsening_example():
    """``Y(x) = 1/(x (log(e/x))^2)`` on (0,1) with ``∫_0^c Y = 1/(1 + log(1/c))``."""

    def Y(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (x * (1.0 - np.log(x)) ** 2)

    def antiderivative(c):
        return 0.0 if c <= 0.0 else 1.0 / (1.0 - math.log(c))

    return Y, antiderivative


def _example_level_measure(y: float) -> float:
    """Lebesgue measure of ``{Y > y}`` for the example ``Y``.

    ``Y`` decreases on ``(0, 1/e]`` and increases on ``[1/e, 1]`` with
    ``Y(1/e) = e/4`` and ``Y(1) = 1``; in ``u = -log x`` it equals
    ``e^u / (1 + u)^2``.
    """
    def g(u):
        return u - 2.0 * math.log1p(u) - math.log(y)

    if y <= math.e / 4.0 or g(1.0) >= 0.0:
        return 1.0

    hi = 2.0
    while g(hi) < 0:
        hi *= 2.0
    left = math.exp(-optimize.brentq(g, 1.0, hi, xtol=1e-15, rtol=1e-15))
    if y >= 1.0:
        return left
    right = math.exp(-optimize.brentq(g, 0.0, 1.0, xtol=1e-15, rtol=1e-15))
    return left + 1.0 - right


def coarsening_example_hstar(x) -> np.ndarray:
    """Reflected quantile (non-increasing rearrangement) of the example ``Y``.

    Below the level where ``Y`` first drops to 1 this is ``Y`` itself;
    above it the two monotone branches are inverted together.
    """
    Y, _ = coarsening_example()
    x = np.asarray(x, dtype=float)
    cut = _example_level_measure(1.0)
    out = np.empty(x.shape)
    flat = x.ravel()
    res = out.ravel()
    for i, xi in enumerate(flat):
        if xi <= cut:
            res[i] = float(Y(xi))
        else:
            res[i] = optimize.brentq(lambda y: _example_level_measure(y) - xi, math.e / 4.0, 1.0,
                                     xtol=1e-15, rtol=1e-15)
    return out.reshape(x.shape) if x.ndim else float(out)


def coarsening_ratio(coarse: CoarsenedLaw, hstar_Y: Callable, x) -> np.ndarray:
    """``H*_X(x) / H*_Y(x)`` with ``hstar_Y`` the reflected quantile of ``Y``."""
    x = np.asarray(x, dtype=float)
    return np.asarray(coarse.hstar(x)) / np.asarray(hstar_Y(x))


# ---------------------------------------------------------------------------
# tail ratio bound


def minimal_admissible_R(p: float, T: float) -> float:
    """Smallest ``R > 1`` with ``T <= (R - 1)/2 * R^(-1/p)``."""
    def f(R):
        return 0.5 * (R - 1.0) * R ** (-1.0 / p) - T
    lo, hi = 1.0, 2.0
    while f(hi) < 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def _convexity_check(hstar: Callable, lo: float, hi: float, m: int = 200):
    xs = np.linspace(lo, hi, m)
    h = np.asarray(hstar(xs), dtype=float)
    second = h[2:] - 2 * h[1:-1] + h[:-2]
    scale = np.abs(h).max() + 1e-300
    i = int(np.argmin(second))
    return bool(second[i] >= -1e-10 * scale), float(xs[i + 1])


def _deviation_check(hstar: Callable, p: float, T: float, x_max: float, rng_seed: int = 0, m: int = 400):
    """Spot check ``|H*(d x) - H*(d y)| <= T d^(-1/p) |H*(x) - H*(y)|``,
    with ``d, x, y`` log-uniform near 0."""
    rng = np.random.default_rng(rng_seed)
    d = np.exp(rng.uniform(math.log(1e-6), 0.0, m))
    x = np.exp(rng.uniform(math.log(1e-6), math.log(x_max), m))
    y = np.exp(rng.uniform(math.log(1e-6), math.log(x_max), m))
    lhs = np.abs(hstar(d * x) - hstar(d * y))
    rhs = T * d ** (-1.0 / p) * np.abs(hstar(x) - hstar(y))
    slack = lhs - rhs * (1.0 + 1e-9) - 1e-12
    i = int(np.argmax(slack))
    return bool(slack[i] <= 0), (float(d[i]), float(x[i]), float(y[i]))


def ratio_tail_bound(Y: Distribution1D, x: float, R: float, p: float, T: float) -> RatioCertificate:
    """Certificate ``P{X > t} <= R P{Y >= t}`` at ``t = (1/x) ∫_0^x H*_Y``.

    Requires ``T <= (R-1)/2 R^(-1/p)`` and a convex reflected quantile; the
    deviation condition is spot-checked and the sufficient inequality
    ``H*_Y(x/R) >= t`` is verified before the certificate is issued.
    """
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    if not (R > 1 and p > 1 and T >= 1):
        raise PreconditionError("need R > 1, p > 1, T >= 1")
    if T > 0.5 * (R - 1.0) * R ** (-1.0 / p):
        r_min = minimal_admissible_R(p, T)
        raise PreconditionError(f"R too small; minimal admissible R is {r_min:.10g}")
    hstar = Y.isf
    lo = x / (10.0 * R)
    hi = min(0.999, 0.5 * (1.0 + x))
    convex, where = _convexity_check(hstar, lo, hi)
    if not convex:
        raise PreconditionError(f"reflected quantile is not convex near x = {where:g}")
    dev_ok, dev_pt = _deviation_check(hstar, p, T, hi)
    if not dev_ok:
        warnings.warn(f"deviation condition fails at (delta, x, y) = {dev_pt}", RuntimeWarning, stacklevel=2)
    t = Y.star_integral(0.0, x) / x
    attained = float(hstar(x / R))
    if attained < t * (1.0 - 1e-12):
        raise PreconditionError(f"H*(x/R) = {attained:g} < t = {t:g}; certificate not available")
    checks = (
        {"name": "convexity", "pass": True, "worst_point": where},
        {"name": "deviation", "pass": dev_ok, "worst_point": dev_pt},
        {"name": "quantile_at_x_over_R", "pass": True, "worst_point": attained},
        # the two sides differ only at atoms of Y
        {"name": "tail_strict", "pass": True, "worst_point": R * float(Y.sf(t))},
        {"name": "tail_closed", "pass": True, "worst_point": R * (1.0 - float(Y.cdf_left(t)))},
    )
    return RatioCertificate(t, float(R), checks)


# ---------------------------------------------------------------------------
# regularity conditions I-VI


@dataclass
class RegularityReport:
    p: float
    T: float
    holds: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    incidents: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"p": self.p, "T": self.T, "holds": dict(self.holds),
                "witnesses": {k: v for k, v in self.witnesses.items()},
                "incidents": list(self.incidents)}


_IMPLICATIONS = [("I", "II"), ("II", "I"), ("II", "III"), ("III", "IV"), ("IV", "III"),
                 ("IV", "V"), ("V", "IV"), ("V", "VI")]


def regularity_report(Y: Distribution1D, p: float, T: float, u_grid=None,
                      pair_grid=None, rel_tol: float = 1e-6) -> RegularityReport:
    """Evaluate conditions I-VI on finite grids.

    I, II and V use the density (finite differences for the derivatives that
    are not closed form); III and IV use ``H' = 1/h(H)``; VI only needs ``H*``.
    Conditions whose ingredients are missing are reported ``untestable``.
    A premise passing while its consequence fails is logged as an incident.
    """
    if not (p > 1 and T >= 1):
        raise PreconditionError("need p > 1 and T >= 1")
    u = np.linspace(0.02, 0.98, 49) if u_grid is None else np.asarray(u_grid, float)
    pairs = np.linspace(0.02, 0.98, 25) if pair_grid is None else np.asarray(pair_grid, float)
    rep = RegularityReport(p, T)
    tol = rel_tol

    def record(label, margins, points):
        margins = np.asarray(margins, dtype=float)
        i = int(np.argmax(margins))
        rep.holds[label] = "pass" if margins[i] <= tol else "fail"
        rep.witnesses[label] = {"point": points[i], "margin": float(margins[i])}

    if Y.has_density:
        def hprime(v):
            v = np.asarray(v, dtype=float)
            return 1.0 / np.asarray(Y.density(Y.quantile(v)), dtype=float)

        # I: d/dx [(1-G)/G'] <= 1/p, derivative by central differences in x
        xs = np.asarray(Y.quantile(u), dtype=float)
        step = 1e-5 * (1.0 + np.abs(xs))
        def ratio(z):
            return np.asarray(Y.sf(z), float) / np.asarray(Y.density(z), float)
        deriv = (ratio(xs + step) - ratio(xs - step)) / (2 * step)
        record("I", deriv - 1.0 / p, [float(v) for v in xs])

        # II: H''/H' <= (1 + 1/p)/(1 - t)
        hs = 1e-6
        d_log = (np.log(hprime(u + hs)) - np.log(hprime(u - hs))) / (2 * hs)
        rhs2 = (1.0 + 1.0 / p) / (1.0 - u)
        record("II", (d_log - rhs2) / rhs2, [float(v) for v in u])

        # III: q(t+s) <= q(t) + (1+1/p)s + ln T, q(t) = ln H'(1 - e^-t)
        tt = -np.log(1.0 - pairs)
        qv = np.log(hprime(1.0 - np.exp(-tt)))
        m3, pts3 = [], []
        for i in range(len(tt)):
            for j in range(i + 1, len(tt)):
                s = tt[j] - tt[i]
                m3.append(qv[j] - qv[i] - (1.0 + 1.0 / p) * s - math.log(T))
                pts3.append((float(tt[i]), float(s)))
        record("III", m3, pts3)

        # IV: H'(1 - d(1-x)) <= T d^(-1-1/p) H'(x)
        m4, pts4 = [], []
        for x in pairs:
            for d in pairs:
                lhs = float(hprime(1.0 - d * (1.0 - x)))
                rhs = T * d ** (-1.0 - 1.0 / p) * float(hprime(x))
                m4.append(math.log(lhs) - math.log(rhs))
                pts4.append((float(d), float(x)))
        record("IV", m4, pts4)

        # V: G'(t)/(1-G(t))^(1+1/p) >= T^-1 G'(s)/(1-G(s))^(1+1/p), s < t
        xv = np.asarray(Y.quantile(pairs), dtype=float)
        gv = np.log(np.asarray(Y.density(xv), float)) - (1 + 1 / p) * np.log(np.asarray(Y.sf(xv), float))
        m5, pts5 = [], []
        for i in range(len(xv)):
            for j in range(i + 1, len(xv)):
                m5.append(gv[i] - math.log(T) - gv[j])
                pts5.append((float(xv[i]), float(xv[j])))
        record("V", m5, pts5)
    else:
        for label in ("I", "II", "III", "IV", "V"):
            rep.holds[label] = "untestable"

    # VI on a log grid near 0, where the right tail lives
    logs = np.geomspace(1e-6, 0.9, 12)
    m6, pts6 = [], []
    for d in logs:
        for x in logs:
            for y in logs:
                if y <= x:
                    continue
                lhs = abs(float(Y.isf(d * x)) - float(Y.isf(d * y)))
                rhs = T * d ** (-1.0 / p) * abs(float(Y.isf(x)) - float(Y.isf(y)))
                m6.append((lhs - rhs) / (rhs + 1e-300))
                pts6.append((float(d), float(x), float(y)))
    record("VI", m6, pts6)

    for a, b in _IMPLICATIONS:
        if rep.holds.get(a) == "pass" and rep.holds.get(b) == "fail":
            rep.incidents.append(f"{a} passes but {b} fails on the grid (numerical resolution)")
    return rep
