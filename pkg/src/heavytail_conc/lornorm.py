"""Lorentz-type norms on R^n.

``|x|_{r,q}`` is the Minkowski functional of the convex hull of the
normalised sign vectors ``u / max{|u|_1, r|u|_q}``, ``u in {0,±1}^n``.  The
module evaluates it and its dual exactly, provides the closed-form two-sided
estimates, the dual of ``max{|x|_1, r|x|_inf}``, a profile classifier for
when ``|x|_{r,q}`` is comparable to ``max{|x|_1, r|x|_q}``, and a Monte Carlo
estimator of the Poisson-maximum norm ``[x]_delta``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from . import constants
from .dist import Distribution1D

__all__ = [
    "LorentzParams", "NormValue", "rearrangement", "dual_norm", "primal_norm",
    "sign_vector_norm", "primal_norm_generators", "box_dual", "EquivalenceReport",
    "equivalence_case_check", "poisson_u_hstar", "poisson_norm_estimate",
    "PoissonEstimate", "MAX_GENERATOR_DIM",
]

MAX_GENERATOR_DIM = 12


@dataclass(frozen=True)
class LorentzParams:
    r: float
    q: float
    n: int

    def __post_init__(self):
        if not self.r >= 1:
            raise ValueError("r must be >= 1")
        if not self.q > 1:
            raise ValueError("q must be > 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def k_max(self) -> int:
        """Largest rank where the ``r k^{1/q}`` branch can matter."""
        return min(math.ceil(self.r ** (self.q / (self.q - 1.0))), self.n)

    def weights(self) -> np.ndarray:
        """``max{k, r k^{1/q}}`` for k = 1..n."""
        k = np.arange(1, self.n + 1, dtype=float)
        return np.maximum(k, self.r * k ** (1.0 / self.q))


class NormValue(NamedTuple):
    value: float
    method: str
    error_factor: float
    extra: dict = {}


def rearrangement(x) -> np.ndarray:
    """Non-increasing rearrangement of ``|x|`` (stable, ties by original index)."""
    a = np.abs(np.asarray(x, dtype=float))
    order = np.argsort(-a, kind="stable")
    return a[order]


def _params(params, x) -> LorentzParams:
    n = np.asarray(x).size
    if isinstance(params, LorentzParams):
        if params.n != n:
            raise ValueError(f"vector has length {n}, params expect {params.n}")
        return params
    r, q = params
    return LorentzParams(float(r), float(q), n)


def dual_norm(y, params) -> NormValue:
    """Exact dual ``max_k S_k / max{k, r k^{1/q}}`` with ``S_k`` the top-k partial sums.

    ``extra['restricted']`` holds ``max_{k <= min(r^{q/(q-1)}, n)} r^{-1} k^{-1/q} S_k``,
    which satisfies ``restricted <= exact <= 2 restricted``.
    """
    p = _params(params, y)
    s = np.cumsum(rearrangement(y))
    exact = float(np.max(s / p.weights()))
    k_lim = max(1, min(int(math.floor(p.r ** (p.q / (p.q - 1.0)) * (1 + 1e-12))), p.n))
    k = np.arange(1, k_lim + 1, dtype=float)
    restricted = float(np.max(s[:k_lim] / (p.r * k ** (1.0 / p.q))))
    if not (restricted <= exact * (1 + 1e-12) + 1e-300 and exact <= 2 * restricted * (1 + 1e-12) + 1e-300):
        raise AssertionError("dual sandwich violated")
    return NormValue(exact, "dual-sup", 1.0, {"restricted": restricted})


def sign_vector_norm(u, r: float, q: float) -> float:
    """``max{|u|_1, r |u|_q}``: the exact norm of a vector in ``{0,±1}^n``."""
    u = np.asarray(u, dtype=float)
    return max(float(np.abs(u).sum()), r * float(np.sum(np.abs(u) ** q) ** (1.0 / q)))


def _primal_lp(xs: np.ndarray, weights: np.ndarray) -> float:
    """``max <xs, y>`` over non-increasing ``y >= 0`` with ``sum_{i<=k} y_i <= weights[k]``.

    By permutation/sign symmetry this is the bidual formula for ``|x|_{r,q}``
    when ``xs`` is the non-increasing rearrangement of ``|x|``.
    """
    n = xs.size
    if n == 1:
        return float(xs[0] * weights[0])
    rows, rhs = [], []
    lower = np.tril(np.ones((n, n)))
    rows.append(lower)
    rhs.append(weights)
    mono = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    mono[idx, idx] = -1.0
    mono[idx, idx + 1] = 1.0
    rows.append(mono)
    rhs.append(np.zeros(n - 1))
    res = linprog(-xs, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                  bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(-res.fun)


def primal_norm_generators(x, r: float, q: float) -> float:
    """Minkowski functional by LP over all ``3^n - 1`` normalised sign vectors (n <= 12)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n > MAX_GENERATOR_DIM:
        raise ValueError(f"generator LP is limited to n <= {MAX_GENERATOR_DIM}; use mode='approx'")
    if not np.any(x):
        return 0.0
    gens = np.array([u for u in itertools.product((-1.0, 0.0, 1.0), repeat=n) if any(u)])
    norms = np.maximum(np.abs(gens).sum(axis=1), r * np.sum(np.abs(gens) ** q, axis=1) ** (1.0 / q))
    cols = (gens / norms[:, None]).T
    res = linprog(np.ones(cols.shape[1]), A_eq=cols, b_eq=x, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.fun)


def primal_norm(x, params, mode: str = "exact") -> NormValue:
    """``|x|_{r,q}``.

    ``mode='exact'`` solves the n-variable bidual LP (sign vectors use the
    closed form); ``mode='generators'`` runs the generator LP (n <= 12);
    ``mode='approx'`` returns ``4/q (|x|_1 + r sum i^{-1+1/q} x^(i))``, which
    lies in ``[|x|_{r,q}, 16 |x|_{r,q}]``.
    """
    p = _params(params, x)
    x = np.asarray(x, dtype=float)
    xs = rearrangement(x)
    if mode == "approx":
        i = np.arange(1, p.n + 1, dtype=float)
        val = 4.0 / p.q * (xs.sum() + p.r * np.sum(i ** (-1.0 + 1.0 / p.q) * xs))
        return NormValue(float(val), "sandwich-approx", 16.0)
    if mode == "generators":
        return NormValue(primal_norm_generators(x, p.r, p.q), "exact-lp", 1.0)
    if mode != "exact":
        raise ValueError("mode must be 'exact', 'generators' or 'approx'")
    if not np.any(xs):
        return NormValue(0.0, "exact-signvector", 1.0)
    if np.all((xs == 0) | (xs == 1)):
        return NormValue(sign_vector_norm(xs, p.r, p.q), "exact-signvector", 1.0)
    return NormValue(_primal_lp(xs, p.weights()), "exact-lp", 1.0)


def box_dual(y, r: float) -> NormValue:
    """``r^{-1} sum_{i <= min(ceil r, n)} y^(i)``, within a factor 2 above the dual of
    ``max{|x|_1, r|x|_inf}``; the exact dual is in ``extra['exact']``."""
    if not r >= 1:
        raise ValueError("r must be >= 1")
    ys = rearrangement(y)
    n = ys.size
    formula = float(ys[: min(math.ceil(r), n)].sum() / r)
    # exact: greedy fill with coordinates capped at 1/r and total mass 1
    m = int(math.floor(r))
    exact = ys[: min(m, n)].sum() / r
    if m < n:
        exact += (1.0 - m / r) * ys[m]
    exact = float(exact)
    if not (exact <= formula * (1 + 1e-12) + 1e-300 and formula <= 2 * exact * (1 + 1e-12) + 1e-300):
        raise AssertionError("box dual sandwich violated")
    return NormValue(formula, "dual-sup", 2.0, {"exact": exact})


# ---------------------------------------------------------------------------
# equivalence with max{|x|_1, r|x|_q}


@dataclass
class EquivalenceReport:
    cases: list
    profile_exponent: float
    upper_ratio: float
    lower_ratio: float
    lower: float
    norm: float
    upper: float
    A: float
    holds: bool
    details: dict = field(default_factory=dict)


def _profile_fit(xs):
    """Least-squares exponent ``p`` in ``x^(i) ~ x^(1) i^{-p}`` plus the ratio range."""
    n = xs.size
    i = np.arange(1, n + 1, dtype=float)
    if n == 1:
        return 0.0, 1.0, 1.0
    li = np.log(i)
    lx = np.log(xs / xs[0])
    p = float(-np.dot(li, lx) / np.dot(li, li))
    ratio = xs / (xs[0] * i ** (-p))
    return p, float(ratio.max()), float(ratio.min())


def equivalence_case_check(x, params, A: float | None = None) -> EquivalenceReport:
    """Classify the profile of ``x`` and check ``m(x) <= |x|_{r,q} <= A m(x)``,
    ``m(x) = max{|x|_1, r|x|_q}``.

    Case 1: fitted exponent ``p > 1/q``.  Case 2: ``0 < p < 1/q`` with the
    ratio ``x^(i) / (x^(1) i^{-p})`` bounded above and below.  Case 3:
    constant envelopes ``H1 = min x^(i)``, ``H2 = max x^(i)``; needs
    ``H1 > 0`` (then ``∫(1-t)^{-1+1/q} H2 = q H2`` is finite).
    """
    p = _params(params, x)
    A = constants.get("equivalence_A", A)
    xs = rearrangement(x)
    x_arr = np.asarray(x, dtype=float)
    lower = max(float(xs.sum()), p.r * float(np.sum(xs ** p.q) ** (1.0 / p.q)))
    if not np.any(xs):
        return EquivalenceReport([], 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, A, True)
    norm = primal_norm(x_arr, p).value
    cases = []
    details: dict = {}
    positive = xs[xs > 0]
    expo, up, low = _profile_fit(positive) if positive.size == xs.size else (math.nan, math.inf, 0.0)
    if positive.size == xs.size:
        if expo > 1.0 / p.q:
            cases.append(1)
            details["case1_C"] = up
        elif 0.0 < expo < 1.0 / p.q:
            cases.append(2)
            details["case2_C"] = up
            details["case2_c"] = low
        h1, h2 = float(xs[-1]), float(xs[0])
        if h1 > 0:
            cases.append(3)
            details["case3_H1"] = h1
            details["case3_H2_integral"] = p.q * h2
    holds = bool(lower <= norm * (1 + 1e-9) and (not cases or norm <= A * lower * (1 + 1e-9)))
    return EquivalenceReport(cases, expo, up, low, lower, norm, A * lower, A, holds, details)


# ---------------------------------------------------------------------------
# Poisson-maximum norm


def poisson_u_hstar(v, q: float):
    """Reflected quantile ``(v/2)^{-2/q} log(2/v)`` of the weights ``U_i``."""
    v = np.asarray(v, dtype=float)
    return (v / 2.0) ** (-2.0 / q) * np.log(2.0 / v)


class PoissonEstimate(NamedTuple):
    value: float
    se: float
    trials: int


def poisson_norm_estimate(x, delta: float, q: float | None = None, trials: int = 2000,
                          rng: np.random.Generator | None = None,
                          u_law: Distribution1D | None = None, chunk: int = 4096) -> PoissonEstimate:
    """Monte Carlo ``E max_{0<=j<=N} sum_i U_i^(j) |x_i|`` with ``N ~ Poisson(1/delta)``
    and ``U^(0) = 0``.

    The weights are drawn from ``u_law`` if given, else from
    :func:`poisson_u_hstar` with exponent ``q``.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if u_law is None and q is None:
        raise ValueError("give q or u_law")
    rng = np.random.default_rng() if rng is None else rng
    ax = np.abs(np.asarray(x, dtype=float))
    n = ax.size
    if not np.any(ax):
        return PoissonEstimate(0.0, 0.0, trials)
    counts = rng.poisson(1.0 / delta, size=trials)
    best = np.zeros(trials)
    # draw the U vectors trial-by-trial in blocks to bound memory
    start = 0
    while start < trials:
        stop = start
        total = 0
        while stop < trials and (total + counts[stop]) * n <= chunk * 64 or stop == start:
            total += counts[stop]
            stop += 1
        block = counts[start:stop]
        m = int(block.sum())
        if m:
            if u_law is None:
                u = poisson_u_hstar(1.0 - rng.random((m, n)), q)
            else:
                u = np.asarray(u_law.sample(rng, (m, n)), dtype=float)
            dots = u @ ax
            nz = np.flatnonzero(block)
            offsets = np.concatenate(([0], np.cumsum(block)[:-1]))[nz]
            best[start + nz] = np.maximum(np.maximum.reduceat(dots, offsets), 0.0)
        start = stop
    return PoissonEstimate(float(best.mean()), float(best.std(ddof=1) / math.sqrt(trials)), trials)
