"""Concentration bounds for functions of independent heavy-tailed coordinates.

``f(X)`` with ``X = T(Z)``, ``T`` the coordinatewise Gaussian transport,
deviates from its median by amounts controlled by gradient norms of ``f``
weighted by the local Lipschitz constants of ``T``.  This module evaluates
the resulting bound formulas, the Gaussian convex-domination inequality they
rest on, and the comparison bounds from the literature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import qmc

from . import constants
from .dist import TransportMap, local_lip_quantile
from .lornorm import LorentzParams, primal_norm, sign_vector_norm
from .numerics import PreconditionError

__all__ = [
    "FunctionOracle", "LipProfile", "BoundCurve", "PisierResult", "linear_oracle",
    "l2norm_oracle", "softmax_oracle", "constant_oracle", "normalized_sum_oracle",
    "quadratic_oracle", "lip_profile", "pisier_check", "transport_gradient",
    "linear_weibull_bound", "weibull_theorem_bound", "power_theorem_bound",
    "comparison_bounds", "bound_curve", "FD_STEP",
]

FD_STEP = 1e-5


# ---------------------------------------------------------------------------
# function oracles


@dataclass
class FunctionOracle:
    """Batched function ``f`` on rows of an ``(m, n)`` array, with optional gradient.

    ``lip_closed(s)`` may return exact ``(Lip_s, Lip_s^sharp)``.
    """

    f: Callable
    n: int
    grad: Callable | None = None
    linear_coeffs: np.ndarray | None = None
    name: str = "f"
    lip_closed: Callable | None = None
    coord_sup: np.ndarray | None = None

    def __call__(self, x):
        return self.f(np.atleast_2d(np.asarray(x, dtype=float)))

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _fd_gradient(self.f, x)

    @property
    def has_exact_gradient(self) -> bool:
        return self.grad is not None


def _fd_gradient(f, x):
    """Central differences with step ``1e-5 (1 + |x|_inf)`` per row."""
    m, n = x.shape
    h = FD_STEP * (1.0 + np.max(np.abs(x), axis=1))
    out = np.empty_like(x)
    for i in range(n):
        up = x.copy()
        dn = x.copy()
        up[:, i] += h
        dn[:, i] -= h
        out[:, i] = (f(up) - f(dn)) / (2.0 * h)
    return out


def _pnorm(v, s):
    v = np.abs(np.asarray(v, dtype=float))
    if math.isinf(s):
        return float(v.max())
    return float(np.sum(v ** s) ** (1.0 / s))


def linear_oracle(a) -> FunctionOracle:
    a = np.asarray(a, dtype=float)
    return FunctionOracle(
        f=lambda x: x @ a, n=a.size,
        grad=lambda x: np.broadcast_to(a, x.shape),
        linear_coeffs=a, name="linear",
        lip_closed=lambda s: (_pnorm(a, s), _pnorm(a, s)), coord_sup=np.abs(a),
    )


def normalized_sum_oracle(n: int) -> FunctionOracle:
    """``n^{-1/2} sum_i x_i``."""
    oracle = linear_oracle(np.full(n, 1.0 / math.sqrt(n)))
    oracle.name = "normalized-sum"
    return oracle


def constant_oracle(n: int, c: float = 0.0) -> FunctionOracle:
    return FunctionOracle(
        f=lambda x: np.full(x.shape[0], c), n=n,
        grad=lambda x: np.zeros_like(x), linear_coeffs=np.zeros(n), name="constant",
        lip_closed=lambda s: (0.0, 0.0), coord_sup=np.zeros(n),
    )


def _l2_lip(n):
    def lip(s):
        sharp = n ** (1.0 / s) if not math.isinf(s) else 1.0
        plain = n ** (1.0 / s - 0.5) if s <= 2 else 1.0
        return plain, sharp
    return lip


def l2norm_oracle(n: int) -> FunctionOracle:
    """Euclidean norm; gradient ``x/|x|`` (0 at the origin)."""
    def grad(x):
        r = np.linalg.norm(x, axis=1, keepdims=True)
        return np.divide(x, r, out=np.zeros_like(x), where=r > 0)
    return FunctionOracle(f=lambda x: np.linalg.norm(x, axis=1), n=n, grad=grad,
                          name="l2norm", lip_closed=_l2_lip(n), coord_sup=np.ones(n))


def softmax_oracle(n: int, beta: float = 1.0) -> FunctionOracle:
    """Smooth maximum ``beta^{-1} log sum exp(beta x_i)``; gradient is the softmax vector."""
    def f(x):
        m = x.max(axis=1, keepdims=True)
        return (m[:, 0] + np.log(np.exp(beta * (x - m)).sum(axis=1)) / beta)

    def grad(x):
        w = np.exp(beta * (x - x.max(axis=1, keepdims=True)))
        return w / w.sum(axis=1, keepdims=True)

    def lip(s):
        # simplex vectors: sup |w|_s = 1 at a vertex, coordinate sups all 1
        sharp = n ** (1.0 / s) if not math.isinf(s) else 1.0
        return 1.0, sharp
    return FunctionOracle(f=f, n=n, grad=grad, name=f"softmax(beta={beta:g})", lip_closed=lip,
                          coord_sup=np.ones(n))


def quadratic_oracle(A) -> FunctionOracle:
    """``x^T A x / 2`` with symmetric ``A``; not globally Lipschitz."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    return FunctionOracle(f=lambda x: 0.5 * np.einsum("ij,jk,ik->i", x, A, x), n=A.shape[0],
                          grad=lambda x: x @ A, name="quadratic")


# ---------------------------------------------------------------------------
# Lipschitz profiles


@dataclass
class LipProfile:
    per_s: dict
    method: str
    caveat: str = ""

    def lip(self, s) -> float:
        return self.per_s[s][0]

    def sharp(self, s) -> float:
        return self.per_s[s][1]


def lip_profile(oracle: FunctionOracle, s_values=(2, math.inf), points: int = 4096,
                refinements: int = 32, box: float = 6.0, seed: int = 0) -> LipProfile:
    """``Lip_s`` and ``Lip_s^sharp`` for each ``s``.

    Exact when the oracle is linear or carries closed forms; otherwise the
    suprema are estimated over scrambled-Sobol points in ``[-box, box]^n``
    followed by random-search ascent from the best points, which gives
    lower bounds on the true suprema.
    """
    s_values = tuple(s_values)
    if oracle.lip_closed is not None:
        method = "exact-linear" if oracle.linear_coeffs is not None else "closed-form"
        return LipProfile({s: tuple(oracle.lip_closed(s)) for s in s_values}, method)
    n = oracle.n
    m = 1 << max(1, int(math.ceil(math.log2(points))))
    pts = (qmc.Sobol(d=n, scramble=True, seed=seed).random(m) * 2.0 - 1.0) * box
    g = np.abs(oracle.gradient(pts))
    rng = np.random.default_rng(seed)
    per_s = {}
    coord_sup = g.max(axis=0)
    for s in s_values:
        norms = g.max(axis=1) if math.isinf(s) else np.sum(g ** s, axis=1) ** (1.0 / s)
        best = float(norms.max())
        for idx in np.argsort(norms)[-refinements:]:
            x = pts[idx].copy()
            step = 0.5
            val = float(norms[idx])
            for _ in range(20):
                cand = x + step * rng.standard_normal(n)
                gc = np.abs(oracle.gradient(cand[None, :]))[0]
                coord_sup = np.maximum(coord_sup, gc)
                vc = float(gc.max()) if math.isinf(s) else float(np.sum(gc ** s) ** (1.0 / s))
                if vc > val:
                    x, val = cand, vc
                else:
                    step *= 0.7
            best = max(best, val)
        per_s[s] = (best, 0.0)
    for s in s_values:
        sharp = float(coord_sup.max()) if math.isinf(s) else float(np.sum(coord_sup ** s) ** (1.0 / s))
        per_s[s] = (per_s[s][0], max(sharp, per_s[s][0]))
    return LipProfile(per_s, "sampled-sup", "sampled suprema are lower bounds on the true values")


# ---------------------------------------------------------------------------
# Gaussian convex domination


class PisierResult(NamedTuple):
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    excluded: int
    ok: bool


def _convexity_spot_check(phi, rng, m=200):
    a, b = rng.normal(scale=3.0, size=(2, m))
    mid = np.asarray(phi(0.5 * (a + b)), dtype=float)
    avg = 0.5 * (np.asarray(phi(a), dtype=float) + np.asarray(phi(b), dtype=float))
    return bool(np.all(mid <= avg + 1e-9 * (1.0 + np.abs(avg))))


def pisier_check(psi: FunctionOracle, phi: Callable, trials: int, rng: np.random.Generator,
                 chunk: int = 20000) -> PisierResult:
    """Monte Carlo of ``E phi(psi(Z*) - psi(Z))`` against ``E phi((pi/2)|grad psi(Z)| Z')``."""
    if not _convexity_spot_check(phi, rng):
        warnings.warn("phi failed a midpoint convexity spot check", RuntimeWarning, stacklevel=2)
    if not psi.has_exact_gradient:
        warnings.warn("using finite-difference gradients", RuntimeWarning, stacklevel=2)
    n = psi.n
    lhs_vals, rhs_vals = [], []
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        z = rng.standard_normal((m, n))
        z_star = rng.standard_normal((m, n))
        z_prime = rng.standard_normal(m)
        lhs_vals.append(np.asarray(phi(psi(z_star) - psi(z)), dtype=float))
        gnorm = np.linalg.norm(psi.gradient(z), axis=1)
        rhs_vals.append(np.asarray(phi(0.5 * math.pi * gnorm * z_prime), dtype=float))
        done += m
    lhs = np.concatenate(lhs_vals)
    rhs = np.concatenate(rhs_vals)
    good = np.isfinite(lhs) & np.isfinite(rhs)
    excluded = int((~good).sum())
    lhs, rhs = lhs[good], rhs[good]
    k = max(lhs.size, 2)
    l_mean, r_mean = float(lhs.mean()), float(rhs.mean())
    l_se = float(lhs.std(ddof=1) / math.sqrt(k))
    r_se = float(rhs.std(ddof=1) / math.sqrt(k))
    ok = l_mean <= r_mean + 3.0 * (l_se + r_se)
    return PisierResult(l_mean, l_se, r_mean, r_se, excluded, bool(ok))


def transport_gradient(f: FunctionOracle, tmap: TransportMap, z):
    """``|grad (f o T)(z)|_2`` computed from ``f``'s gradient at ``T z`` and the
    local Lipschitz constants of ``F_i^{-1} o Phi``.

    Returns ``(value, flagged)``; ``flagged`` lists coordinates with infinite
    local constants, in which case ``value`` is ``inf``.
    """
    z = np.asarray(z, dtype=float)
    x = tmap(z)
    g = f.gradient(x)[0]
    lips = np.array([float(local_lip_quantile(law, zi, "gauss"))
                     for law, zi in zip(tmap.marginals, z)])
    flagged = [i for i, v in enumerate(lips) if math.isinf(v) and g[i] != 0]
    if flagged:
        return math.inf, flagged
    contrib = np.where(g == 0, 0.0, g * lips)
    return float(np.linalg.norm(contrib)), []


# ---------------------------------------------------------------------------
# bound formulas


def linear_weibull_bound(a, t: float, q: float, c: float | None = None) -> float:
    """``2 exp(-c_q min{(t/|a|_2)^2, (t/|a|_inf)^q})`` for ``P{|sum a_i X_i| > t}``."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ValueError("a must be non-zero")
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    c = constants.get("weibull_c_q", c)
    return _weibull_prob(t, float(np.linalg.norm(a)), float(np.abs(a).max()), q, c)


def _weibull_prob(t, l2, linf, q, c):
    return 2.0 * math.exp(-c * min((t / l2) ** 2, (t / linf) ** q))


def weibull_theorem_bound(lip: LipProfile, t: float, q: float, n: int, form: str = "sharp",
                          c: float | None = None, C: float | None = None):
    """Deviation bound about the median for Weibull-type coordinates, ``0 < q < 1``.

    ``sharp``: ``(t, 2 exp(-c_q min{(t/Lip_2^#)^2, (t/Lip_inf^#)^q}))``.
    ``robust``: threshold
    ``C_q log(e + n t^{2-4/q})^{1/q-1/2} (t Lip_2 + t^{2/q} Lip_inf)`` at
    probability ``2 exp(-t^2/2)``.
    """
    if not 0 < q < 1:
        raise PreconditionError("q must lie in (0, 1)")
    if not t > 0:
        raise ValueError("t must be positive")
    for s in (2, math.inf):
        if s not in lip.per_s:
            raise KeyError(f"Lipschitz profile lacks s={s}")
    if form == "sharp":
        c = constants.get("weibull_c_q", c)
        return t, _weibull_prob(t, lip.sharp(2), lip.sharp(math.inf), q, c)
    if form == "robust":
        C = constants.get("weibull_C_q", C)
        log_factor = math.log(math.e + n * t ** (2.0 - 4.0 / q)) ** (1.0 / q - 0.5)
        thr = C * log_factor * (t * lip.lip(2) + t ** (2.0 / q) * lip.lip(math.inf))
        return thr, 2.0 * math.exp(-t * t / 2.0)
    raise ValueError("form must be 'sharp' or 'robust'")


def lorentz_radius(t: float, q: float, C_r: float | None = None) -> float:
    """``r = C t^2 exp(t^2/q)``, clamped to ``r >= 1``."""
    C_r = constants.get("power_C_r", C_r)
    return max(1.0, C_r * t * t * math.exp(t * t / q))


def power_theorem_bound(f_sharp, t: float, q: float, n: int | None = None, form: str = "lorentz",
                        p: float | None = None, lip_p: float | None = None,
                        C_q: float | None = None, C_r: float | None = None,
                        C_prob: float | None = None, C_pq: float | None = None):
    """Deviation bound about the median for power-type coordinates, ``q > 2``.

    ``lorentz``: ``f_sharp`` is the vector ``(sup |d_i f|)_i``; threshold
    ``C_q t |(f_sharp_i^2)_i|_{r,q/2}^{1/2}`` with ``r = C t^2 e^{t^2/q}``.
    ``lipschitz-p``: threshold
    ``C_pq Lip_p(f) (n^{1/2-1/p} t + n^{1/q} t^2 e^{t^2/(2q)})`` for
    ``2q/(q-2) < p < inf``.  Both hold with probability ``C e^{-t^2/2}``.
    """
    if not q > 2:
        raise PreconditionError("q must exceed 2")
    if not t > 0:
        raise ValueError("t must be positive")
    prob = constants.get("power_C_prob", C_prob) * math.exp(-t * t / 2.0)
    if form == "lorentz":
        C_q = constants.get("power_C_q", C_q)
        v = np.asarray(f_sharp, dtype=float) ** 2
        r = lorentz_radius(t, q, C_r)
        if np.all(v == v[0]):
            # constant profile: scaled sign vector, closed form
            norm = float(v[0]) * sign_vector_norm(np.ones(v.size), r, q / 2.0)
        else:
            norm = primal_norm(v, LorentzParams(r, q / 2.0, v.size)).value
        return C_q * t * math.sqrt(norm), prob
    if form == "lipschitz-p":
        if p is None or lip_p is None or n is None:
            raise PreconditionError("lipschitz-p form needs p, lip_p and n")
        if not (2.0 * q / (q - 2.0) < p < math.inf):
            raise PreconditionError(f"need 2q/(q-2) = {2 * q / (q - 2):g} < p < inf")
        C_pq = constants.get("power_C_pq", C_pq)
        thr = C_pq * lip_p * (n ** (0.5 - 1.0 / p) * t + n ** (1.0 / q) * t * t * math.exp(t * t / (2.0 * q)))
        return thr, prob
    raise ValueError("form must be 'lorentz' or 'lipschitz-p'")


class Comparison(NamedTuple):
    value: float
    prob: float | None
    note: str


def comparison_bounds(kind: str, **args) -> Comparison:
    """Literature bounds used for side-by-side reporting.

    ``bacatro-weibull(t, q, n, lip2)``: threshold
    ``C_q (t^2 (log n)^{-1+1/q} + t^{2/q}) Lip_2`` at probability ``2e^{-t^2/2}``.
    ``bacatro-power(alpha, t)``: probability ``C(alpha) (log t / t)^alpha`` for a
    deviation of ``t n^{1/alpha}``, valid for ``t >= t0``.
    ``berry-esseen(x, n, r, abs3, absr)``: ``C_r (1+|x|)^{-r} (n^{-1/2} E|X|^3 + n^{-(r-2)/2} E|X|^r)``.
    """
    if kind == "bacatro-weibull":
        t, q, n, lip2 = args["t"], args["q"], int(args["n"]), args["lip2"]
        if not 0 < q < 1 or n < 1:
            raise ValueError("need 0 < q < 1 and n >= 1")
        C = constants.get("bacatro_C_q", args.get("C"))
        if n == 1:
            return Comparison(C * t ** (2.0 / q) * lip2, 2.0 * math.exp(-t * t / 2.0),
                              "n = 1: log n vanishes, only the t^{2/q} term remains")
        thr = C * (t * t * math.log(n) ** (-1.0 + 1.0 / q) + t ** (2.0 / q)) * lip2
        return Comparison(thr, 2.0 * math.exp(-t * t / 2.0), "")
    if kind == "bacatro-power":
        alpha, t = args["alpha"], args["t"]
        t0 = constants.get("barcatrob_t0", args.get("t0"))
        if not alpha > 0 or t < t0:
            raise ValueError(f"need alpha > 0 and t >= t0 = {t0:g}")
        C = constants.get("barcatrob_C_alpha", args.get("C"))
        return Comparison(C * (math.log(t) / t) ** alpha, None, "")
    if kind == "berry-esseen":
        x, n, r = args["x"], int(args["n"]), args["r"]
        if not r >= 3:
            raise ValueError("need r >= 3")
        abs3, absr = args["abs3"], args["absr"]
        C = constants.get("berry_esseen_C_r", args.get("C"))
        val = C * (1.0 + abs(x)) ** (-r) * (n ** -0.5 * abs3 + n ** (-(r - 2.0) / 2.0) * absr)
        note = "" if math.isfinite(val) else "moment of order r is infinite: bound is vacuous"
        return Comparison(val, None, note)
    raise ValueError(f"unknown comparison {kind!r}")


# ---------------------------------------------------------------------------
# curves


@dataclass
class BoundCurve:
    t_grid: list
    values: list
    formula_id: str
    constants_used: dict = field(default_factory=dict)


def bound_curve(fn: Callable, t_grid, formula_id: str, keys=()) -> BoundCurve:
    """Evaluate ``fn(t)`` on ``t_grid`` with a snapshot of the constants in ``keys``."""
    vals = [fn(float(t)) for t in t_grid]
    return BoundCurve([float(t) for t in t_grid], vals, formula_id, constants.snapshot(list(keys)))
