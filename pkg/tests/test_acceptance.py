"""Acceptance run: one numerical check per criterion.

``run_acceptance(seed, workers)`` returns a JSON-able dict of per-criterion
results (no timings, so repeat runs can be compared byte for byte) and a
separate dict of wall-clock times.  Run as a script to print one
``CRITERION k: PASS/FAIL`` line per criterion.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest
from scipy import special

from heavytail_conc import conc, constants, lornorm, ostats, tailcmp
from heavytail_conc.dist import Exponential, Normal, Pareto, QuantileStar, Uniform
from heavytail_conc.harness import experiment
from heavytail_conc.harness.experiment import ExperimentConfig, dumps_report

SEED = 0

# name, wall-clock limit in seconds
CRITERIA = {
    1: ("optimal witness oracle", 1.0),
    2: ("envelope exactness", 10.0),
    3: ("coarsening ratio growth", 5.0),
    4: ("xi inverse bounds", 1.0),
    5: ("order statistic coverage", 60.0),
    6: ("C0 bracket", 1.0),
    7: ("norm sandwiches", 120.0),
    8: ("Pisier battery", 120.0),
    9: ("Weibull fit stability", 600.0),
    10: ("power bound, normalized sum", 600.0),
    11: ("trimmed sums vs simulation", 300.0),
    12: ("determinism", math.inf),
}


# ---------------------------------------------------------------------------
# 1. optimal witness


def _hinge_uniform(t, a):
    c = t - 1.0 / a
    if c >= 1:
        return 0.0
    return a * ((1 - c) ** 2 / 2 if c >= 0 else 0.5 - c)


def _hinge_exponential(t, a):
    c = t - 1.0 / a
    return a * (math.exp(-c) if c >= 0 else 1 - c)


def criterion_1(seed, workers):
    cells = []
    for law, t, a_true, m_true, hinge in ((Uniform(), 0.75, 4.0, 0.5, _hinge_uniform),
                                          (Exponential(), 2.0, 1.0, math.exp(-1), _hinge_exponential)):
        res = tailcmp.optimal_linear_witness(law, t)
        grid = np.geomspace(a_true / 4, 4 * a_true, 10 ** 4)
        grid_min = min(hinge(t, a) for a in grid)
        cells.append({"law": law.name, "t": t, "a": res.a, "minimum": res.minimum,
                      "a_error": abs(res.a - a_true), "min_error": abs(res.minimum - m_true),
                      "grid_gap": abs(res.minimum - grid_min)})
    ok = all(c["a_error"] <= 1e-8 and c["min_error"] <= 1e-8 and c["grid_gap"] <= 1e-6 for c in cells)
    return {"pass": ok, "cells": cells}


# ---------------------------------------------------------------------------
# 2. envelope exactness


def _pairs():
    """(label, X law, Y law, point where H_X meets the envelope)."""
    out = []
    for Y, s in ((Exponential(), 0.5), (Exponential(), 1.0), (Exponential(), 2.0), (Uniform(), 0.3),
                 (Normal(), 0.5), (Pareto(3.0), 2.0)):
        X = tailcmp.sharpness_witness(Y, s)
        out.append((f"sharpness {Y.name} s={s}", X, Y, float(Y.cdf_left(s))))
    for Y, cuts in ((Pareto(3.0), 1), (Pareto(3.0), 2), (Exponential(), 2), (Uniform(), 1)):
        coarse = tailcmp.coarsen(QuantileStar(Y), cuts)
        # the innermost cell (0, e^{-cuts^2}) carries the largest mean
        out.append((f"coarsen {Y.name} cuts={cuts}", coarse.law, Y, 1.0 - math.exp(-cuts * cuts)))
    return out


def criterion_2(seed, workers):
    xs = np.linspace(0.01, 0.99, 50)
    cells = []
    for label, X, Y, x_eq in _pairs():
        env = np.array([tailcmp.quantile_envelope(Y, float(x)) for x in xs])
        hx = np.asarray(X.quantile(xs), dtype=float)
        worst = float(np.max(hx - env))
        # H_X is constant just right of x_eq and equals the envelope there
        right = x_eq + 1e-12 * (1 - x_eq)
        gap = abs(float(X.quantile(right)) - tailcmp.quantile_envelope(Y, x_eq))
        cells.append({"pair": label, "max_excess": worst, "equality_gap": gap})
    ok = len(cells) == 10 and all(c["max_excess"] <= 1e-9 and c["equality_gap"] <= 1e-9 for c in cells)
    return {"pass": ok, "cells": cells}


# ---------------------------------------------------------------------------
# 3. coarsening counterexample


def criterion_3(seed, workers):
    Y, A = tailcmp.coarsening_example()
    ratios = []
    for n in range(2, 9):
        x = math.exp(-(n - 1) ** 2) * (1 - 1e-9)
        coarse = tailcmp.coarsen(Y, n, A)
        ratios.append(float(tailcmp.coarsening_ratio(coarse, tailcmp.coarsening_example_hstar, x)))
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    return {"pass": bool(increasing and max(ratios) > 5), "cut_counts": list(range(2, 9)),
            "ratios": ratios}


# ---------------------------------------------------------------------------
# 4. xi inverse


def criterion_4(seed, workers):
    y = np.linspace(1e-6, 1.0, 400)
    cells = []
    for which, forward in ((1, ostats.xi1), (2, ostats.xi2)):
        r = ostats.xi_inverse(which, y)
        cells.append({"which": which,
                      "max_excess": float(np.max(r.exact - r.bound)),
                      "round_trip": float(np.max(np.abs(forward(r.exact) - y))),
                      "low_branch_points": int(np.sum(y <= 2 / math.e))})
    ok = all(c["max_excess"] <= 1e-10 and c["round_trip"] <= 1e-10 for c in cells)
    return {"pass": ok, "cells": cells}


# ---------------------------------------------------------------------------
# 5. order statistics


def criterion_5(seed, workers):
    cells = []
    for t in (1.5, 2.0, 3.0):
        rep = experiment.order_stats(ExperimentConfig(operation="order-stats", n=1000, t=t,
                                                      trials=20000, seed=seed, workers=workers))
        cells.append({"t": t, "failure_frequency": rep["failure_frequency"], "se": rep["se"],
                      "allowed": rep["allowed"],
                      "renyi_failure_frequency": rep["renyi_failure_frequency"]})
    ok = all(c["failure_frequency"] <= c["allowed"] + 3 * c["se"] for c in cells)
    return {"pass": ok, "cells": cells}


# ---------------------------------------------------------------------------
# 6. C0


def criterion_6(seed, workers):
    r = ostats.c0_constant()
    s = np.geomspace(1e-2, 1e3, 200001)
    grid_max = float(np.max(ostats.c0_objective(s)))
    width = r.bracket[1] - r.bracket[0]
    ok = 1 < r.bracket[0] and r.bracket[1] < 2 and width <= 1e-6 and grid_max <= r.bracket[1]
    return {"pass": bool(ok), "value": r.value, "bracket": list(r.bracket), "width": width,
            "grid_max": grid_max}


# ---------------------------------------------------------------------------
# 7. norm sandwiches


def criterion_7(seed, workers):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(70,)))
    n = 8
    cells = []
    for r, q in itertools.product((1.0, 4.0, 16.0), (1.5, 2.0, 4.0)):
        dual_ratio, lower_ratio, upper_ratio, sign_err, gen_err = [], [], [], 0.0, 0.0
        for i in range(500):
            kind = i % 3
            x = rng.standard_normal(n) if kind == 0 else (
                rng.pareto(1.0, n) if kind == 1 else rng.random(n) * (rng.random(n) < 0.5))
            if not np.any(x):
                x[0] = 1.0
            d = lornorm.dual_norm(x, (r, q))
            dual_ratio.append(d.value / d.extra["restricted"])
            exact = lornorm.primal_norm(x, (r, q)).value
            approx = lornorm.primal_norm(x, (r, q), mode="approx").value
            lower = max(np.abs(x).sum(), r * np.sum(np.abs(x) ** q) ** (1 / q))
            lower_ratio.append(lower / exact)
            upper_ratio.append(approx / exact)
        for i in range(60):
            u = rng.choice([-1.0, 0.0, 1.0], n)
            if not np.any(u):
                u[0] = 1.0
            # 2u goes through the bidual LP rather than the closed form
            lp = lornorm.primal_norm(2 * u, (r, q)).value / 2
            sign_err = max(sign_err, abs(lp / lornorm.sign_vector_norm(u, r, q) - 1))
            if i < 5:
                gen = lornorm.primal_norm_generators(u, r, q)
                gen_err = max(gen_err, abs(gen / lornorm.sign_vector_norm(u, r, q) - 1))
        cells.append({"r": r, "q": q, "max_dual_ratio": max(dual_ratio), "min_dual_ratio": min(dual_ratio),
                      "max_lower_over_exact": max(lower_ratio), "min_approx_over_exact": min(upper_ratio),
                      "max_approx_over_exact": max(upper_ratio), "sign_vector_lp_error": sign_err,
                      "sign_vector_generator_error": gen_err})
    tol = 1e-9
    ok = all(c["min_dual_ratio"] >= 1 - tol and c["max_dual_ratio"] <= 2 + tol
             and c["max_lower_over_exact"] <= 1 + tol and c["min_approx_over_exact"] >= 1 - tol
             and c["max_approx_over_exact"] <= 16 and c["sign_vector_lp_error"] <= 1e-9
             and c["sign_vector_generator_error"] <= 1e-8 for c in cells)
    return {"pass": ok, "cells": cells}


# ---------------------------------------------------------------------------
# 8. Pisier battery


def _psi_battery():
    a = np.array([1.0, -0.5, 2.0])
    A = np.array([[0.3, 0.1, 0.0], [0.1, 0.2, 0.05], [0.0, 0.05, 0.1]])
    return [("linear", conc.linear_oracle(a)), ("l2norm", conc.l2norm_oracle(8)),
            ("softmax1", conc.softmax_oracle(8, 1.0)), ("softmax4", conc.softmax_oracle(8, 4.0)),
            ("quadratic", conc.quadratic_oracle(A))]


PHI_BATTERY = [
    ("square", np.square),
    ("abs", np.abs),
    ("hinge", lambda u: np.maximum(np.asarray(u) - 0.5, 0.0)),
    ("cosh", lambda u: np.cosh(0.5 * np.asarray(u))),
]


def criterion_8(seed, workers):
    cells = []
    a2 = 1.0 + 0.25 + 4.0
    closed = []
    for (pname, psi), (fname, phi) in itertools.product(_psi_battery(), PHI_BATTERY):
        for rep in range(3):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(80, rep)))
            res = conc.pisier_check(psi, phi, 100000, rng)
            cells.append({"psi": pname, "phi": fname, "seed": rep, "lhs": res.lhs, "rhs": res.rhs,
                          "se": res.lhs_se + res.rhs_se, "ok": res.ok})
            if pname == "linear" and fname == "square":
                closed.append({"lhs_rel_error": abs(res.lhs / (2 * a2) - 1),
                               "rhs_rel_error": abs(res.rhs / (math.pi ** 2 / 4 * a2) - 1)})
    ok = (len(cells) == 60 and all(c["ok"] for c in cells)
          and all(c["lhs_rel_error"] <= 0.02 and c["rhs_rel_error"] <= 0.02 for c in closed))
    return {"pass": ok, "closed_form": closed, "cells": cells}


# ---------------------------------------------------------------------------
# 9. Weibull fit stability


def criterion_9(seed, workers):
    fit = experiment.fit_weibull_rate(trials=100000, seed=seed, workers=workers)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(90,)))
    exact = True
    for _ in range(20):
        a = rng.standard_normal(int(rng.integers(1, 50)))
        prof = conc.lip_profile(conc.linear_oracle(a))
        for t in (0.1, 0.5, 1.0, 3.0, 10.0):
            exact &= conc.weibull_theorem_bound(prof, t, 0.5, a.size, "sharp")[1] == \
                conc.linear_weibull_bound(a, t, 0.5)
    return {"pass": bool(fit.stability <= 2 and exact), "per_n": dict(zip(("64", "256", "1024"), fit.per_cell)),
            "stability": fit.stability, "sharp_equals_linear": bool(exact)}


# ---------------------------------------------------------------------------
# 10. power bound


def _abs_moment(alpha, r):
    """E|X|^r for the symmetric law with P{|X| > x} = (1+x)^{-alpha}."""
    if r >= alpha:
        return math.inf
    return math.exp(special.gammaln(r + 1) + special.gammaln(alpha - r) - special.gammaln(alpha))


def criterion_10(seed, workers):
    q = 3.0
    C_q = constants.get("power_C_q")
    cells = []
    ok = True
    for n in (256, 1024):
        rep = experiment.verify(ExperimentConfig(theorem="power-lorentz", law="sympareto:alpha=3", q=q, n=n,
                                                 trials=100000, seed=seed, workers=workers))
        dominated = all(g["empirical_prob"] <= g["bound_prob"] for g in rep["grid"])
        t_max = math.sqrt(-2 * math.log(n ** (1 - q / 2) * math.log(n) ** (q / 2)))
        sharp = np.full(n, 1 / math.sqrt(n))
        regime = [t for t in np.linspace(0.05, t_max, 25)]
        worst = max(conc.power_theorem_bound(sharp, t, q)[0] / (C_q * t) for t in regime)
        deep = []
        sigma = math.sqrt(_abs_moment(q, 2))
        for g in rep["grid"]:
            if g["t"] < 3:
                continue
            x = g["threshold"] / sigma
            be = conc.comparison_bounds("berry-esseen", x=x, n=n, r=3.0, abs3=_abs_moment(q, 3) / sigma ** 3,
                                        absr=_abs_moment(q, 3) / sigma ** 3)
            deep.append({"t": g["t"], "bound_prob": g["bound_prob"], "berry_esseen": be.value})
        be_larger = bool(deep) and all(d["berry_esseen"] > d["bound_prob"] for d in deep)
        cells.append({"n": n, "dominated": dominated, "fitted": rep["fitted_constant"]["value"],
                      "regime_t_max": t_max, "worst_threshold_over_Cq_t": worst,
                      "berry_esseen_larger": be_larger, "deep_tail": deep})
        ok &= dominated and worst <= 2 and be_larger
    return {"pass": bool(ok), "C_q": C_q, "cells": cells}


# ---------------------------------------------------------------------------
# 11. trimmed sums


def criterion_11(seed, workers):
    p, n = 3.0, 1000
    j_values = (0, 4, 16)
    sums = experiment.trimmed_sums_sample(p, n, 10000, seed, j_values, workers)
    H = QuantileStar(Pareto(p))
    cells = []
    need = {j: 0.0 for j in j_values}
    for j, lam in itertools.product(j_values, (2.0, 3.0)):
        emp = float(np.quantile(sums[j], experiment.trimmed_level(lam)))
        pareto = ostats.pareto_trimmed_bound(p, n, j, lam).value
        quad = ostats.trimmed_sum_bound(H, n, j, n - 1, lam, "quadrature").value
        need[j] = max(need[j], emp / ostats.pareto_trimmed_bound(p, n, j, lam, C=1.0).value)
        cells.append({"j": j, "lambda": lam, "empirical_quantile": emp, "pareto_bound": pareto,
                      "quadrature_bound": quad})
    per_j = [need[j] for j in j_values]
    stability = max(per_j) / min(per_j)
    ok = all(c["pareto_bound"] >= c["empirical_quantile"] and c["quadrature_bound"] >= c["empirical_quantile"]
             for c in cells) and stability <= 2
    return {"pass": bool(ok), "fitted_C_per_j": per_j, "stability": stability,
            "registry_C": constants.get("pareto_trimmed_C"), "cells": cells}


CHECKS = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


def run_acceptance(seed: int = SEED, workers: int = 1):
    """Criteria 1-11; returns ``(results, seconds)``."""
    results, seconds = {}, {}
    for k, check in CHECKS.items():
        start = time.perf_counter()
        results[str(k)] = check(seed, workers)
        seconds[k] = time.perf_counter() - start
    return results, seconds


def determinism(first: str, seed: int = SEED):
    """Repeat the run serially and with 8 workers; compare report bytes."""
    repeat = dumps_report(run_acceptance(seed, 1)[0])
    parallel = dumps_report(run_acceptance(seed, 8)[0])
    return {"pass": first == repeat == parallel, "repeat_identical": first == repeat,
            "parallel_identical": first == parallel}


def verdicts(results, seconds):
    """``{k: (passed, seconds)}`` with the wall-clock limit folded in."""
    out = {}
    for k, (name, limit) in CRITERIA.items():
        if str(k) in results:
            out[k] = (bool(results[str(k)]["pass"]) and seconds.get(k, 0.0) < limit, seconds.get(k, 0.0))
    return out


def summary_lines(outcomes):
    lines = []
    for k in sorted(outcomes):
        passed, secs = outcomes[k]
        lines.append(f"CRITERION {k}: {'PASS' if passed else 'FAIL'}  {CRITERIA[k][0]} ({secs:.1f} s)")
    return lines


# ---------------------------------------------------------------------------
# pytest

OUTCOMES = {}


@pytest.fixture(scope="module")
def acceptance():
    return run_acceptance(SEED, 1)


def _check(acceptance, k):
    results, seconds = acceptance
    passed, secs = verdicts(results, seconds)[k]
    OUTCOMES[k] = (passed, secs)
    assert results[str(k)]["pass"], results[str(k)]
    assert secs < CRITERIA[k][1], f"took {secs:.1f} s"


@pytest.mark.slow
@pytest.mark.parametrize("k", list(CHECKS))
def test_criterion(acceptance, k):
    _check(acceptance, k)


@pytest.mark.slow
def test_criterion_12_determinism(acceptance):
    start = time.perf_counter()
    res = determinism(dumps_report(acceptance[0]))
    OUTCOMES[12] = (res["pass"], time.perf_counter() - start)
    assert res["pass"], res


if __name__ == "__main__":
    results, seconds = run_acceptance(SEED, 1)
    start = time.perf_counter()
    results["12"] = determinism(dumps_report(results), SEED)
    seconds[12] = time.perf_counter() - start
    for line in summary_lines(verdicts(results, seconds)):
        print(line)
    sys.exit(0 if all(r["pass"] for r in results.values()) else 1)
