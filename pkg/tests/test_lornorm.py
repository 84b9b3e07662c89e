import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.optimize import linprog

from heavytail_conc import constants, lornorm
from heavytail_conc.dist import CdfLaw
from heavytail_conc.lornorm import LorentzParams


def generators(n, r, q):
    """Normalised sign vectors and their norms."""
    u = np.array([v for v in itertools.product((-1.0, 0.0, 1.0), repeat=n) if any(v)])
    norms = np.maximum(np.abs(u).sum(axis=1), r * np.sum(np.abs(u) ** q, axis=1) ** (1.0 / q))
    return u / norms[:, None]


def brute_dual(y, r, q):
    """Support function of the unit ball: max over its extreme points."""
    return float(np.max(generators(len(y), r, q) @ np.asarray(y, dtype=float)))


def lp_box_dual(y, r):
    """sup <x, y> over |x|_1 <= 1, |x|_inf <= 1/r, as a split-sign LP."""
    y = np.asarray(y, dtype=float)
    n = y.size
    c = -np.concatenate([y, -y])
    res = linprog(c, A_ub=np.ones((1, 2 * n)), b_ub=[1.0], bounds=[(0, 1.0 / r)] * (2 * n),
                  method="highs")
    return -res.fun


class TestParams:
    def test_k_max(self):
        assert LorentzParams(4.0, 2.0, 100).k_max == 16
        assert LorentzParams(4.0, 2.0, 5).k_max == 5
        assert LorentzParams(1.0, 3.0, 5).k_max == 1

    @pytest.mark.parametrize("r,q", [(0.5, 2.0), (2.0, 1.0)])
    def test_domain(self, r, q):
        with pytest.raises(ValueError):
            LorentzParams(r, q, 3)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            lornorm.dual_norm([1.0, 2.0], LorentzParams(2.0, 2.0, 3))


class TestDual:
    @pytest.mark.parametrize("r", [1.0, 2.5, 7.0])
    def test_unit_vector(self, r):
        y = np.zeros(5)
        y[2] = 1.0
        assert lornorm.dual_norm(y, (r, 2.0)).value == pytest.approx(1.0 / r, rel=1e-14)

    def test_ones(self):
        assert lornorm.dual_norm(np.ones(4), (2.0, 2.0)).value == pytest.approx(1.0, rel=1e-14)

    def test_zero(self):
        assert lornorm.dual_norm(np.zeros(3), (2.0, 2.0)).value == 0.0

    @pytest.mark.parametrize("r,q", [(1.0, 1.5), (3.0, 2.0), (10.0, 4.0)])
    def test_matches_extreme_points(self, r, q):
        rng = np.random.default_rng(1)
        for _ in range(20):
            y = rng.standard_normal(5)
            assert lornorm.dual_norm(y, (r, q)).value == pytest.approx(brute_dual(y, r, q), rel=1e-12)

    def test_sandwich(self):
        rng = np.random.default_rng(2)
        for r, q in itertools.product((1.0, 4.0, 16.0), (1.5, 2.0, 4.0)):
            for _ in range(50):
                v = lornorm.dual_norm(rng.pareto(1.5, 8) * rng.choice([-1, 1], 8), (r, q))
                rest = v.extra["restricted"]
                assert rest <= v.value * (1 + 1e-12)
                assert v.value <= 2 * rest * (1 + 1e-12)


class TestPrimal:
    def test_sign_vector_example(self):
        v = lornorm.primal_norm([1.0, 1.0, 0.0], (3.0, 2.0))
        assert v.value == pytest.approx(3 * math.sqrt(2), rel=1e-15)
        assert v.method == "exact-signvector"
        lp = lornorm.primal_norm([1.0, 1.0, 0.0], (3.0, 2.0), mode="generators").value
        assert lp == pytest.approx(3 * math.sqrt(2), rel=1e-8)

    def test_zero(self):
        assert lornorm.primal_norm(np.zeros(4), (2.0, 2.0)).value == 0.0

    @pytest.mark.parametrize("r,q", [(1.0, 1.5), (4.0, 2.0), (16.0, 4.0)])
    def test_bidual_lp_matches_generators(self, r, q):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.standard_normal(5)
            exact = lornorm.primal_norm(x, (r, q)).value
            gen = lornorm.primal_norm(x, (r, q), mode="generators").value
            assert exact == pytest.approx(gen, rel=1e-7)

    def test_all_sign_vectors(self):
        for r, q in itertools.product((1.0, 2.0, 5.0), (1.5, 3.0)):
            for u in itertools.product((-1.0, 0.0, 1.0), repeat=4):
                u = np.array(u)
                expected = max(np.abs(u).sum(), r * np.sum(np.abs(u) ** q) ** (1 / q))
                assert lornorm.primal_norm(u, (r, q)).value == expected

    def test_sign_vectors_via_lp(self):
        for u in itertools.product((-1.0, 0.0, 1.0), repeat=4):
            if any(u):
                lp = lornorm.primal_norm_generators(np.array(u), 2.0, 3.0)
                assert lp == pytest.approx(lornorm.sign_vector_norm(u, 2.0, 3.0), rel=1e-8)

    def test_approx_sandwich(self):
        rng = np.random.default_rng(4)
        for r, q in itertools.product((1.0, 4.0, 16.0), (1.5, 2.0, 4.0)):
            for _ in range(30):
                x = rng.standard_normal(6)
                exact = lornorm.primal_norm(x, (r, q)).value
                approx = lornorm.primal_norm(x, (r, q), mode="approx").value
                m = max(np.abs(x).sum(), r * np.sum(np.abs(x) ** q) ** (1 / q))
                assert m <= exact * (1 + 1e-9)
                assert exact <= approx * (1 + 1e-9)
                assert approx <= 16 * exact

    def test_generator_cap(self):
        with pytest.raises(ValueError, match="approx"):
            lornorm.primal_norm(np.ones(13), (2.0, 2.0), mode="generators")

    def test_duality(self):
        rng = np.random.default_rng(5)
        r, q = 3.0, 2.0
        for _ in range(20):
            x, y = rng.standard_normal((2, 5))
            px = lornorm.primal_norm(x, (r, q)).value
            dy = lornorm.dual_norm(y, (r, q)).value
            assert abs(x @ y) <= px * dy * (1 + 1e-8)
        # every extreme point of the unit ball has norm one
        for g in generators(4, r, q)[::7]:
            assert lornorm.primal_norm(g, (r, q)).value == pytest.approx(1.0, rel=1e-9)


class TestNormAxioms:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=6, max_size=6),
           st.lists(st.floats(-10, 10), min_size=6, max_size=6),
           st.floats(-5, 5))
    def test_homogeneity_triangle(self, x, y, lam):
        x, y = np.array(x), np.array(y)
        p = (2.0, 3.0)
        nx = lornorm.primal_norm(x, p).value
        ny = lornorm.primal_norm(y, p).value
        assert lornorm.primal_norm(lam * x, p).value == pytest.approx(abs(lam) * nx, rel=1e-9, abs=1e-9)
        assert lornorm.primal_norm(x + y, p).value <= nx + ny + 1e-9 * (1 + nx + ny)

    def test_signed_permutation_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            x = rng.standard_normal(7)
            y = rng.permutation(x) * rng.choice([-1.0, 1.0], 7)
            assert lornorm.primal_norm(x, (2.0, 2.0)).value == lornorm.primal_norm(y, (2.0, 2.0)).value
            assert lornorm.dual_norm(x, (2.0, 2.0)).value == lornorm.dual_norm(y, (2.0, 2.0)).value

    def test_rearrangement_stable(self):
        assert np.array_equal(lornorm.rearrangement([1.0, -3.0, 3.0, 0.0]), [3.0, 3.0, 1.0, 0.0])


class TestBoxDual:
    def test_r_one(self):
        y = np.array([0.5, -2.0, 1.0])
        v = lornorm.box_dual(y, 1.0)
        assert v.value == 2.0
        assert v.extra["exact"] == pytest.approx(lp_box_dual(y, 1.0), rel=1e-12)

    def test_large_r(self):
        y = np.array([0.5, -2.0, 1.0])
        assert lornorm.box_dual(y, 5.0).value == pytest.approx(3.5 / 5.0, rel=1e-15)

    def test_small_case(self):
        v = lornorm.box_dual([3.0, 1.0], 1.5)
        assert v.value == pytest.approx(8 / 3, rel=1e-15)
        assert v.extra["exact"] == pytest.approx(lp_box_dual([3.0, 1.0], 1.5), rel=1e-12)
        assert v.extra["exact"] <= v.value <= 2 * v.extra["exact"]

    def test_exact_against_lp(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            y = rng.standard_normal(6)
            r = rng.uniform(1.0, 8.0)
            assert lornorm.box_dual(y, r).extra["exact"] == pytest.approx(lp_box_dual(y, r), rel=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            lornorm.box_dual([1.0], 0.5)


class TestEquivalence:
    def test_case1(self):
        x = np.arange(1, 21, dtype=float) ** -2
        rep = lornorm.equivalence_case_check(x, (3.0, 2.0))
        assert 1 in rep.cases
        assert rep.details["case1_C"] == pytest.approx(1.0)
        assert rep.holds
        assert rep.lower <= rep.norm <= rep.upper

    def test_case2(self):
        q = 2.0
        x = np.arange(1, 21, dtype=float) ** (-1 / (2 * q))
        rep = lornorm.equivalence_case_check(x, (3.0, q))
        assert 2 in rep.cases
        assert rep.profile_exponent == pytest.approx(1 / (2 * q))
        assert rep.holds

    def test_case3_ones(self):
        rep = lornorm.equivalence_case_check(np.ones(10), (3.0, 2.0))
        assert 3 in rep.cases
        assert rep.details["case3_H2_integral"] == pytest.approx(2.0)
        assert rep.norm == pytest.approx(rep.lower)

    def test_no_case_with_zeros(self):
        rep = lornorm.equivalence_case_check(np.array([1.0, 0.0, 0.0]), (2.0, 2.0))
        assert rep.cases == []
        assert rep.holds

    def test_registry_override(self):
        x = np.arange(1, 11, dtype=float) ** -2
        with constants.override(equivalence_A=1.0):
            rep = lornorm.equivalence_case_check(x, (3.0, 2.0))
        assert rep.A == 1.0


class TestPoisson:
    def test_zero(self):
        assert lornorm.poisson_norm_estimate(np.zeros(3), 0.2, q=4.0, trials=1000).value == 0.0

    def test_hstar(self):
        assert float(lornorm.poisson_u_hstar(2.0, 4.0)) == 0.0
        v = np.array([0.01, 0.1, 0.5])
        assert np.allclose(lornorm.poisson_u_hstar(v, 4.0), (v / 2) ** -0.5 * np.log(2 / v))

    def test_unit_vector_direct(self):
        # x = e_1: E max(0, U_1 .. U_N) with N ~ Poisson(1/delta)
        delta, q, trials = 0.499, 4.0, 20000
        est = lornorm.poisson_norm_estimate([1.0, 0.0], delta, q=q, trials=trials,
                                            rng=np.random.default_rng(8))
        rng = np.random.default_rng(9)
        counts = rng.poisson(1 / delta, trials)
        draws = [lornorm.poisson_u_hstar(rng.random(c) + 1e-300, q).max() if c else 0.0 for c in counts]
        direct = np.mean(draws)
        se = np.std(draws) / math.sqrt(trials)
        assert abs(est.value - direct) <= 4 * math.hypot(est.se, se)

    def test_custom_law(self):
        law = CdfLaw(lambda x: np.clip(x, 0, 1), quantile=lambda s: s)
        est = lornorm.poisson_norm_estimate([1.0], 0.25, u_law=law, trials=20000,
                                            rng=np.random.default_rng(10))
        # E max of Poisson(4) uniforms, zero when empty
        k = np.arange(0, 60)
        exact = float(np.sum(stats.poisson.pmf(k, 4.0) * k / (k + 1)))
        assert est.value == pytest.approx(exact, abs=4 * est.se)

    def test_fitted_constant(self):
        q, n, delta = 4.0, 16, math.exp(-2)
        r = delta ** (-2 / q) * math.log(1 / delta)
        rng = np.random.default_rng(11)
        for x in (rng.random(n), np.ones(n), np.arange(1, n + 1, dtype=float) ** -0.7):
            est = lornorm.poisson_norm_estimate(x, delta, q=q, trials=4000, rng=rng)
            norm = lornorm.primal_norm(x, LorentzParams(r, q / 2, n)).value
            assert est.value <= constants.get("poisson_C_q") * norm

    def test_domain(self):
        with pytest.raises(ValueError):
            lornorm.poisson_norm_estimate([1.0], 0.6, q=4.0)
        with pytest.raises(ValueError):
            lornorm.poisson_norm_estimate([1.0], 0.2)
