import math
import warnings

import numpy as np
import pytest
from scipy import stats

from heavytail_conc import conc, constants
from heavytail_conc.dist import Normal, TransportMap, Uniform, Weibull2
from heavytail_conc.numerics import PreconditionError


def sin_sum_oracle(n):
    """sum sin(x_i), gradient left to finite differences."""
    return conc.FunctionOracle(f=lambda x: np.sin(x).sum(axis=1), n=n, name="sin-sum")


class TestOracles:
    def test_linear(self):
        a = np.array([1.0, -2.0, 0.5])
        o = conc.linear_oracle(a)
        x = np.random.default_rng(0).standard_normal((4, 3))
        assert np.allclose(o(x), x @ a)
        assert np.all(o.gradient(x) == a)

    @pytest.mark.parametrize("make", [conc.l2norm_oracle, conc.softmax_oracle])
    def test_fd_matches_exact(self, make):
        o = make(5)
        x = np.random.default_rng(1).standard_normal((6, 5)) * 2
        fd = conc._fd_gradient(o.f, x)
        assert np.allclose(fd, o.gradient(x), atol=1e-7)

    def test_fd_fallback(self):
        o = sin_sum_oracle(3)
        x = np.array([[0.1, 1.0, -2.0]])
        assert not o.has_exact_gradient
        assert np.allclose(o.gradient(x), np.cos(x), atol=1e-9)

    def test_quadratic(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        o = conc.quadratic_oracle(A)
        x = np.array([[1.0, 2.0]])
        assert o(x)[0] == pytest.approx(0.5 * x[0] @ A @ x[0])
        assert np.allclose(o.gradient(x), x @ A)

    def test_softmax_smooth_max(self):
        o = conc.softmax_oracle(3, beta=50.0)
        assert o(np.array([[0.0, 1.0, 0.2]]))[0] == pytest.approx(1.0, abs=0.01)


class TestLipProfile:
    def test_linear_exact(self):
        a = np.array([3.0, -4.0])
        prof = conc.lip_profile(conc.linear_oracle(a), s_values=(1, 2, math.inf))
        assert prof.method == "exact-linear"
        for s, expected in ((1, 7.0), (2, 5.0), (math.inf, 4.0)):
            assert prof.lip(s) == expected
            assert prof.sharp(s) == expected

    def test_l2norm_closed(self):
        prof = conc.lip_profile(conc.l2norm_oracle(9), s_values=(2, math.inf))
        assert prof.lip(2) == 1.0
        assert prof.sharp(2) == pytest.approx(3.0)
        assert prof.sharp(math.inf) == 1.0

    def test_sampled_lower_bound(self):
        n = 4
        prof = conc.lip_profile(sin_sum_oracle(n), s_values=(2, math.inf), points=1024, refinements=8)
        assert prof.method == "sampled-sup"
        assert prof.lip(2) <= math.sqrt(n) + 1e-6
        assert prof.lip(2) >= 0.9 * math.sqrt(n)
        assert prof.sharp(math.inf) <= 1 + 1e-6
        for s in (2, math.inf):
            assert prof.lip(s) <= prof.sharp(s)


class TestPisier:
    def test_linear_quadratic_closed_form(self):
        a = np.array([1.0, -0.5, 2.0])
        a2 = float(a @ a)
        res = conc.pisier_check(conc.linear_oracle(a), np.square, 200000, np.random.default_rng(2))
        assert res.lhs == pytest.approx(2 * a2, rel=0.02)
        assert res.rhs == pytest.approx(math.pi ** 2 / 4 * a2, rel=0.02)
        assert res.ok

    def test_constant_equality(self):
        res = conc.pisier_check(conc.constant_oracle(3, 1.5), np.abs, 2000, np.random.default_rng(3))
        assert res.lhs == 0.0 and res.rhs == 0.0 and res.ok

    def test_l2norm_abs(self):
        res = conc.pisier_check(conc.l2norm_oracle(8), np.abs, 100000, np.random.default_rng(4))
        assert res.lhs <= res.rhs
        assert res.excluded == 0

    def test_nonconvex_warns(self):
        with pytest.warns(RuntimeWarning, match="convexity"):
            conc.pisier_check(conc.linear_oracle([1.0]), np.sin, 1000, np.random.default_rng(5))

    def test_fd_warns(self):
        with pytest.warns(RuntimeWarning, match="finite-difference"):
            conc.pisier_check(sin_sum_oracle(2), np.abs, 1000, np.random.default_rng(6))

    def test_nonfinite_excluded(self):
        def phi(u):
            u = np.asarray(u, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(u > 3.5, np.inf, u * u)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = conc.pisier_check(conc.linear_oracle([1.0]), phi, 20000, np.random.default_rng(7))
        assert res.excluded > 0


class TestTransportGradient:
    def test_normal_identity(self):
        o = conc.softmax_oracle(4)
        tmap = TransportMap.iid(Normal(), 4)
        z = np.array([0.3, -1.0, 2.0, 0.0])
        val, flagged = conc.transport_gradient(o, tmap, z)
        assert flagged == []
        assert val == pytest.approx(np.linalg.norm(o.gradient(z)[0]), rel=1e-10)

    def test_uniform_linear(self):
        a = np.array([1.0, 2.0, -3.0])
        z = np.array([0.5, -1.5, 2.5])
        val, _ = conc.transport_gradient(conc.linear_oracle(a), TransportMap.iid(Uniform(), 3), z)
        assert val == pytest.approx(math.sqrt(np.sum(a ** 2 * stats.norm.pdf(z) ** 2)), rel=1e-10)

    def test_zero_density_flagged(self):
        # the two-sided Weibull law with q = 2 has zero density at its median
        tmap = TransportMap.iid(Weibull2(2.0), 2)
        val, flagged = conc.transport_gradient(conc.linear_oracle([1.0, 1.0]), tmap, [0.0, 1.0])
        assert val == math.inf
        assert flagged == [0]


class TestWeibullBounds:
    def test_single_coordinate(self):
        c = constants.get("weibull_c_q")
        for t in (0.5, 1.0, 3.0):
            assert conc.linear_weibull_bound([1.0], t, 0.5) == pytest.approx(
                2 * math.exp(-c * min(t * t, t ** 0.5)), rel=1e-15)

    def test_crossover(self):
        n, q = 16, 0.5
        a = np.ones(n) / math.sqrt(n)
        # t^2 = (t sqrt n)^q at t = n^{q/(2(2-q))}
        tc = n ** (q / (2 * (2 - q)))
        assert tc ** 2 == pytest.approx((tc * math.sqrt(n)) ** q)
        below = conc.linear_weibull_bound(a, 0.5 * tc, q, c=1.0)
        above = conc.linear_weibull_bound(a, 2 * tc, q, c=1.0)
        assert below == pytest.approx(2 * math.exp(-(0.5 * tc) ** 2))
        assert above == pytest.approx(2 * math.exp(-(2 * tc * math.sqrt(n)) ** q))

    def test_domain(self):
        with pytest.raises(ValueError):
            conc.linear_weibull_bound([0.0, 0.0], 1.0, 0.5)
        with pytest.raises(ValueError):
            conc.linear_weibull_bound([1.0], 1.0, 1.5)

    def test_sharp_reduces_to_linear(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            a = rng.standard_normal(7)
            prof = conc.lip_profile(conc.linear_oracle(a))
            for t in (0.1, 1.0, 4.0):
                thr, prob = conc.weibull_theorem_bound(prof, t, 0.5, 7, "sharp")
                assert thr == t
                assert prob == conc.linear_weibull_bound(a, t, 0.5)

    def test_robust_formula(self):
        prof = conc.LipProfile({2: (1.0, 1.0), math.inf: (0.25, 0.25)}, "given")
        q, n, t = 0.5, 64, 1.5
        C = constants.get("weibull_C_q")
        thr, prob = conc.weibull_theorem_bound(prof, t, q, n, "robust")
        expected = C * math.log(math.e + n / t ** (-2 + 4 / q)) ** (1 / q - 0.5) * (t + t ** (2 / q) * 0.25)
        assert thr == pytest.approx(expected, rel=1e-14)
        assert prob == pytest.approx(2 * math.exp(-t * t / 2))

    def test_robust_small_t(self):
        prof = conc.lip_profile(conc.normalized_sum_oracle(64))
        thr = [conc.weibull_theorem_bound(prof, t, 0.5, 64, "robust")[0] for t in (1e-4, 1e-8, 1e-16)]
        # the log factor blows up as t -> 0, but only polylogarithmically
        assert thr[0] > thr[1] > thr[2]
        assert thr[2] < 1e-11

    def test_monotone(self):
        prof = conc.lip_profile(conc.normalized_sum_oracle(64))
        grid = np.linspace(0.05, 5, 60)
        sharp = np.array([conc.weibull_theorem_bound(prof, t, 0.5, 64, "sharp") for t in grid])
        assert np.all(np.diff(sharp[:, 1]) <= 0)
        robust = np.array([conc.weibull_theorem_bound(prof, t, 0.5, 64, "robust") for t in grid])
        assert np.all(np.diff(robust[:, 1]) <= 0)
        # the threshold dips while n t^{2-4/q} is large (log factor falls faster than t grows)
        assert np.all(np.diff(robust[grid >= 2.0, 0]) >= 0)

    def test_errors(self):
        prof = conc.LipProfile({2: (1.0, 1.0)}, "given")
        with pytest.raises(KeyError):
            conc.weibull_theorem_bound(prof, 1.0, 0.5, 4)
        with pytest.raises(PreconditionError):
            conc.weibull_theorem_bound(prof, 1.0, 1.0, 4)


class TestPowerBounds:
    @pytest.mark.parametrize("n", [16, 256, 4096])
    def test_normalized_sum(self, n):
        q = 3.0
        C = constants.get("power_C_q")
        sharp = np.full(n, 1 / math.sqrt(n))
        for t in (0.3, 1.0, 2.0, 3.0):
            thr, prob = conc.power_theorem_bound(sharp, t, q)
            g = t * math.exp(t * t / (2 * q)) * n ** (1 / q - 0.5)
            assert thr == pytest.approx(C * t * max(1.0, g), rel=1e-12)
            assert thr <= C * t * (1 + g) <= 2 * thr
            assert prob == pytest.approx(constants.get("power_C_prob") * math.exp(-t * t / 2))

    def test_nonconstant_profile_uses_norm(self):
        v = np.array([1.0, 0.5, 0.25, 0.1])
        thr, _ = conc.power_theorem_bound(v, 1.0, 4.0, C_q=1.0)
        r = conc.lorentz_radius(1.0, 4.0)
        from heavytail_conc.lornorm import primal_norm
        assert thr == pytest.approx(math.sqrt(primal_norm(v ** 2, (r, 2.0), mode="generators").value),
                                    rel=1e-7)

    def test_lipschitz_p_arithmetic(self):
        q, p, n, t, L = 4.0, 8.0, 10 ** 4, 1.7, 0.3
        C = constants.get("power_C_pq")
        first = L * t * 10 ** (4 * (1 / 2 - 1 / 8))
        second = L * 10 ** (4 / 4) * t ** 2 * math.exp(t ** 2 / 8)
        thr, _ = conc.power_theorem_bound(None, t, q, n, "lipschitz-p", p=p, lip_p=L)
        assert thr == pytest.approx(C * (first + second), rel=1e-13)

    def test_small_t(self):
        thr, prob = conc.power_theorem_bound(np.ones(8), 1e-8, 3.0)
        assert thr < 1e-6
        assert prob == pytest.approx(constants.get("power_C_prob"))

    def test_radius_clamp(self):
        assert conc.lorentz_radius(0.1, 3.0) == 1.0
        assert conc.lorentz_radius(2.0, 4.0) == pytest.approx(4 * math.e)

    def test_errors(self):
        with pytest.raises(PreconditionError):
            conc.power_theorem_bound(None, 1.0, 4.0, 100, "lipschitz-p", p=4.0, lip_p=1.0)
        with pytest.raises(PreconditionError):
            conc.power_theorem_bound(np.ones(3), 1.0, 2.0)
        with pytest.raises(PreconditionError):
            conc.power_theorem_bound(None, 1.0, 4.0, 100, "lipschitz-p")

    def test_monotone_threshold(self):
        grid = np.linspace(0.1, 4, 40)
        thr = [conc.power_theorem_bound(np.linspace(1, 0.1, 6), t, 3.0)[0] for t in grid]
        assert np.all(np.diff(thr) >= 0)


class TestComparisons:
    def test_berry_esseen_at_zero(self):
        res = conc.comparison_bounds("berry-esseen", x=0.0, n=100, r=4.0, abs3=2.0, absr=9.0)
        assert res.value == pytest.approx(constants.get("berry_esseen_C_r") * (0.2 + 0.09))

    def test_berry_esseen_infinite_moment(self):
        res = conc.comparison_bounds("berry-esseen", x=1.0, n=100, r=3.0, abs3=math.inf, absr=math.inf)
        assert res.value == math.inf
        assert "vacuous" in res.note

    def test_bacatro_weibull_n1(self):
        res = conc.comparison_bounds("bacatro-weibull", t=2.0, q=0.5, n=1, lip2=3.0)
        assert res.value == pytest.approx(constants.get("bacatro_C_q") * 2.0 ** 4 * 3.0)
        assert "n = 1" in res.note

    def test_bacatro_weibull(self):
        res = conc.comparison_bounds("bacatro-weibull", t=2.0, q=0.5, n=100, lip2=1.0, C=1.0)
        assert res.value == pytest.approx(4 * math.log(100) + 16)

    def test_bacatro_power(self):
        t = math.e ** 2
        res = conc.comparison_bounds("bacatro-power", alpha=3.0, t=t, C=1.5)
        assert res.value == pytest.approx(1.5 * (2 / math.e ** 2) ** 3)

    def test_errors(self):
        with pytest.raises(ValueError):
            conc.comparison_bounds("bacatro-power", alpha=3.0, t=2.0)
        with pytest.raises(ValueError):
            conc.comparison_bounds("berry-esseen", x=0.0, n=10, r=2.0, abs3=1.0, absr=1.0)
        with pytest.raises(ValueError):
            conc.comparison_bounds("nope")


def test_bound_curve_snapshot():
    curve = conc.bound_curve(lambda t: conc.linear_weibull_bound([1.0], t, 0.5), [0.5, 1.0, 2.0],
                             "linear-weibull", keys=["weibull_c_q"])
    assert curve.constants_used["weibull_c_q"] == constants.get("weibull_c_q")
    assert np.all(np.diff(curve.values) <= 0)
