import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatnet import oracle
from heatnet.flow import FlowSpec
from heatnet.oracle import (Linear, OracleAccuracyError, Ridge, RidgeSoftplus, SquaredNorm,
                            UnsupportedError, exact_gradient, exact_solution, gaussian_mean,
                            kernel_convolution, mc_reference)


def _mp_gauss(f, m, sigma):
    # the Gaussian weight is below 1e-300 outside |z| <= 40; break at the kink z = -m/sigma
    kink = -m / sigma
    pts = [-40.0] + ([kink] if -40 < kink < 40 else []) + [40.0]
    with mpmath.workdps(30):
        return float(mpmath.quad(lambda z: f(m + sigma * z) * mpmath.npdf(z), pts, maxdegree=10))


def mp_softplus_mean(m, sigma):
    return _mp_gauss(lambda t: mpmath.log1p(mpmath.exp(t)), m, sigma)


def mp_logistic_mean(m, sigma):
    return _mp_gauss(lambda t: 1 / (1 + mpmath.exp(-t)), m, sigma)


class TestClosedForms:
    def test_linear_martingale(self):
        ic = Linear([1.0, -2.0, 0.5], 0.0)
        X = np.random.default_rng(0).normal(size=(10, 3))
        for T in (0.1, 1.0, 10.0):
            u = exact_solution(ic, FlowSpec(np.zeros(3), np.eye(3), T), X)
            assert np.max(np.abs(u - ic(X))) <= 1e-12

    def test_linear_with_drift(self):
        mu = np.array([0.5, -1.0])
        spec = FlowSpec(mu, [[2.0, 0.3], [0.3, 1.0]], 1.7)
        ic = Linear([3.0, 1.0], 0.25)
        x = np.array([0.2, 0.4])
        assert abs(exact_solution(ic, spec, x) - ic(x + spec.T * mu)) <= 1e-12

    def test_squared_norm(self):
        x = np.array([0.3, -1.0, 2.0])
        u = exact_solution(SquaredNorm(0.0), FlowSpec.heat(3, 0.5), x)
        assert abs(u - (x @ x + 3.0)) <= 1e-10

    def test_squared_norm_requires_heat(self):
        spec = FlowSpec(np.ones(2), np.eye(2), 1.0)
        with pytest.raises(UnsupportedError):
            exact_solution(SquaredNorm(), spec, np.zeros(2))
        with pytest.raises(UnsupportedError):
            exact_solution(SquaredNorm(), FlowSpec(np.zeros(2), 2 * np.eye(2), 1.0), np.zeros(2))

    def test_dimension_mismatch(self):
        with pytest.raises(UnsupportedError):
            exact_solution(RidgeSoftplus.ones(3), FlowSpec.heat(2, 1.0), np.zeros(2))

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            Ridge("relu", [1.0])

    @pytest.mark.parametrize("profile", ["sin", "cos", "square", "identity"])
    def test_closed_profiles_vs_quadrature(self, profile):
        p = oracle.PROFILES[profile]
        z, w = np.polynomial.hermite_e.hermegauss(80)
        w = w / math.sqrt(2 * math.pi)
        for m, s in ((0.3, 0.7), (-1.2, 2.0)):
            ref = float(np.sum(w * p.g(m + s * z)))
            val, _ = gaussian_mean(profile, np.array([m]), s)
            assert abs(val[0] - ref) <= 1e-12


class TestRidgeQuadrature:
    @pytest.mark.parametrize("sigma", [0.1, 1.0, 2.9, 3.1, 6.0, 10.0])
    @pytest.mark.parametrize("m", [-7.0, -0.4, 0.0, 2.5, 12.0])
    def test_softplus_vs_arbitrary_precision(self, m, sigma):
        val, err = gaussian_mean("softplus", np.array([m]), sigma)
        assert abs(val[0] - mp_softplus_mean(m, sigma)) <= 1e-10
        assert err <= 1e-9

    @pytest.mark.parametrize("sigma", [0.5, 4.0, 10.0])
    @pytest.mark.parametrize("m", [-3.0, 0.0, 1.5])
    def test_logistic_vs_arbitrary_precision(self, m, sigma):
        val, _ = gaussian_mean("logistic", np.array([m]), sigma)
        assert abs(val[0] - mp_logistic_mean(m, sigma)) <= 1e-10

    def test_error_estimate_fails_loudly(self):
        with pytest.raises(OracleAccuracyError):
            gaussian_mean("softplus", np.linspace(-3, 3, 5), 2.0, nodes=3)

    def test_return_error(self):
        u, err = exact_solution(RidgeSoftplus.ones(2), FlowSpec.heat(2, 1.0), np.zeros(2),
                                return_error=True)
        assert 0 <= err <= 1e-9
        assert u > math.log(2)

    def test_gradient_vs_finite_difference(self):
        ic = Ridge("logistic", [0.5, -1.0, 2.0], 0.3)
        spec = FlowSpec([0.1, 0.0, -0.2], np.diag([1.0, 0.5, 0.2]), 0.8)
        x = np.array([0.2, -0.1, 0.4])
        h = 1e-5
        fd = [(exact_solution(ic, spec, x + h * e) - exact_solution(ic, spec, x - h * e)) / (2 * h)
              for e in np.eye(3)]
        assert np.allclose(exact_gradient(ic, spec, x), fd, atol=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(T1=st.floats(0.05, 3.0), T2=st.floats(0.05, 3.0), m=st.floats(-5, 5))
    def test_semigroup(self, T1, T2, m):
        # 1D reduction of the ridge: variance adds over consecutive time steps
        d = 2
        s1, s2 = math.sqrt(2 * T1 * d), math.sqrt(2 * T2 * d)
        z, w = np.polynomial.hermite_e.hermegauss(120)
        w = w / math.sqrt(2 * math.pi)
        inner, _ = gaussian_mean("softplus", m + s2 * z, s1)
        composed = float(np.sum(w * inner))
        direct = exact_solution(RidgeSoftplus.ones(d), FlowSpec.heat(d, T1 + T2),
                                np.array([m, 0.0]))
        assert abs(composed - direct) <= 1e-8

    def test_small_time_limit(self):
        gen = np.random.default_rng(1)
        X = gen.normal(size=(20, 3))
        spec = FlowSpec.heat(3, 1e-8)
        for ic in (RidgeSoftplus.ones(3, 0.5), Ridge("logistic", [1.0, 2.0, -1.0]), Linear([1, 1, 1])):
            assert np.max(np.abs(exact_solution(ic, spec, X) - ic(X))) <= 1e-3


class TestKernelConvolution:
    def test_constant(self):
        for T, x in ((0.1, [0.0]), (2.0, [1.0, -3.0]), (5.0, [0.1, 0.2, 0.3])):
            assert kernel_convolution(lambda Y: np.ones(len(Y)), T, x) == pytest.approx(1.0, abs=1e-13)

    def test_linear(self):
        ic = Linear([1.0, -1.0, 2.0], 0.5)
        x = np.array([0.3, 0.1, -0.2])
        assert abs(kernel_convolution(ic, 1.5, x) - ic(x)) <= 1e-12

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_softplus_ridge(self, d):
        ic = RidgeSoftplus.ones(d, 0.3)
        x = np.linspace(-0.5, 0.7, d)
        assert abs(kernel_convolution(ic, 1.0, x) - exact_solution(ic, FlowSpec.heat(d, 1.0), x)) <= 1e-8

    def test_too_many_dimensions(self):
        with pytest.raises(UnsupportedError, match="exact_solution or mc_reference"):
            kernel_convolution(lambda Y: np.ones(len(Y)), 1.0, np.zeros(5))


class TestMonteCarlo:
    def test_constant(self):
        est, se = mc_reference(Linear([0.0, 0.0], 2.5), FlowSpec.heat(2, 1.0), np.ones(2), 1000, 0)
        assert est == 2.5 and se == 0.0

    def test_dual_oracle_ten_million(self):
        ic, spec = RidgeSoftplus.ones(2), FlowSpec.heat(2, 1.0)
        est, se = mc_reference(ic, spec, np.zeros(2), 10_000_000, seed=0)
        assert abs(est - exact_solution(ic, spec, np.zeros(2))) <= 3 * se

    def test_one_dimensional(self):
        ic, spec = RidgeSoftplus.ones(1), FlowSpec.heat(1, 1.0)
        est, se = mc_reference(ic, spec, np.array([0.4]), 1_000_000, seed=5)
        assert abs(est - exact_solution(ic, spec, np.array([0.4]))) <= 4 * se

    def test_deterministic(self):
        ic, spec = RidgeSoftplus.ones(3), FlowSpec.heat(3, 1.0)
        a = mc_reference(ic, spec, np.zeros(3), 50_000, seed=3, chunk=7000)
        b = mc_reference(ic, spec, np.zeros(3), 50_000, seed=3)
        assert a[0] == pytest.approx(b[0], rel=1e-13) and a[1] == pytest.approx(b[1], rel=1e-10)

    @pytest.mark.parametrize("ic", [
        RidgeSoftplus.ones(3, -0.5),
        Ridge("logistic", [1.0, -0.5, 0.25, 2.0], 0.1),
        Ridge("tanh", [0.3, 0.3], -0.2),
        Linear([1.0, 2.0, 3.0], 1.0),
    ], ids=["softplus", "logistic", "tanh", "linear"])
    def test_oracle_triangle(self, ic):
        d = ic.dim
        spec = FlowSpec.heat(d, 0.6)
        x = np.linspace(0.1, 0.9, d)
        u = exact_solution(ic, spec, x)
        assert abs(u - kernel_convolution(ic, spec.T, x)) <= 1e-8
        est, se = mc_reference(ic, spec, x, 400_000, seed=1)
        assert abs(u - est) <= 4 * se + 1e-12


class TestGrowthEnvelopes:
    @pytest.mark.parametrize("ic", [
        RidgeSoftplus.ones(3, 1.5),
        RidgeSoftplus([2.0, -1.0], -3.0),
        Ridge("sin", [1.0, 2.0], 0.5),
        Ridge("square", [0.5, 0.5], 2.0),
        Ridge("softplus", [1.0], -4.0),
        Linear([1.0, -2.0], 3.0),
        SquaredNorm(1.0),
    ], ids=lambda ic: type(ic).__name__)
    def test_declared_envelope_holds(self, ic):
        d = getattr(ic, "dim", None) or 2
        X = np.random.default_rng(0).normal(size=(2000, d)) * np.geomspace(1e-3, 1e3, 2000)[:, None]
        assert oracle.check_growth(ic, X) == []

    def test_serialization_roundtrip(self):
        for ic in (RidgeSoftplus.ones(2, 0.5), Ridge("tanh", [1.0], 0.2), Linear([1.0, 2.0], 0.1),
                   SquaredNorm(0.5, 3)):
            back = oracle.ic_from_dict(oracle.ic_to_dict(ic))
            X = np.ones((3, getattr(ic, "dim", None) or 3))
            assert np.array_equal(back(X), ic(X))
