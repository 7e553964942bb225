import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatnet import builder
from heatnet.ann import counters, realize
from heatnet.builder import (INFEASIBLE, GrowthConstants, TheoreticalConstants, build,
                             build_empirical, cost_bound_floor, cost_bounds, cost_exponents,
                             inner_accuracy, initial_network, softplus_heat_constants,
                             theoretical_constants, theoretical_sample_count)
from heatnet.calculus import ensemble_counts
from heatnet.flow import FlowSpec
from heatnet.oracle import RidgeSoftplus, SquaredNorm, UnsupportedError, exact_solution


def heat_problem(d, T=1.0, K=0.0):
    ic = RidgeSoftplus.ones(d, K)
    return ic, initial_network(ic), FlowSpec.heat(d, T)


growth = st.builds(
    GrowthConstants,
    c=st.floats(0.5, 5.0), v=st.floats(0, 2), vv=st.floats(0, 2), w=st.floats(0, 2),
    ww=st.floats(0, 2), z=st.floats(0, 2), zz=st.floats(0, 2), alpha=st.floats(0, 2),
    beta=st.floats(0, 2), p_count=st.floats(0, 3), q_count=st.floats(0, 3),
)


class TestConstants:
    def test_bold_constant_example(self):
        gc = GrowthConstants(c=0.5)
        tc = theoretical_constants(gc, T=1.0, a=0.0, b=1.0, r=1.0)
        with mpmath.workdps(60):
            want = (4 * mpmath.mpf(5.5) ** 10 + 1) * 2
            assert abs(tc.Cbold - want) <= want * mpmath.mpf(10) ** -50
            assert abs(tc.Csample - 4 * mpmath.mpf(5.5) ** 10) <= want * mpmath.mpf(10) ** -50

    def test_sample_count_example(self):
        tc = TheoreticalConstants(1, 9, 2, 0, 8)
        assert theoretical_sample_count(tc, 3, 0.5) == 288

    def test_softplus_family(self):
        gc = softplus_heat_constants()
        tc = theoretical_constants(gc, T=1.0, a=0.0, b=1.0, r=1.0)
        assert float(tc.pexp) == 6.0
        assert float(tc.Csample) == pytest.approx(4 * 31.0**18, rel=1e-14)
        assert theoretical_sample_count(tc, 5, 0.25) == 699053619999045038539170241000000

    def test_count_is_exact_integer(self):
        tc = theoretical_constants(softplus_heat_constants(), 1.0, 0.0, 1.0, 1.0)
        n = theoretical_sample_count(tc, 5, 0.25)
        assert n == 4 * 31**18 * 5**6 * 16

    @settings(max_examples=50, deadline=None)
    @given(z=st.floats(0, 5))
    def test_exponent_formula(self, z):
        gc = GrowthConstants(c=1.0, z=z, zz=1.0, w=0.5, ww=0.0, beta=0.5)
        tc = theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
        assert float(tc.pexp) == pytest.approx(5 + 2 * z, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(gc=growth, T=st.floats(0.01, 5), a=st.floats(-3, 0), width=st.floats(0.1, 3),
           r=st.floats(0.1, 3), d=st.integers(1, 50), eps=st.floats(1e-3, 1.0))
    def test_inner_accuracy_and_calibration(self, gc, T, a, width, r, d, eps):
        tc = theoretical_constants(gc, T, a, a + width, r)
        assert tc.Ccal <= 1
        assert inner_accuracy(tc, gc, d, eps) <= eps

    @settings(max_examples=30, deadline=None)
    @given(gc=growth, d=st.integers(1, 20), eps=st.floats(0.01, 1.0))
    def test_monotone_in_dimension(self, gc, d, eps):
        tc = theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
        assert theoretical_sample_count(tc, d + 1, eps) >= theoretical_sample_count(tc, d, eps)
        for k in ("P", "N"):
            assert cost_bounds(tc, gc, d + 1, eps)[k] >= cost_bounds(tc, gc, d, eps)[k]

    def test_infeasible_marker(self):
        gc = GrowthConstants(c=1e6, zz=40.0, ww=40.0)
        tc = theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
        assert tc.as_floats()["Csample"] == INFEASIBLE
        assert builder.to_float(mpmath.mpf(2)) == 2.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            GrowthConstants(c=0.1)
        with pytest.raises(ValueError):
            GrowthConstants(c=1.0, w=-1.0)
        with pytest.raises(ValueError):
            theoretical_constants(GrowthConstants(c=1.0), 1.0, 1.0, 0.0, 1.0)
        tc = theoretical_constants(GrowthConstants(c=1.0), 1.0, 0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            theoretical_sample_count(tc, 1, 0.75)

    def test_exponents(self):
        gc = softplus_heat_constants()
        tc = theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
        assert cost_exponents(tc, gc) == {"d": 13.0, "eps": -4.0}

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("eps", [1.0, 0.5, 0.25])
    def test_theoretical_counts_within_bounds(self, d, eps):
        gc = softplus_heat_constants()
        tc = theoretical_constants(gc, 1.0, 0.0, 1.0, 1.0)
        counts = builder.theoretical_counts(tc, gc, (d, 1, 1), d, eps)
        assert counts["P"] <= cost_bound_floor(tc, gc, d, eps, "P")
        assert counts["N"] <= cost_bound_floor(tc, gc, d, eps, "N")


class TestInitialNetwork:
    @pytest.mark.parametrize("d,K", [(1, 0.0), (3, 2.5), (7, -1.0)])
    def test_exact_representation(self, d, K):
        ic = RidgeSoftplus.ones(d, K)
        X = np.random.default_rng(d).normal(size=(200, d)) * 3
        assert np.max(np.abs(realize(initial_network(ic), X)[:, 0] - ic(X))) <= 1e-13

    def test_parameter_count(self):
        assert counters(initial_network(RidgeSoftplus.ones(4))).P == 4 + 3

    def test_wrong_type(self):
        with pytest.raises(TypeError):
            initial_network(SquaredNorm())


class TestBuild:
    def test_frozen_dynamics_reproduces_phi(self):
        ic = RidgeSoftplus.ones(2, 0.5)
        phi = initial_network(ic)
        spec = FlowSpec(np.zeros(2), np.zeros((2, 2)), 1.0)
        out = build(ic, phi, spec, (0.0, 1.0), 0.05, 8, seed=0, restarts=2)
        X = np.random.default_rng(0).uniform(size=(100, 2))
        assert np.max(np.abs(realize(out.psi, X) - realize(phi, X))) <= 1e-12
        assert out.grid_sup_error <= 1e-12 and out.certified

    def test_one_dimension_certifies(self):
        ic, phi, spec = heat_problem(1)
        out = build(ic, phi, spec, (0.0, 1.0), 0.05, 4096, seed=0, restarts=1)
        assert out.certified and out.certified_sup <= 0.05

    def test_uncertified_still_returns(self):
        ic, phi, spec = heat_problem(1)
        out = build(ic, phi, spec, (0.0, 1.0), 0.01, 4, seed=0, restarts=2)
        assert not out.certified
        assert out.certified_sup > 0.01 and out.n_used == 4

    def test_seed_determinism(self):
        ic, phi, spec = heat_problem(2)
        a = build(ic, phi, spec, (0.0, 1.0), 0.05, 32, seed=7, restarts=3)
        b = build(ic, phi, spec, (0.0, 1.0), 0.05, 32, seed=7, restarts=3)
        assert a.restart_index == b.restart_index
        for (Wa, ba), (Wb, bb) in zip(a.psi.layers, b.psi.layers):
            assert np.array_equal(Wa, Wb) and np.array_equal(ba, bb)
        assert a.metadata() == b.metadata()

    def test_workers_invariance(self):
        ic, phi, spec = heat_problem(2)
        a = build(ic, phi, spec, (0.0, 1.0), 0.05, 32, seed=3, restarts=4)
        b = build(ic, phi, spec, (0.0, 1.0), 0.05, 32, seed=3, restarts=4, workers=3)
        assert a.metadata() == b.metadata()

    def test_more_samples_help(self):
        ic, phi, spec = heat_problem(1)
        errs = {n: np.median([build(ic, phi, spec, (0.0, 1.0), 0.05, n, seed=s, restarts=1,
                                    method="grid", resolution=64).grid_sup_error
                              for s in range(10)])
                for n in (64, 4096)}
        assert errs[4096] < errs[64]

    def test_count_conformance(self):
        ic, phi, spec = heat_problem(3)
        out = build(ic, phi, spec, (0.0, 1.0), 0.5, 10, seed=0, restarts=1)
        P, N, L = ensemble_counts(phi.shape, 10)
        assert (out.counts.P, out.counts.N, out.counts.L) == (P, N, L)

    def test_selection_is_best_score(self):
        ic, phi, spec = heat_problem(1)
        out = build(ic, phi, spec, (0.0, 1.0), 0.05, 16, seed=1, restarts=5)
        scores = out.history[0]["restart_scores"]
        assert out.restart_index == scores.index(min(scores))
        assert out.sup.score == min(scores)

    def test_unsupported_raises_before_sampling(self, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("sampled")

        monkeypatch.setattr(builder, "sample_shifts", boom)
        spec = FlowSpec(np.ones(2), np.eye(2), 1.0)
        phi = initial_network(RidgeSoftplus.ones(2))
        with pytest.raises(UnsupportedError):
            build(SquaredNorm(), phi, spec, (0.0, 1.0), 0.1, 8, seed=0)

    def test_exact_solution_agrees_with_psi_mean(self):
        ic, phi, spec = heat_problem(1)
        out = build(ic, phi, spec, (0.0, 1.0), 0.05, 4096, seed=2, restarts=1)
        x = np.array([[0.5]])
        assert abs(realize(out.psi, x)[0, 0] - exact_solution(ic, spec, x)[0]) <= 0.05


class TestEmpirical:
    def test_doubling_history(self):
        ic, phi, spec = heat_problem(1)
        out = build_empirical(ic, phi, spec, (0.0, 1.0), 0.05, seed=0, restarts=2)
        ns = [h["n"] for h in out.history]
        assert ns[0] == 16 and all(b == 2 * a for a, b in zip(ns, ns[1:]))
        assert out.certified and out.n_used == ns[-1]
        assert all(not h["certified"] for h in out.history[:-1])

    def test_cap_reached(self):
        ic, phi, spec = heat_problem(1)
        out = build_empirical(ic, phi, spec, (0.0, 1.0), 1e-6, seed=0, restarts=1, n_cap=64)
        assert out.n_used == 64 and not out.certified
        assert [h["n"] for h in out.history] == [16, 32, 64]

    def test_metadata_roundtrip(self):
        ic, phi, spec = heat_problem(2)
        out = build_empirical(ic, phi, spec, (0.0, 1.0), 0.1, seed=0, restarts=1,
                              n_theoretical=10**40)
        meta = out.metadata()
        assert meta["n_theoretical"] == str(10**40)
        assert meta["dim"] == 2 and meta["ic"]["kind"] == "softplus-ridge"
