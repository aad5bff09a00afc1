import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indisim.core import pure, trace_distance, uhlmann_fidelity
from indisim.protocol import make_source, output_state, transfer_analytic
from indisim.tomography import (
    BASES,
    CountRecord,
    analyze,
    correct_efficiencies,
    ideal_records,
    mle_reconstruct,
    mle_reconstruct_many,
    simulate_counts,
)

KET01 = np.array([1.0, 0.0])


def _seeds(n, base=0):
    return [np.random.SeedSequence([base, k]) for k in range(n)]


class TestBases:
    @pytest.mark.parametrize("label", "ZXY")
    def test_complete_and_orthogonal(self, label):
        p = BASES[label].projectors
        np.testing.assert_allclose(p[0] + p[1], np.eye(2), atol=1e-15)
        np.testing.assert_allclose(p[0] @ p[1], np.zeros((2, 2)), atol=1e-15)


class TestSimulateCounts:
    def test_basis_state_never_clicks_other_detector(self):
        recs = simulate_counts(pure(KET01), 1e4, seed=1, bases=("Z",))
        assert recs[0].counts[1] == 0

    def test_mixed_state_splits_evenly(self):
        recs = ideal_records(np.eye(2) / 2)
        for r in recs:
            assert r.counts == pytest.approx((0.5, 0.5))

    def test_poisson_mean(self):
        recs = simulate_counts(np.eye(2) / 2, 1e6, seed=3, efficiencies=(0.9, 0.6), bases=("Z",))
        n0, n1 = recs[0].counts
        assert n0 == pytest.approx(0.45e6, abs=5 * math.sqrt(0.45e6))
        assert n1 == pytest.approx(0.30e6, abs=5 * math.sqrt(0.30e6))

    def test_deterministic(self):
        rho = output_state(0.4, 0.6)
        assert simulate_counts(rho, 1e5, seed=42) == simulate_counts(rho, 1e5, seed=42)
        assert simulate_counts(rho, 1e5, seed=42) != simulate_counts(rho, 1e5, seed=43)

    def test_rejects_nonpositive_mean(self):
        with pytest.raises(ValueError):
            simulate_counts(np.eye(2) / 2, 0, seed=0)


class TestEfficiency:
    def test_unit_is_identity(self):
        r = CountRecord("X", (10, 20))
        assert correct_efficiencies(r) == r

    def test_arithmetic(self):
        r = correct_efficiencies(CountRecord("Z", (900, 1000), (0.9, 1.0)))
        assert r.counts == pytest.approx((1000, 1000))
        assert r.efficiencies == (1.0, 1.0)

    @pytest.mark.parametrize("eta", [(0.0, 1.0), (1.0, -0.5), (1.2, 1.0)])
    def test_rejects_bad_efficiency(self, eta):
        with pytest.raises(ValueError):
            CountRecord("Z", (1, 1), eta)

    def test_skewed_pipeline_recovers_mixed_state(self):
        seeds = _seeds(40, base=7)
        skew = mle_reconstruct_many([simulate_counts(np.eye(2) / 2, 1e6, s, efficiencies=(0.7, 0.95)) for s in seeds])
        for res in skew:
            assert trace_distance(res.rho_rec, np.eye(2) / 2) < 5e-3

    def test_neutrality(self):
        rho = output_state(math.radians(60), 0.8)
        dists = {}
        for n in (1e3, 1e6):
            plain = mle_reconstruct_many([simulate_counts(rho, n, s) for s in _seeds(100, 1)])
            skew = mle_reconstruct_many(
                [simulate_counts(rho, n, s, efficiencies=(0.8, 0.95)) for s in _seeds(100, 2)]
            )
            dists[n] = np.median([trace_distance(a.rho_rec, b.rho_rec) for a, b in zip(plain, skew)])
        assert dists[1e6] <= 0.01
        assert dists[1e6] < dists[1e3]


class TestReconstruct:
    def test_mixed_fixed_point(self):
        res = mle_reconstruct(ideal_records(np.eye(2) / 2))
        np.testing.assert_allclose(res.rho_rec, np.eye(2) / 2, atol=1e-8)
        assert res.converged

    def test_transferred_state_exact_data(self):
        rho = transfer_analytic(math.radians(60), 0.8).rho_corrected
        res = mle_reconstruct(ideal_records(rho))
        assert uhlmann_fidelity(rho, res.rho_rec) > 1 - 1e-8

    @settings(max_examples=25, deadline=None)
    @given(theta=st.floats(0, 2 * math.pi), D=st.floats(-0.99, 0.99))
    def test_fixed_point_of_exact_data(self, theta, D):
        rho = output_state(theta, D)
        res = mle_reconstruct(ideal_records(rho), tol=0.0)
        assert np.max(np.abs(res.rho_rec - rho)) < 1e-7

    def test_loglik_monotone(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in range(60):
            rho = output_state(rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1))
            res = mle_reconstruct(simulate_counts(rho, 10 ** rng.uniform(2, 6), seed=k), max_iters=3000)
            steps = np.diff(res.ll_trace)
            worst = min(worst, steps.min(initial=0.0))
        assert worst >= -1e-12

    def test_batch_matches_single(self):
        recs = [simulate_counts(output_state(0.3 * k, 0.5), 1e4, seed=k) for k in range(5)]
        many = mle_reconstruct_many(recs)
        for r, m in zip(recs, many):
            one = mle_reconstruct(r)
            np.testing.assert_allclose(one.rho_rec, m.rho_rec, atol=1e-14)
            assert one.iterations == m.iterations

    def test_trace_length(self):
        res = mle_reconstruct(simulate_counts(np.eye(2) / 2, 1e3, seed=0))
        assert len(res.ll_trace) == res.iterations + 1
        assert res.ll_trace[-1] == pytest.approx(res.log_likelihood)

    def test_iteration_cap(self):
        res = mle_reconstruct(ideal_records(pure(make_source(0.2))), max_iters=5, tol=0.0)
        assert res.iterations == 5
        assert not res.converged

    def test_degenerate_records(self):
        with pytest.raises(ValueError):
            mle_reconstruct([CountRecord("Z", (0, 0)), CountRecord("X", (5, 5))])
        with pytest.raises(ValueError):
            mle_reconstruct([])

    def test_mixed_layouts_rejected(self):
        a = ideal_records(np.eye(2) / 2)
        with pytest.raises(ValueError):
            mle_reconstruct_many([a, a[:2]])


class TestStatistics:
    def test_median_fidelity_at_high_counts(self):
        rho = output_state(math.radians(60), 0.8)
        res = mle_reconstruct_many([simulate_counts(rho, 1e6, s) for s in _seeds(100, 5)])
        assert np.median([uhlmann_fidelity(rho, r.rho_rec) for r in res]) >= 0.999

    def test_fidelity_improves_with_counts(self):
        rho = output_state(math.radians(30), 0.6)
        med = []
        for n in (1e3, 1e4, 1e6):
            res = mle_reconstruct_many([simulate_counts(rho, n, s) for s in _seeds(100, 9)])
            med.append(np.median([uhlmann_fidelity(rho, r.rho_rec) for r in res]))
        assert med[0] < med[1] < med[2]


class TestAnalyze:
    def test_exact(self):
        rho = output_state(0.5, 0.3)
        assert analyze(rho, rho, make_source(0.5))["uhlmann_fidelity"] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("D", [0.0, 0.4, 0.9])
    def test_transferred(self, D):
        rho = transfer_analytic(1.0, D).rho_corrected
        out = analyze(rho, rho, make_source(1.0))
        assert out["overlap"] == pytest.approx((1 + D) / 2, abs=1e-14)
        assert out["eigenvalues"][0] == pytest.approx((1 + D) / 2, abs=1e-14)

    def test_mixed(self):
        out = analyze(np.eye(2) / 2, np.eye(2) / 2, make_source(0.0))
        assert out["purity"] == pytest.approx(0.5)
        np.testing.assert_allclose(out["eigenvalues"], [0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            analyze(np.eye(2) / 2, np.eye(2) / 2, np.ones(3) / math.sqrt(3))
