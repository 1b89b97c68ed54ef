import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mid_detect import analytic as an
from mid_detect import simulator as sim
from mid_detect.model import ModelParams, derive
from mid_detect.simulator import Hypothesis, Message


class TestStreams:
    def test_reproducible(self):
        a = sim.stream(1, Hypothesis.H0, 3).standard_normal(5)
        b = sim.stream(1, 0, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_distinct_keys(self):
        draws = {tuple(sim.stream(*key).integers(0, 2**62, 4)) for key in [(1, 0, 0), (1, 1, 0), (1, 0, 1), (2, 0, 0)]}
        assert len(draws) == 4

    def test_negative_key(self):
        with pytest.raises(ValueError):
            sim.stream(-1, 0, 0)

    @pytest.mark.parametrize("sampler", ["ziggurat", "inverse_cdf"])
    def test_samplers_are_normal(self, sampler):
        z = sim.normal(sim.stream(4, 0, 0), 2.0, 200_000, sampler)
        assert stats.kstest(z / 2.0, "norm").pvalue > 1e-3

    def test_unknown_sampler(self):
        with pytest.raises(ValueError):
            sim.normal(sim.stream(0, 0, 0), 1.0, 3, "box_muller")


class TestGeneration:
    def test_noiseless_h1_is_a_pure_delay(self):
        p = ModelParams(k=6, d_max=10, true_delay=-7)
        batch = sim.generate_batch(p, Hypothesis.H1, sim.stream(0, 1, 0), 4, noiseless=True)
        n = np.arange(-p.d_max, p.n + p.d_max)
        inside = (n - p.true_delay >= 0) & (n - p.true_delay < p.n)
        assert np.array_equal(batch.y_at(n[inside]), batch.x[:, n[inside] - p.true_delay])

    def test_shapes(self):
        p = ModelParams()
        t = sim.generate_trial(p, Hypothesis.H0, sim.stream(0, 0, 0))
        assert t.x.shape == (256,) and t.y.shape == (356,)
        with pytest.raises(ValueError):
            sim.TrialBatch(t.x, t.y[:-1], Hypothesis.H0, 50)

    def test_sample_correlations(self):
        p = ModelParams(sigma_s=1.5, sigma1=0.8, sigma2=1.2, k=8, d_max=20, true_delay=5)
        rho_d = derive(p).rho_d
        for hyp, expected in [(Hypothesis.H0, 0.0), (Hypothesis.H1, rho_d)]:
            b = sim.generate_batch(p, hyp, sim.stream(9, hyp, 0), 400)
            x = b.x.ravel()
            y = b.y_at(np.arange(p.n) + p.true_delay).ravel()
            r = np.corrcoef(x, y)[0, 1]
            se = (1 - expected**2) / math.sqrt(x.size)
            assert abs(r - expected) <= 4 * se

    def test_marginal_variances(self):
        p = ModelParams(sigma_s=2.0, sigma1=0.5, sigma2=1.5)
        b = sim.generate_batch(p, Hypothesis.H1, sim.stream(2, 1, 0), 500)
        assert b.x.var() == pytest.approx(4.25, rel=0.02)
        assert b.y.var() == pytest.approx(6.25, rel=0.02)


class TestEncoderDecoder:
    def test_encode_example(self):
        msg = sim.encode_max_index([0.1, -0.3, 0.9, 0.2])
        assert (msg.index, msg.bits) == (2, "10")

    def test_encode_ties_go_to_smallest_index(self):
        assert sim.encode_max_index(np.zeros(8)).bits == "000"
        assert sim.encode_max_index([1.0, 3.0, 3.0, 0.0]).index == 1

    def test_encode_rejects_bad_length(self):
        with pytest.raises(ValueError):
            sim.encode_max_index([1.0, 2.0, 3.0])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=16, max_size=16, unique=True), st.integers(0, 15))
    def test_cyclic_shift_equivariance(self, values, shift):
        x = np.array(values)
        j = sim.encode_max_index(x).index
        assert sim.encode_max_index(np.roll(x, shift)).index == (j + shift) % 16

    def test_message_validation(self):
        assert Message.from_bits("0101").index == 5
        assert Message.from_index(5, 4).bits == "0101"
        with pytest.raises(ValueError):
            Message(3, "10")
        with pytest.raises(ValueError):
            Message.from_index(16, 4)
        with pytest.raises(ValueError):
            Message.from_bits("012")

    def test_decode_example(self):
        y = np.array([0.0, 0.1, 2.5, 0.2, 0.0, -1.0, 9.0])  # logical -1..5
        hyp, t = sim.decode_mid(Message.from_index(1, 2), y, tau=2.0, d_max=1)
        assert (hyp, t) == (Hypothesis.H1, 2.5)
        hyp, t = sim.decode_mid(Message.from_index(3, 2), y, tau=2.0, d_max=1)
        assert (hyp, t) == (Hypothesis.H0, 0.2)

    def test_decode_window_violation(self):
        with pytest.raises(IndexError):
            sim.decode_mid(Message.from_index(3, 2), np.zeros(5), tau=0.0, d_max=1)

    def test_batch_statistic_matches_single_trial_decoder(self):
        p = ModelParams(k=5, d_max=4, true_delay=2)
        b = sim.generate_batch(p, Hypothesis.H1, sim.stream(3, 1, 0), 50)
        batch = sim.mid_statistics(b.x, b.y, p.d_max)
        single = [sim.decode_mid(sim.encode_max_index(x), y, 0.0, p.d_max)[1] for x, y in zip(b.x, b.y)]
        assert np.array_equal(batch, single)


class TestEngine:
    @pytest.mark.parametrize("hyp", list(Hypothesis))
    def test_lean_engine_matches_full_trajectories(self, hyp):
        p = ModelParams(k=7, d_max=12, true_delay=-5)
        lean = sim.simulate_mid(p, hyp, 40_000, seed=1).statistic
        full = sim.generate_batch(p, hyp, np.random.default_rng(2), 40_000)
        ref = sim.mid_statistics(full.x, full.y, p.d_max)
        assert stats.ks_2samp(lean, ref).pvalue > 1e-3

    def test_worker_independence(self):
        p = ModelParams(k=6, d_max=8, true_delay=3)
        a = sim.simulate_mid(p, Hypothesis.H1, 2500, 5, block_size=500, keep_window=True)
        b = sim.simulate_mid(p, Hypothesis.H1, 2500, 5, block_size=500, keep_window=True, workers=3)
        for name in ("statistic", "index", "x_max", "window"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_whole_blocks_are_stable_under_extension(self):
        p = ModelParams(k=5, d_max=3, true_delay=0)
        a = sim.simulate_mid(p, Hypothesis.H0, 800, 5, block_size=400)
        b = sim.simulate_mid(p, Hypothesis.H0, 1500, 5, block_size=400)
        assert np.array_equal(a.statistic, b.statistic[:800])

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            sim.simulate_mid(ModelParams(), Hypothesis.H0, 0, 1)
        with pytest.raises(ValueError):
            sim.simulate_mid(ModelParams(), Hypothesis.H0, 10, 1, workers=0)

    def test_index_uniform_under_both_hypotheses(self):
        p = ModelParams(k=4, d_max=3, true_delay=1)
        for hyp in Hypothesis:
            counts = np.bincount(sim.simulate_mid(p, hyp, 64_000, 8).index, minlength=16)
            assert stats.chisquare(counts).pvalue > 1e-3

    def test_h0_statistic_cdf_dkw(self):
        p = ModelParams()
        t = np.sort(sim.simulate_mid(p, Hypothesis.H0, 20_000, 6).statistic)
        ecdf = np.arange(1, t.size + 1) / t.size
        model = 1 - np.array([an.p_fa(v, 1.0, 50) for v in t])
        band = math.sqrt(math.log(2 / 1e-3) / (2 * t.size))
        assert np.max(np.abs(ecdf - model)) <= band + 1 / t.size

    def test_error_rates_against_analytic(self):
        p = ModelParams()
        tau = an.calibrate_tau(0.05, 1.0, 50)
        fa, md = sim.monte_carlo_error_rates(p, tau, 40_000, 21)
        assert abs(fa.probability - 0.05) <= 4 * math.sqrt(0.05 * 0.95 / 40_000)
        assert abs(md.probability - an.p_md(tau, p)) <= 4 * md.std_error + 1e-3


class TestEstimates:
    def test_mc_estimate(self):
        e = sim.McEstimate.from_counts(25, 100)
        assert e.probability == 0.25
        assert e.ci_halfwidth == pytest.approx(1.959963984540054 * math.sqrt(0.25 * 0.75 / 100))
        assert e.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
        with pytest.raises(ValueError):
            sim.McEstimate.from_counts(0, 0)

    @settings(max_examples=30)
    @given(st.integers(0, 1000).flatmap(lambda t: st.tuples(st.integers(0, t), st.just(max(t, 1)))))
    def test_mc_interval_contains_estimate(self, ht):
        hits, trials = ht
        hits = min(hits, trials)
        e = sim.McEstimate.from_counts(hits, trials)
        assert 0 <= e.probability <= 1 and e.ci_halfwidth >= 0

    def test_mean_estimate(self):
        e = sim.MeanEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
        assert e.mean == 2.5 and e.trials == 4
        assert e.std_error == pytest.approx(math.sqrt(5 / 3) / 2)


class TestMie:
    def test_scale(self):
        assert sim.mie_scale(ModelParams()) == pytest.approx(math.sqrt(2) * 2.8268632789392196, rel=1e-10)

    def test_aligned_lag_is_regression_slope(self):
        p = ModelParams(sigma_s=1.0, sigma1=0.6, sigma2=1.4)
        est = sim.estimate_rho_mie(p, p.true_delay, 40_000, 3)
        assert abs(est.mean - derive(p).beta) <= 4 * est.std_error

    def test_h0_is_centered(self):
        p = ModelParams()
        est = sim.estimate_rho_mie(p, p.true_delay, 40_000, 4, hypothesis=Hypothesis.H0)
        assert abs(est.mean) <= 4 * est.std_error

    def test_lag_range(self):
        with pytest.raises(ValueError):
            sim.estimate_rho_mie(ModelParams(), 51, 10, 0)
