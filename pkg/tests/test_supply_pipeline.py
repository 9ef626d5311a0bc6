import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from microtrap.errors import DomainError
from microtrap.supply_pipeline import (HistogramFit, PipelineConfig, build_histogram,
                                       classify_and_score, collisional_blockade, detect,
                                       extract_sample, fit_two_gaussians, p_single_analytic,
                                       run_pipeline, run_trial, write_histogram, write_trial_log)

REPLICA = PipelineConfig()


def mixture_sample(rng, n, w1, m0=2000.0, s0=694.5, m1=6500.0, s1=1323.6):
    ones = rng.random(n) < w1
    return np.where(ones, rng.normal(m1, s1, n), rng.normal(m0, s0, n))


def test_extract_sample():
    rng = np.random.default_rng(1)
    assert np.all(extract_sample(0.0, rng, 1000) == 0)
    x = extract_sample(10.0, rng, 100_000)
    assert abs(x.mean() - 10) < 3 * np.sqrt(10 / x.size)
    with pytest.raises(DomainError):
        extract_sample(-1, rng)


def test_parity_only_config_caps_single_probability():
    cfg = PipelineConfig(pair_single_loss=0.0, single_atom_retention=1.0, poisson_mean_lambda=5)
    assert p_single_analytic(cfg.poisson_mean_lambda, 1.0) < 0.5


def test_blockade_parity():
    rng = np.random.default_rng(0)
    assert collisional_blockade(4, 1.0, rng) == 0
    assert collisional_blockade(5, 1.0, rng) == 1
    assert collisional_blockade(0, 1.0, rng) == 0
    kept = collisional_blockade(np.ones(100_000, int), 0.8, rng)
    assert abs(kept.mean() - 0.8) < 3 * np.sqrt(0.8 * 0.2 / kept.size)


def test_blockade_never_exceeds_one():
    rng = np.random.default_rng(7)
    n = rng.integers(0, 1000, 1_000_000)
    assert collisional_blockade(n, 1.0, rng).max() <= 1
    assert collisional_blockade(n[:10_000], 1.0, rng, pair_single_loss=0.5).max() <= 1


def test_p_single_analytic():
    assert p_single_analytic(0.0, 1.0) == 0
    assert p_single_analytic(1.0, 1.0) == pytest.approx((1 - np.exp(-2)) / 2)
    assert p_single_analytic(1.0, 1.0) == pytest.approx(0.4323, abs=1e-4)
    assert p_single_analytic(50.0, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_p_single_by_enumeration():
    # brute force: sum the Poisson pmf over odd n
    lam = 2.3
    n = np.arange(0, 200)
    odd = stats.poisson.pmf(n[n % 2 == 1], lam).sum()
    assert p_single_analytic(lam, 0.7) == pytest.approx(0.7 * odd, rel=1e-12)
    # the general recursion reduces to parity when single losses never happen
    assert p_single_analytic(lam, 0.7, 1e-300) == pytest.approx(0.7 * odd, rel=1e-12)


def test_pair_single_loss_monte_carlo():
    rng = np.random.default_rng(3)
    n = extract_sample(3.0, rng, 100_000)
    out = collisional_blockade(n, 0.9, rng, pair_single_loss=0.4)
    p = p_single_analytic(3.0, 0.9, 0.4)
    assert abs(out.mean() - p) < 3 * np.sqrt(p * (1 - p) / out.size)
    assert p == pytest.approx(0.558, abs=0.005)


def test_detect_levels():
    rng = np.random.default_rng(5)
    cfg = PipelineConfig()
    bg = detect(0, cfg, rng, 50_000)
    at = detect(1, cfg, rng, 50_000)
    assert bg.mean() == pytest.approx(cfg.bg_rate_mean, abs=4 * cfg.bg_rate_sigma / np.sqrt(5e4))
    assert at.std() == pytest.approx(cfg.atom_rate_sigma, rel=0.02)
    assert cfg.bg_rate_mean < cfg.threshold < cfg.atom_rate_mean
    with pytest.raises(DomainError):
        detect(2, cfg, rng)


def test_histogram_mass():
    rng = np.random.default_rng(2)
    x = mixture_sample(rng, 900, 0.558)
    h = build_histogram(x, 100.0)
    assert h.total == 900
    assert np.allclose(np.diff(h.edges), 100.0)
    single = build_histogram([1234.0], 10.0)
    assert single.counts.tolist() == [1.0]
    with pytest.raises(DomainError):
        build_histogram([], 1.0)


def test_histogram_bimodal_valley_contains_threshold():
    rng = np.random.default_rng(11)
    h = build_histogram(mixture_sample(rng, 10_000, 0.558), 250.0)
    c = h.centers
    left = np.argmax(np.where(c < 4000, h.counts, -1))
    right = np.argmax(np.where(c > 4000, h.counts, -1))
    valley = left + np.argmin(h.counts[left:right + 1])
    assert h.counts[valley] < 0.8 * min(h.counts[left], h.counts[right])
    assert c[left] < 4833 < c[right]


@pytest.mark.parametrize("seed", range(5))
def test_fit_recovers_weights_900(seed):
    rng = np.random.default_rng(seed)
    x = mixture_sample(rng, 900, 0.558)
    fit = fit_two_gaussians(build_histogram(x))
    assert fit.weight_1 == pytest.approx(0.558, abs=0.05)
    assert fit.weight_0 + fit.weight_1 == pytest.approx(1, abs=1e-6)
    assert fit.mean_0 < fit.mean_1 and not fit.degenerate


def test_fit_symmetric_mixture():
    rng = np.random.default_rng(9)
    x = mixture_sample(rng, 10_000, 0.5, s1=694.5)
    fit = fit_two_gaussians(build_histogram(x, 100.0))
    assert fit.weight_0 == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 10_000) + 0.01)


def test_fit_means_within_two_bins():
    rng = np.random.default_rng(4)
    h = build_histogram(mixture_sample(rng, 10_000, 0.558), 150.0)
    fit = fit_two_gaussians(h)
    assert abs(fit.mean_0 - 2000) < 2 * h.bin_width
    assert abs(fit.mean_1 - 6500) < 2 * h.bin_width


def test_fit_invariant_under_rescaling():
    rng = np.random.default_rng(8)
    h = build_histogram(mixture_sample(rng, 900, 0.558))
    a = fit_two_gaussians(h)
    b = fit_two_gaussians(h.scaled(37.0))
    assert a.weight_1 == pytest.approx(b.weight_1, abs=1e-6)


def test_fit_flags_unimodal_data():
    rng = np.random.default_rng(1)
    fit = fit_two_gaussians(build_histogram(rng.normal(0, 1, 2000)))
    assert fit.degenerate


def test_score_gaussian_tail():
    fit = HistogramFit(0.5, 0.0, 1.0, 0.5, 10.0, 1.0)
    s = classify_and_score(fit, 5.0)
    assert s.false_positive_mass == pytest.approx(0.5 * 2.866515719e-7, rel=1e-8)
    assert stats.norm.sf(5.0) == pytest.approx(2.87e-7, rel=2e-3)
    with pytest.raises(DomainError):
        classify_and_score(fit, 15.0)


def test_score_no_background():
    s = classify_and_score(HistogramFit(0.0, 0.0, 1.0, 1.0, 10.0, 1.0), 5.0)
    assert s.delivery_fidelity == 1.0
    assert s.p_zero + s.p_one == 1.0


def test_score_paper_like():
    fit = HistogramFit(0.442, 2000.0, 694.5, 0.558, 6500.0, 1323.6)
    s = classify_and_score(fit, 4833.0)
    assert s.delivery_probability == pytest.approx(0.500, abs=0.005)
    assert s.false_positive_mass == pytest.approx(1e-5, rel=0.05)
    assert s.delivery_fidelity >= 0.9999


@settings(max_examples=200)
@given(w0=st.floats(0, 1), s0=st.floats(0.2, 2), ds=st.floats(0, 2),
       t1=st.floats(0.5, 9.5), dt=st.floats(0, 5))
def test_score_monotone_in_threshold(w0, s0, ds, t1, dt):
    # monotone false-positive rate holds whenever sigma_0 <= sigma_1
    fit = HistogramFit(w0, 0.0, s0, 1 - w0, 10.0, s0 + ds)
    t2 = min(t1 + dt, 9.5)
    a, b = classify_and_score(fit, t1), classify_and_score(fit, t2)
    assert b.delivery_probability <= a.delivery_probability + 1e-15
    assert b.false_positive_rate <= a.false_positive_rate * (1 + 1e-9) + 1e-300


def test_repetition_rates():
    replica = PipelineConfig()
    assert 1 / replica.cycle_time == pytest.approx(1 / 0.229)
    fast = PipelineConfig(collision_duration=5e-3, exposure_time=2e-3, overhead_time=1e-3)
    assert 1 / fast.cycle_time > 100


def test_trials_are_order_independent():
    a = [run_trial(REPLICA, i) for i in range(50)]
    b = [run_trial(REPLICA, i) for i in reversed(range(50))][::-1]
    assert a == b


def test_run_pipeline_replica():
    outcomes, fit, stats_ = run_pipeline(REPLICA)
    assert len(outcomes) == 900
    assert all(o.final_atoms <= 1 for o in outcomes)
    assert all(o.classified_as == int(o.count_rate > REPLICA.threshold) for o in outcomes)
    assert fit.weight_1 == pytest.approx(0.558, abs=0.05)
    assert stats_.repetition_rate == pytest.approx(4.367, rel=1e-3)
    again = run_pipeline(REPLICA)
    assert again[0] == outcomes and again[2] == stats_


def test_output_files(tmp_path):
    outcomes, fit, s = run_pipeline(REPLICA)
    write_trial_log(outcomes, tmp_path / "t.csv")
    write_histogram(build_histogram([o.count_rate for o in outcomes]), tmp_path / "h.csv")
    (tmp_path / "s.json").write_text(s.to_json())
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == \
        "trial,initial_atoms,final_atoms,count_rate,classified"
    assert (tmp_path / "h.csv").read_text().startswith("bin_center,count\n")
    keys = set(json.loads((tmp_path / "s.json").read_text()))
    assert {"p_zero", "p_one", "false_positive_rate", "delivery_probability",
            "delivery_fidelity", "repetition_rate"} <= keys


def test_config_validation():
    with pytest.raises(DomainError):
        PipelineConfig(atom_rate_mean=100.0)
    with pytest.raises(DomainError):
        PipelineConfig(single_atom_retention=1.5)
    with pytest.raises(DomainError):
        PipelineConfig(trials=0)
