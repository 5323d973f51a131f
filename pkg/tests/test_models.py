import math

import numpy as np
import pytest

from kmerhist.errors import ConfigurationError, FitError, ModelInconsistencyError
from kmerhist.histogram import AbundanceHistogram
from kmerhist.models import (
    Peak,
    coverage_from_rate,
    detect_peaks,
    error_mass,
    error_rate,
    estimate_genome_size_consistency,
    estimate_true_distinct,
    fit_model,
    g_from_peak_value,
    genome_size,
    kmer_rate,
    peak_value_from_g,
)


def sampled_histogram(lam1, distinct_by_m, rng, error_kmers=0, error_mean=1.3, k=15, max_i=None):
    """Histogram sampled from the generative model: Poi(m * lam1) per distinct k-mer of class m."""
    values = [rng.poisson(m * lam1, n) for m, n in distinct_by_m.items()]
    if error_kmers:
        values.append(1 + rng.poisson(error_mean - 1, error_kmers))
    allv = np.concatenate(values)
    allv = allv[allv > 0]
    idx, cnt = np.unique(allv, return_counts=True)
    counts = {int(i): int(c) for i, c in zip(idx, cnt)}
    return AbundanceHistogram(
        f0=int(cnt.sum()), counts=counts, total_kmers=int((idx * cnt).sum()), source="exact", k=k
    )


def test_published_peak_table():
    positions = [39, 78, 117]
    observed = [629675, 87496, 18881]
    distinct = [10076349, 1983449, 526740]
    want = [643696, 89595, 19427]
    want_err = [0.022, 0.024, 0.029]
    for m, (pos, obs, gm, w, we) in enumerate(zip(positions, observed, distinct, want, want_err), start=1):
        lam1 = pos / m
        value = peak_value_from_g(m * gm, m, lam1)
        assert round(value) == pytest.approx(w, abs=1)
        assert f"{abs(value - obs) / obs:.3f}" == f"{we:.3f}"


def test_formula_inversion():
    for m in (1, 2, 3, 7):
        for lam1 in (5.0, 39.0, 123.4):
            g = 123456.0 * m
            assert g_from_peak_value(peak_value_from_g(g, m, lam1), m, lam1) == pytest.approx(g, rel=1e-12)


def test_equation_chain():
    for c, l, k in [(50, 100, 15), (30.5, 150, 31), (7, 250, 85)]:
        N = 1.234e9
        g = genome_size(N, c, l, k)
        lam = kmer_rate(c, l, k)
        assert lam * g == pytest.approx(N, rel=1e-9)
        assert coverage_from_rate(lam, l, k) == pytest.approx(c, rel=1e-12)


def test_error_rate_monotone_in_cutoff():
    rng = np.random.default_rng(0)
    h = sampled_histogram(30, {1: 50_000}, rng, error_kmers=40_000)
    prev_n, prev_l = -1.0, -1.0
    for cutoff in range(0, 40):
        n_e = error_mass(h, cutoff)
        lam_e = error_rate(30.0, h.total_kmers, n_e)
        assert n_e >= prev_n and lam_e >= prev_l
        prev_n, prev_l = n_e, lam_e


def test_inconsistent_error_mass():
    with pytest.raises(ModelInconsistencyError):
        error_rate(30.0, 100, 100)
    h = AbundanceHistogram(f0=10, counts={1: 10}, total_kmers=10, source="exact", k=15)
    with pytest.raises(ModelInconsistencyError):
        fit_model(h, [Peak(30.0, 1.0, 1)], 100, error_cutoff=5)


def test_geometric_series_has_no_peak():
    counts = {i: int(1e6 * 0.5**i) for i in range(1, 40)}
    h = AbundanceHistogram(f0=sum(counts.values()), counts=counts, total_kmers=1, source="exact", k=15)
    with pytest.raises(FitError):
        detect_peaks(h)


def test_detect_planted_mixture():
    rng = np.random.default_rng(1)
    h = sampled_histogram(30, {1: 200_000, 2: 30_000}, rng, error_kmers=300_000)
    cutoff, peaks = detect_peaks(h)
    assert 1 <= cutoff < 20
    assert [p.m for p in peaks] == [1, 2]
    assert abs(peaks[0].position - 30) <= 2 and abs(peaks[1].position - 60) <= 2


def test_single_class_recovery():
    rng = np.random.default_rng(2)
    g1 = 500_000
    h = sampled_histogram(40, {1: g1}, rng, error_kmers=100_000)
    fit = fit_model(h, None, 100, 15)
    assert fit.g_m[1] == pytest.approx(g1, rel=0.03)
    assert fit.lambda_ == pytest.approx(fit.lambda_prime + fit.lambda_e)


def test_multi_class_recovery():
    rng = np.random.default_rng(3)
    distinct = {1: 400_000, 2: 50_000, 3: 20_000}
    h = sampled_histogram(35, distinct, rng, error_kmers=200_000)
    fit = fit_model(h, None, 100, 15)
    for m, n in distinct.items():
        assert fit.g_m[m] == pytest.approx(m * n, rel=0.05), m
    assert fit.lambda_prime == pytest.approx(35, rel=0.01)


def test_fixed_peaks_are_used():
    rng = np.random.default_rng(4)
    h = sampled_histogram(30, {1: 100_000}, rng, error_kmers=50_000)
    fit = fit_model(h, [Peak(30.0, 1000.0, 1)], 100, 15, error_cutoff=10)
    assert fit.lambda_prime == 30.0 and fit.error_cutoff == 10
    assert fit.g_m[1] == pytest.approx(g_from_peak_value(1000.0, 1, 30.0))


def test_error_free_routes_agree():
    rng = np.random.default_rng(5)
    lam1, g = 40.0, 300_000
    h = sampled_histogram(lam1, {1: g}, rng)
    l, k = 100, 15
    fit = fit_model(h, None, l, k, error_cutoff=0)
    c_true = lam1 * l / (l - k + 1)
    rep = estimate_genome_size_consistency(fit, c_true, g)
    assert fit.lambda_e == 0 and fit.lambda_ == fit.lambda_prime
    assert rep.max_difference < 0.01


def test_wrong_coverage_scales_size():
    rng = np.random.default_rng(6)
    h = sampled_histogram(40.0, {1: 100_000}, rng)
    fit = fit_model(h, None, 100, 15, error_cutoff=0)
    a = estimate_genome_size_consistency(fit, 40.0 * 100 / 86).estimates["coverage"]
    b = estimate_genome_size_consistency(fit, 2 * 40.0 * 100 / 86).estimates["coverage"]
    assert a / b == pytest.approx(2.0)


def test_true_distinct():
    h = AbundanceHistogram(f0=100, counts={1: 30, 2: 10, 40: 60}, total_kmers=2470, source="exact")
    assert estimate_true_distinct(h, 0) == 100
    assert estimate_true_distinct(h, 1) == 70
    assert estimate_true_distinct(h, 5) == 60


def test_fit_requires_k_and_valid_length():
    h = AbundanceHistogram(f0=1, counts={1: 1}, total_kmers=1, source="exact")
    with pytest.raises(ConfigurationError):
        fit_model(h, [Peak(3.0, 1.0, 1)], 100)
    with pytest.raises(ConfigurationError):
        fit_model(h, [Peak(3.0, 1.0, 1)], 10, k=15)


def test_fit_json_has_schema():
    rng = np.random.default_rng(7)
    h = sampled_histogram(30, {1: 100_000}, rng, error_kmers=50_000)
    js = fit_model(h, None, 100, 15).to_json_dict()
    assert js["schema_version"] == 1 and "g_m" in js and js["F0_true"] <= js["F0"]
