import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from delayhit.delay_model import (LatencyModel, NegativeRate, NonPositiveLatency, PdfEvalConfig,
                                  TruncationWarning, aggregate_delay_oracle, conditional_pdf_given_k_z,
                                  moments_deterministic, moments_exponential, pdf_numeric,
                                  pdf_point_mass_term, sample_aggregate_delay, sample_latency)

rates = st.floats(0, 10, allow_nan=False)
latencies = st.floats(0.01, 10, allow_nan=False)


# -- closed forms ---------------------------------------------------------------

def test_deterministic_moments_examples():
    m = moments_deterministic(1.0, 4.0)
    assert m.mean == 12.0
    assert m.variance == pytest.approx(64 / 3)
    assert moments_deterministic(0.0, 4.0) == moments_deterministic(0, 4)
    assert (moments_deterministic(0.0, 4.0).mean, moments_deterministic(0.0, 4.0).variance) == (4.0, 0.0)
    m = moments_deterministic(2.0, 1.0)
    assert (m.mean, m.variance) == (2.0, pytest.approx(2 / 3))


def test_exponential_moments_examples():
    m = moments_exponential(1.0, 1.0)
    assert (m.mean, m.variance) == (2.0, 12.0)
    m = moments_exponential(0.0, 2.0)
    assert (m.mean, m.variance) == (2.0, 4.0)
    m = moments_exponential(0.5, 4.0)
    assert (m.mean, m.variance) == (12.0, 528.0)


@pytest.mark.parametrize("fn", [moments_deterministic, moments_exponential])
def test_moment_argument_errors(fn):
    with pytest.raises(NonPositiveLatency):
        fn(1.0, 0.0)
    with pytest.raises(NegativeRate):
        fn(-0.1, 1.0)


@given(rates, latencies)
def test_exponential_mean_dominates_deterministic(lam, z):
    e, d = moments_exponential(lam, z), moments_deterministic(lam, z)
    assert e.mean >= d.mean
    assert e.variance >= d.variance
    if lam > 1e-6:
        assert e.mean > d.mean


@given(rates, latencies, st.floats(1.01, 3))
def test_moments_increase_with_rate_and_latency(lam, z, factor):
    for fn in (moments_deterministic, moments_exponential):
        base = fn(lam, z)
        up_z = fn(lam, z * factor)
        assert up_z.mean > base.mean and up_z.variance >= base.variance
        up_lam = fn(lam * factor + 0.01, z)
        assert up_lam.mean > base.mean and up_lam.variance > base.variance


@given(latencies)
def test_zero_rate_reduces_to_latency(z):
    assert moments_exponential(0, z).mean == z
    assert moments_exponential(0, z).variance == pytest.approx(z * z)
    assert moments_deterministic(0, z).variance == 0


# -- sampling ---------------------------------------------------------------------

def test_deterministic_sampler_is_a_point_mass():
    rng = np.random.default_rng(3)
    assert all(sample_latency(LatencyModel.deterministic(4.0), rng) == 4.0 for _ in range(10))


def test_exponential_sampler_mean_and_variance():
    rng = np.random.default_rng(42)
    model = LatencyModel.exponential(1.0)
    x = np.array([sample_latency(model, rng) for _ in range(10**6)])
    assert 0.997 <= x.mean() <= 1.003
    assert x.var() == pytest.approx(1.0, rel=0.01)
    assert x.min() > 0


def test_exponential_sampler_is_reproducible():
    model = LatencyModel.exponential(1.0)
    a = [sample_latency(model, np.random.default_rng(42)) for _ in range(3)]
    r1, r2 = np.random.default_rng(42), np.random.default_rng(42)
    assert [sample_latency(model, r1) for _ in range(50)] == [sample_latency(model, r2) for _ in range(50)]
    assert len(set(a)) == 1


def test_latency_model_rejects_non_positive_mean():
    with pytest.raises(NonPositiveLatency):
        LatencyModel.exponential(0.0)


# -- Monte Carlo oracle -----------------------------------------------------------

def test_oracle_degenerate_case_is_exact():
    est = aggregate_delay_oracle(0.0, LatencyModel.deterministic(5.0), 100, np.random.default_rng(0))
    assert est.mean == 5.0
    assert est.variance == 0.0


def test_oracle_matches_a_direct_loop():
    # slow per-sample construction of the aggregate delay, same distribution
    rng = np.random.default_rng(11)
    lam, z = 1.5, 2.0
    samples = []
    for _ in range(20_000):
        fetch = -z * math.log(1.0 - rng.random())
        t, waits = 0.0, 0.0
        while True:
            t += rng.exponential(1 / lam)
            if t > fetch:
                break
            waits += fetch - t
        samples.append(fetch + waits)
    loop = np.array(samples)
    vec = sample_aggregate_delay(lam, LatencyModel.exponential(z), 20_000, np.random.default_rng(12))
    se = math.sqrt(loop.var() / loop.size + vec.var() / vec.size)
    assert abs(loop.mean() - vec.mean()) < 4 * se


@pytest.mark.parametrize("model,expected_mean,expected_var", [
    (LatencyModel.exponential(1.0), 2.0, 12.0),
    (LatencyModel.deterministic(4.0), 12.0, 64 / 3),
    (LatencyModel.deterministic(1.0), 2.0, 2 / 3),
])
def test_oracle_agrees_with_closed_forms(model, expected_mean, expected_var):
    lam = 2.0 if model.mean == 1.0 and model.kind == "deterministic" else 1.0
    est = aggregate_delay_oracle(lam, model, 10**6, np.random.default_rng(7))
    assert abs(est.mean - expected_mean) <= 3 * est.se_mean
    assert est.variance == pytest.approx(expected_var, rel=0.05)


def test_oracle_variance_standard_error_is_calibrated():
    # spread of repeated variance estimates should match the reported SE
    model = LatencyModel.exponential(1.0)
    ests = [aggregate_delay_oracle(1.0, model, 20_000, np.random.default_rng(s)) for s in range(40)]
    spread = np.std([e.variance for e in ests], ddof=1)
    reported = np.mean([e.se_variance for e in ests])
    assert 0.6 < spread / reported < 1.6


# -- density ---------------------------------------------------------------------

def test_point_mass_term_examples():
    assert pdf_point_mass_term(0, 1, 0.7) == pytest.approx(math.exp(-0.7))
    assert pdf_point_mass_term(1, 1, 0.0) == 1.0
    assert pdf_point_mass_term(2, 0.5, 1.0) == pytest.approx(0.5 * math.exp(-2.5))
    assert pdf_point_mass_term(2, 0.5, 1.0) == pytest.approx(0.04104, abs=5e-6)


def test_point_mass_term_matches_smoothed_delta_integral():
    lam, mu, d, width = 2.0, 0.5, 1.0, 1e-4

    def integrand(z):
        delta = math.exp(-0.5 * ((d - z) / width) ** 2) / (width * math.sqrt(2 * math.pi))
        return math.exp(-lam * z) * delta * mu * math.exp(-mu * z)

    val, _ = quad(integrand, d - 20 * width, d + 20 * width, points=[d])
    assert val == pytest.approx(pdf_point_mass_term(lam, mu, d), rel=1e-6)


def test_conditional_density_single_arrival_is_uniform():
    assert conditional_pdf_given_k_z(1, 1.0, 1.5) == pytest.approx(1.0)
    assert conditional_pdf_given_k_z(1, 2.0, 3.0) == pytest.approx(0.5)
    assert conditional_pdf_given_k_z(1, 1.0, 0.5) == 0.0
    assert conditional_pdf_given_k_z(1, 1.0, 2.5) == 0.0


def test_conditional_density_two_arrivals_matches_histogram():
    rng = np.random.default_rng(5)
    n, z, d, h = 10**6, 1.0, 2.0, 0.02
    draws = z + z * rng.random((n, 2)).sum(axis=1)
    p = np.mean(np.abs(draws - d) < h / 2)
    estimate, se = p / h, math.sqrt(p * (1 - p) / n) / h
    assert abs(conditional_pdf_given_k_z(2, z, d) - estimate) <= 3 * se


@pytest.mark.parametrize("k", [1, 2, 5, 10, 16, 25, 40])
def test_conditional_density_normalizes(k):
    z = 0.7
    breaks = [z * (m + 1) for m in range(1, k)]
    total, _ = quad(lambda d: conditional_pdf_given_k_z(k, z, d), z, (k + 1) * z,
                    points=breaks[:50], limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("k,x", [(18, 9.3), (30, 14.9), (40, 12.25), (40, 27.5)])
def test_conditional_density_against_high_precision(k, x):
    # same alternating sum evaluated with 60 significant digits
    mpmath.mp.dps = 60
    xm = mpmath.mpf(x)
    ref = sum((-1) ** j * mpmath.binomial(k, j) * (xm - j) ** (k - 1)
              for j in range(int(math.floor(x)) + 1)) / mpmath.factorial(k - 1)
    z = 1.0
    assert conditional_pdf_given_k_z(k, z, z * (x + 1)) == pytest.approx(float(ref), rel=1e-6, abs=1e-15)


def test_zero_rate_density_is_exponential():
    d = np.linspace(0.01, 30, 500)
    assert np.max(np.abs(pdf_numeric(0.0, 1.0, d) - np.exp(-d))) < 1e-9
    assert pdf_numeric(0.0, 1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-12)


def test_density_normalizes_and_reproduces_moments():
    f = lambda d: pdf_numeric(1.0, 1.0, d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        pts = [1, 2, 5, 10, 50]
        mass = quad(f, 0, 300, points=pts, limit=500)[0]
        m1 = quad(lambda d: d * f(d), 0, 300, points=pts, limit=500)[0]
        m2 = quad(lambda d: d * d * f(d), 0, 300, points=pts, limit=500)[0]
    assert mass == pytest.approx(1.0, abs=1e-3)
    exact = moments_exponential(1.0, 1.0)
    assert m1 == pytest.approx(exact.mean, rel=0.01)
    assert m2 - m1**2 == pytest.approx(exact.variance, rel=0.01)


def test_density_matches_monte_carlo_bin():
    rng = np.random.default_rng(2024)
    n, d, h = 10**7, 2.0, 0.05
    draws = sample_aggregate_delay(1.0, LatencyModel.exponential(1.0), n, rng)
    p = np.mean(np.abs(draws - d) < h / 2)
    estimate, se = p / h, math.sqrt(p * (1 - p) / n) / h
    # bin average of the density, by quadrature, to remove the finite-bin bias
    bin_avg = quad(lambda x: pdf_numeric(1.0, 1.0, x), d - h / 2, d + h / 2)[0] / h
    assert abs(bin_avg - estimate) <= 3 * se
    assert pdf_numeric(1.0, 1.0, d) == pytest.approx(bin_avg, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2), st.floats(0.5, 5), st.floats(1e-3, 60))
def test_density_is_non_negative(lam, mu, d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        assert pdf_numeric(lam, mu, d) >= 0


def test_truncation_warning_when_series_is_cut_short():
    with pytest.warns(TruncationWarning):
        pdf_numeric(5.0, 0.5, 20.0, PdfEvalConfig(k_max=3))


def test_default_truncation_rule():
    cfg = PdfEvalConfig.default_for(1.0, 1.0)
    z_q = -math.log(1e-6)
    assert cfg.k_max == max(20, math.ceil(z_q + 8 * math.sqrt(z_q)))
    assert PdfEvalConfig.default_for(0.01, 1.0).k_max == 20


def test_pdf_config_bounds():
    with pytest.raises(ValueError):
        PdfEvalConfig(k_max=0)
    with pytest.raises(ValueError):
        PdfEvalConfig(quad_points=8)
