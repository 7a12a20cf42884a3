import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import lfilter

from ensemble_slice import RunConfig, make_target, run
from ensemble_slice.diagnostics import (ChainTooShortError, RunReport, autocorrelation,
                                        efficiency, ensemble_iat,
                                        integrated_autocorrelation_time)
from ensemble_slice.ensemble import ChainStore


def _ar1(alpha, n, seed=0):
    e = np.random.default_rng(seed).standard_normal(n)
    return lfilter([1.0], [1.0, -alpha], e)


def _direct(x):
    n = len(x)
    d = x - x.mean()
    c = np.array([np.dot(d[k:], d[:n - k]) / (n - k) for k in range(n)])
    return c / c[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 1000))
def test_fft_matches_direct_formula(seed, n):
    x = np.random.default_rng(seed).standard_normal(n).cumsum()
    assert np.max(np.abs(autocorrelation(x) - _direct(x))) < 1e-10


def test_autocorrelation_examples():
    alt = np.tile([1.0, -1.0], 50)
    rho = autocorrelation(alt)
    assert rho[0] == 1.0
    assert abs(rho[1] + 1) <= 2 / 100
    iid = np.random.default_rng(1).standard_normal(10**5)
    assert abs(autocorrelation(iid)[1]) < 0.02


def test_constant_series_has_zero_variance():
    with pytest.raises(ValueError, match="zero variance"):
        autocorrelation(np.ones(10))
    with pytest.raises(ValueError):
        autocorrelation([1.0])


def test_iat_iid():
    x = np.random.default_rng(2).standard_normal(10**6)
    assert integrated_autocorrelation_time(x) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 0.9])
def test_iat_ar1_closed_form(alpha):
    tau = integrated_autocorrelation_time(_ar1(alpha, 10**6, seed=int(alpha * 10)))
    assert tau == pytest.approx((1 + alpha) / (1 - alpha), rel=0.1)


def test_iat_too_short_carries_estimate():
    with pytest.raises(ChainTooShortError, match="chain too short") as info:
        integrated_autocorrelation_time(_ar1(0.99, 10**5, seed=3))
    assert 100 < info.value.estimate < 300


def test_iat_needs_100_samples():
    with pytest.raises(ValueError):
        integrated_autocorrelation_time(np.arange(99.0))


def test_ensemble_iat_examples():
    x = _ar1(0.8, 2 * 10**5, seed=4)
    single = integrated_autocorrelation_time(x)
    assert ensemble_iat(x[None, :]) == single
    assert ensemble_iat(np.tile(x, (4, 1))) == pytest.approx(single, rel=0.1)
    iid = np.random.default_rng(5).standard_normal((8, 10**4))
    assert ensemble_iat(iid) == pytest.approx(1.0, abs=0.05)
    stacked = np.stack([iid, 2 * iid], axis=2)
    assert ensemble_iat(stacked, 1) == ensemble_iat(iid)


def test_ensemble_iat_needs_100_steps_per_walker():
    with pytest.raises(ValueError):
        ensemble_iat(np.zeros((50, 99)))


def test_thinning_reduces_iat():
    x = _ar1(0.9, 10**6, seed=6)
    tau = integrated_autocorrelation_time(x)
    for t in (2, 5, 40):
        thinned = integrated_autocorrelation_time(x[::t])
        assert thinned == pytest.approx(max(1.0, tau / t), rel=0.15)


def test_efficiency_examples():
    assert efficiency(100, 10**4) == 0.01
    assert efficiency(0, 10) == 0
    with pytest.raises(ValueError):
        efficiency(1.0, 0)


def test_report_fields_and_json():
    chain, report = run(make_target("normal", dim=2), RunConfig(n_walkers=8,
                        n_iterations=400, seed=3))
    assert report.status == "ok" and report.sampler == "ess"
    assert report.burn_in_index == 200
    assert report.n_samples == 200 * 8
    assert all(t >= 1 for t in report.iat)
    assert report.n_eff == pytest.approx(report.n_samples / report.iat_mean)
    assert report.efficiency == pytest.approx(report.n_eff / report.n_evaluations)
    assert report.n_evaluations == int(chain.evaluations[200:].sum())
    assert report.n_evaluations_total == chain.n_density_evaluations
    assert json.loads(report.to_json())["n_samples"] == 1600


def test_report_on_short_chain_skips_iat():
    _, report = run(make_target("normal", dim=2), RunConfig(n_walkers=4,
                    n_iterations=20, seed=1))
    assert report.iat is None and report.n_samples == 40
    assert any("IAT not computed" in n for n in report.notes)


def test_empty_report():
    _, report = run(make_target("normal", dim=2), RunConfig(n_walkers=4,
                    n_iterations=0))
    assert report.status == "no samples" and report.n_samples == 0
    assert isinstance(report, RunReport)


def test_report_marks_failure():
    from ensemble_slice.diagnostics import make_report
    chain = ChainStore(np.zeros((0, 4, 2)), np.zeros((0, 4)), np.zeros(0, int), 4,
                       failure="boom")
    report = make_report(chain)
    assert report.status == "failed" and "boom" in report.notes
