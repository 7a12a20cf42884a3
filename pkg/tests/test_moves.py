import numpy as np
import pytest

from ensemble_slice.mixture import MixtureFit, fit_dpgm
from ensemble_slice.moves import (DegenerateEnsembleError, GlobalMove, differential_move,
                                  gaussian_move, global_move, make_move)
from ensemble_slice.numerics import RngStream, sample_covariance


def _fit(means, covs, labels):
    k = len(means)
    w = np.bincount(labels, minlength=k) / len(labels)
    return MixtureFit(weights=w, means=np.asarray(means, float), covariances=np.asarray(covs, float),
                      assignments=np.asarray(labels), effective=w > 0, n_sweeps=1,
                      converged=True, elbo_trace=np.array([0.0]))


def test_differential_examples():
    comp = np.array([[1.0, 0.0], [0.0, 1.0]])
    eta = differential_move(1.0, comp, RngStream(3))
    assert tuple(eta[0]) in {(1.0, -1.0), (-1.0, 1.0)}
    half = differential_move(0.5, comp, RngStream(3))
    assert np.array_equal(half, 0.5 * eta)


def test_differential_identical_walkers_is_degenerate():
    with pytest.raises(DegenerateEnsembleError, match="degenerate ensemble"):
        differential_move(1.0, np.ones((2, 3)), RngStream(0))
    with pytest.raises(DegenerateEnsembleError):
        differential_move(1.0, np.ones((1, 3)), RngStream(0))


def test_differential_pairs_are_distinct_and_uniform():
    comp = np.eye(4)
    eta = differential_move(1.0, comp, RngStream(1, 0, 60000))
    l = np.argmax(eta, axis=1)
    m = np.argmin(eta, axis=1)
    assert np.all(l != m)
    pairs = np.bincount(4 * l + m, minlength=16).reshape(4, 4)
    off = pairs[~np.eye(4, dtype=bool)] / len(eta)
    assert np.all(np.abs(off - 1 / 12) < 0.006)


def test_differential_scale_matches_twice_the_trace():
    rng = RngStream(2, 0, 400)
    cov = np.diag([1.0, 4.0, 0.25])
    comp = rng.normal(3) @ np.sqrt(cov)
    cs = sample_covariance(comp)
    eta = differential_move(0.7, comp, RngStream(5, 0, 200000))
    # pairs drawn without replacement: E|X_l - X_m|^2 = 2 n/(n-1) tr(C_S)
    expected = 2 * 0.7**2 * np.trace(cs) * 400 / 399
    assert np.mean(np.sum(eta**2, axis=1)) == pytest.approx(expected, rel=0.05)


def test_differential_affine_equivariance():
    rng = RngStream(4, 0, 10)
    comp = rng.normal(3)
    a = np.array([[2.0, 0.3, 0.0], [0.1, 1.0, -0.5], [0.0, 0.2, 3.0]])
    b = np.array([1.0, -2.0, 0.5])
    eta = differential_move(0.8, comp, RngStream(9, 0, 50))
    mapped = differential_move(0.8, comp @ a.T + b, RngStream(9, 0, 50))
    assert np.allclose(mapped, eta @ a.T, rtol=1e-12, atol=1e-12)


def test_gaussian_covariance_is_four_mu_squared_c():
    comp = RngStream(6, 0, 5000).normal(2)
    cs = sample_covariance(comp)
    eta = gaussian_move(1.0, comp, RngStream(7, 0, 100000))
    emp = np.cov(eta.T, bias=True)
    assert np.allclose(emp, 4 * cs, atol=0.05 * 4)
    assert np.allclose(emp, 4 * np.eye(2), atol=0.05 * 4 * 1.5)


def test_gaussian_affine_equivariance_in_distribution():
    comp = RngStream(6, 0, 50).normal(2)
    a = np.array([[3.0, 1.0], [0.0, 0.5]])
    eta = gaussian_move(0.6, comp @ a.T + 1.0, RngStream(8, 0, 100000))
    expected = a @ (4 * 0.36 * sample_covariance(comp)) @ a.T
    assert np.allclose(np.cov(eta.T, bias=True), expected, rtol=0.05,
                       atol=0.05 * np.abs(expected).max())


def test_gaussian_collinear_ensemble_stays_near_the_line():
    t = np.linspace(-1, 1, 20)
    comp = np.stack([t, t], axis=1)
    eta = gaussian_move(1.0, comp, RngStream(1, 0, 2000), jitter=1e-6)
    along = np.abs(eta @ np.array([1, 1]) / np.sqrt(2))
    off = np.abs(eta @ np.array([1, -1]) / np.sqrt(2))
    assert off.max() < 1e-2
    assert 1e-4 < np.median(off) < 1e-2
    assert np.median(along) > 100 * np.median(off)


def test_gaussian_deterministic():
    comp = RngStream(0, 0, 8).normal(3)
    assert np.array_equal(gaussian_move(1.0, comp, RngStream(5, 1, 4)),
                          gaussian_move(1.0, comp, RngStream(5, 1, 4)))


def test_global_jump_with_zero_gamma_is_twice_the_mean_gap():
    comp = np.array([[-0.5, -0.5], [-0.4, -0.6], [0.5, 0.5], [0.6, 0.4]])
    means = [[-0.5, -0.5], [0.5, 0.5]]
    fit = _fit(means, [np.eye(2) * 0.01] * 2, [0, 0, 1, 1])
    eta, jump = global_move(1.0, comp, fit, RngStream(3, 0, 400), gamma=0.0)
    assert jump.any() and (~jump).any()
    gap = 2 * (np.array(means[0]) - np.array(means[1]))
    for e in eta[jump]:
        assert np.array_equal(e, gap) or np.array_equal(e, -gap)


def test_global_single_component_is_a_pair_difference():
    comp = RngStream(2, 0, 6).normal(2)
    fit = _fit([comp.mean(0)], [sample_covariance(comp)], [0] * 6)
    eta, jump = global_move(0.5, comp, fit, RngStream(4, 0, 200))
    assert not jump.any()
    diffs = {tuple(np.round(0.5 * (comp[i] - comp[j]), 12))
             for i in range(6) for j in range(6) if i != j}
    assert all(tuple(np.round(e, 12)) in diffs for e in eta)


def test_global_jump_fraction_matches_pair_combinatorics():
    rng = RngStream(11, 0, 60)
    labels = np.repeat([0, 1], [20, 40])
    comp = np.where(labels[:, None] == 1, 0.5, -0.5) + 0.1 * rng.normal(10)
    fit = fit_dpgm(comp, rng=RngStream(1, 0, 1))
    assert fit.effective_components == 2
    _, jump = global_move(1.0, comp, fit, RngStream(12, 0, 40000))
    n1 = np.sum(labels == 0)
    n = len(labels)
    expected = 2 * n1 * (n - n1) / (n * (n - 1))
    assert abs(jump.mean() - expected) < 0.01
    assert abs(jump.mean() - 4 / 9) < 0.06


def test_global_needs_effective_components():
    comp = RngStream(2, 0, 6).normal(2)
    fit = _fit([comp.mean(0)], [np.eye(2)], [0] * 6)
    fit.effective = np.array([False])
    with pytest.raises(ValueError):
        global_move(1.0, comp, fit, RngStream(0))


def test_move_objects_report_tuning_flags():
    comp = RngStream(2, 0, 20).normal(2)
    comp[10:] += 30
    move = make_move("global")
    ctx = move.prepare(comp, seed=0, iteration=0, phase=0)
    assert isinstance(move, GlobalMove) and move.last_fit is ctx
    eta, tunes = move.directions(1.0, comp, RngStream(1, 0, 500), None, ctx)
    assert eta.shape == (500, 2)
    assert 0 < tunes.mean() < 1
    eta, tunes = make_move("differential").directions(1.0, comp, RngStream(1, 0, 5), None, None)
    assert tunes.all()
    with pytest.raises(ValueError):
        make_move("kde")
