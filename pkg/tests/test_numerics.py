import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemble_slice.numerics import (NotPositiveDefiniteError, RngStream, TAG_INIT, cholesky,
                                     philox4x32, sample_covariance, sample_mvn)


# Random123 known-answer vectors for philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF),
     (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(ctr, key, expected):
    out = philox4x32(np.array(ctr, dtype=np.uint64)[:, None], key)
    assert tuple(int(v) for v in out[:, 0]) == expected


def test_stream_is_reproducible():
    a = RngStream(42, 7, 5).uniform(10)
    b = RngStream(42, 7, 5).uniform(10)
    assert np.array_equal(a, b)


def test_draws_do_not_depend_on_other_streams_or_order():
    full = RngStream(3, 11, 6)
    ref = full.uniform(20)
    rng = RngStream(3, 11, 6)
    # draw walker 4 first, then the others in reverse, in uneven pieces
    w4 = np.concatenate([rng.uniform(7, rows=[4])[0], rng.uniform(13, rows=[4])[0]])
    rest = rng.uniform(20, rows=[5, 3, 2, 1, 0])
    assert np.array_equal(w4, ref[4])
    assert np.array_equal(rest, ref[[5, 3, 2, 1, 0]])


def test_walker_subset_matches_full_ensemble():
    sub = RngStream(9, 2, walkers=[10, 11]).uniform(4)
    full = RngStream(9, 2, walkers=20).uniform(4)
    assert np.array_equal(sub, full[10:12])


def test_subset_continues_where_the_parent_stands():
    ref = RngStream(4, 1, 5).uniform(30)
    rng = RngStream(4, 1, 5)
    rng.uniform(3, rows=[1, 3])
    sub = rng.subset([3, 1])
    assert np.array_equal(sub.uniform(20), ref[[3, 1], 3:23])
    # the parent is left untouched
    assert np.array_equal(rng.uniform(2, rows=[1]), ref[[1], 3:5])


def test_keys_change_the_stream():
    base = RngStream(1, 0, 1).uniform(8)
    assert not np.array_equal(base, RngStream(2, 0, 1).uniform(8))
    assert not np.array_equal(base, RngStream(1, 1, 1).uniform(8))
    assert not np.array_equal(base, RngStream(1, 0, 1, tag=TAG_INIT).uniform(8))
    assert not np.array_equal(base, RngStream(1, 0, [1]).uniform(8))


def test_uniform_equidistribution_smoke():
    u = RngStream(5, 0, 200).uniform(500).ravel()
    assert np.all((u > 0) & (u < 1))
    counts = np.histogram(u, bins=10, range=(0, 1))[0]
    expected = u.size / 10
    chi2 = np.sum((counts - expected) ** 2 / expected)
    assert chi2 < 30  # 9 dof, p ~ 4e-4


def test_normal_moments():
    z = RngStream(8, 0, 100).normal(1000).ravel()
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.02
    assert abs(np.mean(z**3)) < 0.03


def test_integers_range_and_uniformity():
    rng = RngStream(4, 0, 20000)
    k = rng.integers(5)
    assert k.min() == 0 and k.max() == 4
    assert np.all(np.abs(np.bincount(k) / k.size - 0.2) < 0.015)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40), st.integers(1, 8))
@settings(max_examples=40, deadline=None)
def test_stream_draws_are_pure_functions_of_the_key(seed, iteration, n):
    a = RngStream(seed, iteration, n)
    b = RngStream(seed, iteration, n)
    first = a.uniform(3)
    # interleave in a different pattern on b
    parts = [b.uniform(1), b.uniform(2)]
    assert np.array_equal(first, np.hstack(parts))
    assert np.all((first > 0) & (first < 1))


def test_sample_covariance_examples():
    pts = np.array([[0, 0], [2, 0], [0, 2], [2, 2]], dtype=float)
    assert np.array_equal(sample_covariance(pts), np.eye(2))
    assert np.array_equal(sample_covariance(np.full((5, 2), 3.0)), np.zeros((2, 2)))
    assert np.array_equal(sample_covariance([[0.0], [2.0]]), [[1.0]])


def test_sample_covariance_needs_two_points():
    with pytest.raises(ValueError, match="degenerate ensemble"):
        sample_covariance([[1.0, 2.0]])


@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 1000),
       st.floats(-100, 100))
@settings(max_examples=50, deadline=None)
def test_sample_covariance_symmetric_and_translation_invariant(n, d, seed, shift):
    x = RngStream(seed, 0, n).normal(d)
    c = sample_covariance(x)
    assert np.array_equal(c, c.T)
    c2 = sample_covariance(x + shift)
    assert np.allclose(c, c2, atol=1e-12 * max(1.0, shift**2), rtol=1e-9)


def test_cholesky_examples():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))
    assert np.array_equal(cholesky([[4.0, 0.0], [0.0, 9.0]]), [[2.0, 0.0], [0.0, 3.0]])
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    chol = cholesky(m)
    assert np.allclose(chol @ chol.T, m, atol=1e-12, rtol=0)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError, match="not PD"):
        cholesky([[1.0, 2.0], [2.0, 1.0]])


@given(st.integers(1, 8), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_cholesky_round_trip(d, seed):
    a = RngStream(seed, 0, d).normal(d)
    m = a @ a.T + np.eye(d)
    chol = cholesky(m)
    assert np.all(np.diag(chol) > 0)
    err = np.max(np.abs(chol @ chol.T - m)) / np.max(np.abs(m))
    assert err <= 1e-10


def test_sample_mvn_zero_covariance_returns_mean():
    mean = np.array([1.5, -2.0])
    out = sample_mvn(mean, np.zeros((2, 2)), RngStream(0, 0, 3))
    assert np.array_equal(out, np.tile(mean, (3, 1)))


def test_sample_mvn_covariance_and_determinism():
    cov = np.eye(2)
    x = sample_mvn(np.zeros(2), cov, RngStream(12, 0, 100000))
    assert np.all(np.abs(np.cov(x.T, bias=True) - cov) < 0.05)
    again = sample_mvn(np.zeros(2), cov, RngStream(12, 0, 100000))
    assert np.array_equal(x, again)
