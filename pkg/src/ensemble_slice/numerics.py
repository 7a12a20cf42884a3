"""Counter-based random streams and small dense linear algebra.

Every random draw in the package is a pure function of
``(seed, tag, iteration, walker, counter)``: the Philox4x32-10 block cipher
maps that key to 128 random bits. Walker updates therefore never share a
generator state, and the order in which they run (or the number of threads
running them) cannot change the result.
"""

import numpy as np

__all__ = [
    "philox4x32",
    "RngStream",
    "NotPositiveDefiniteError",
    "sample_covariance",
    "cholesky",
    "sample_mvn",
]

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_TWO_M53 = 2.0**-53

# stream tags keep independent purposes on disjoint counter spaces
TAG_WALKER = 0
TAG_MIXTURE = 1
TAG_INIT = 2
TAG_BASELINE = 3
TAG_TUNING = 4


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function.

    Parameters
    ----------
    counter : array_like of shape (4, m)
        Four 32-bit counter words per block.
    key : sequence of two ints
        The 64-bit key as two 32-bit words.

    Returns
    -------
    ndarray of shape (4, m), dtype uint64 holding 32-bit words.
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = c[0], c[1], c[2], c[3]
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
    return np.stack([c0, c1, c2, c3])


def _split_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed & 0xFFFFFFFF, seed >> 32


class RngStream:
    """A bundle of independent counter-based uniform streams.

    One stream per entry of ``walkers``; stream ``k`` yields the uniform
    sequence keyed by ``(seed, tag, iteration, walkers[k], 0, 1, 2, ...)``.
    Draw methods take ``rows`` (indices into ``walkers``) so that a subset of
    streams can be advanced while the rest stay put. Draws are generated in
    buffered chunks, but a stream's values depend only on its key, never on
    the chunking or on which other streams were advanced.

    Parameters
    ----------
    seed : int
        Master seed, 0 <= seed < 2**64.
    iteration : int
        Iteration (or other outer) index.
    walkers : int or array_like of int
        Walker indices; an int ``n`` means ``range(n)``.
    tag : int
        Purpose tag separating e.g. walker updates from mixture fitting.
    """

    _CHUNK_BLOCKS = 8

    def __init__(self, seed, iteration=0, walkers=1, tag=TAG_WALKER):
        self.seed = int(seed)
        self.iteration = int(iteration)
        self.tag = int(tag)
        if np.ndim(walkers) == 0:
            walkers = np.arange(int(walkers))
        self.walkers = np.asarray(walkers, dtype=np.int64)
        if self.walkers.ndim != 1:
            raise ValueError("walkers must be one-dimensional")
        self._key = _split_seed(seed)
        n = len(self.walkers)
        self._buffer = np.empty((n, 0))
        self._pos = np.zeros(n, dtype=np.int64)

    def __len__(self):
        return len(self.walkers)

    @property
    def draws(self):
        """Number of uniforms consumed so far by each stream."""
        return self._pos.copy()

    def subset(self, rows):
        """An independent stream object for ``rows``, positioned where they are."""
        rows = self._rows(rows)
        sub = RngStream.__new__(RngStream)
        sub.seed, sub.iteration, sub.tag, sub._key = self.seed, self.iteration, self.tag, self._key
        sub.walkers = self.walkers[rows]
        sub._buffer = self._buffer[rows].copy()
        sub._pos = self._pos[rows].copy()
        return sub

    def _blocks(self, first_block, n_blocks):
        n = len(self.walkers)
        ctr = np.empty((4, n, n_blocks), dtype=np.uint64)
        ctr[0] = np.arange(first_block, first_block + n_blocks, dtype=np.uint64)[None, :]
        ctr[1] = self.walkers.astype(np.uint64)[:, None] & _MASK32
        ctr[2] = np.uint64(self.iteration & 0xFFFFFFFF)
        ctr[3] = np.uint64(((self.iteration >> 32) << 8 | self.tag) & 0xFFFFFFFF)
        out = philox4x32(ctr.reshape(4, -1), self._key).reshape(4, n, n_blocks)
        a = ((out[0] << _SHIFT32) | out[1]) >> _SHIFT11
        b = ((out[2] << _SHIFT32) | out[3]) >> _SHIFT11
        u = np.empty((n, 2 * n_blocks))
        u[:, 0::2] = (a.astype(np.float64) + 0.5) * _TWO_M53
        u[:, 1::2] = (b.astype(np.float64) + 0.5) * _TWO_M53
        return u

    def _ensure(self, need):
        have = self._buffer.shape[1]
        if need <= have:
            return
        blocks = max(self._CHUNK_BLOCKS, (need - have + 1) // 2)
        self._buffer = np.hstack([self._buffer, self._blocks(have // 2, blocks)])

    def _rows(self, rows):
        if rows is None:
            return np.arange(len(self.walkers))
        return np.asarray(rows, dtype=np.int64)

    def uniform(self, size=None, rows=None):
        """Uniform draws on the open interval (0, 1).

        Returns shape ``(len(rows),)`` when ``size`` is None, otherwise
        ``(len(rows), size)``.
        """
        rows = self._rows(rows)
        k = 1 if size is None else int(size)
        if len(rows) == 0:
            return np.empty((0,) if size is None else (0, k))
        start = self._pos[rows]
        self._ensure(int(start.max()) + k)
        if size is None:
            out = self._buffer[rows, start]
            self._pos[rows] = start + 1
            return out
        idx = start[:, None] + np.arange(k)[None, :]
        out = self._buffer[rows[:, None], idx]
        self._pos[rows] += k
        return out[:, 0] if size is None else out

    def normal(self, size=None, rows=None):
        """Standard normal draws by the Box-Muller transform."""
        k = 1 if size is None else int(size)
        pairs = (k + 1) // 2
        u = self.uniform(2 * pairs, rows)
        radius = np.sqrt(-2.0 * np.log(u[:, 0::2]))
        angle = 2.0 * np.pi * u[:, 1::2]
        z = np.empty((u.shape[0], 2 * pairs))
        z[:, 0::2] = radius * np.cos(angle)
        z[:, 1::2] = radius * np.sin(angle)
        z = z[:, :k]
        return z[:, 0] if size is None else z

    def integers(self, high, rows=None):
        """Uniform integers in ``[0, high)``; ``high`` may be per-row."""
        u = self.uniform(rows=rows)
        high = np.asarray(high)
        return np.minimum((u * high).astype(np.int64), high - 1)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def sample_covariance(points):
    """Covariance of a point cloud with 1/|S| normalization (no Bessel)."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("degenerate ensemble: need at least 2 points")
    d = x - x.mean(axis=0)
    c = d.T @ d / x.shape[0]
    # exact symmetry
    return 0.5 * (c + c.T)


def cholesky(m):
    """Lower Cholesky factor; raises NotPositiveDefiniteError if m is not PD."""
    m = np.asarray(m, dtype=float)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("not PD") from exc


def sample_mvn(mean, cov, rng, rows=None, jitter=0.0):
    """Draw ``mean + L z`` for each selected stream of ``rng``.

    ``jitter`` is added to the diagonal before factorizing. A zero covariance
    with zero jitter is allowed and returns ``mean`` exactly.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    dim = mean.shape[-1]
    z = rng.normal(dim, rows)
    if jitter:
        cov = cov + jitter * np.eye(dim)
    if not np.any(cov):
        return np.broadcast_to(mean, z.shape).copy()
    chol = cholesky(cov)
    return mean + z @ chol.T
