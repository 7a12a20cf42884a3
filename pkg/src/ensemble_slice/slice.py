"""Univariate slice updates along a direction vector.

The interval is parameterized in units of the direction ``eta`` (the length
scale is already folded into ``eta``): the proposal for coefficient ``s`` is
``x0 + s * eta``. Each walker consumes its uniform stream in a fixed order:
slice height, interval offset, then one draw per shrinking proposal.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SliceError",
    "UnboundedSliceError",
    "InvalidStateError",
    "SliceUpdateResult",
    "BatchSliceResult",
    "slice_along",
    "slice_batch",
    "MAX_EXPANSIONS",
    "MAX_CONTRACTIONS",
]

MAX_EXPANSIONS = 10_000
MAX_CONTRACTIONS = 10_000


class SliceError(RuntimeError):
    pass


class UnboundedSliceError(SliceError):
    def __init__(self, message="unbounded slice", rows=None):
        super().__init__(message)
        self.rows = rows


class InvalidStateError(SliceError):
    def __init__(self, message="invalid current state", rows=None):
        super().__init__(message)
        self.rows = rows


@dataclass
class SliceUpdateResult:
    new_point: np.ndarray
    log_prob: float
    coefficient: float
    n_expansions: int
    n_contractions: int
    n_evaluations: int
    slice_height: float


def _eval_one(log_prob, x):
    return float(np.atleast_1d(log_prob(np.atleast_2d(x)))[0])


def slice_along(log_prob, x0, logf_x0, eta, rng, row=0, max_expansions=MAX_EXPANSIONS):
    """One stepping-out and shrinking update of ``x0`` along ``eta``.

    Parameters
    ----------
    log_prob : callable
        Batched log-density, ``(n, D) -> (n,)``.
    x0 : array_like, shape (D,)
    logf_x0 : float
        ``log_prob(x0)``.
    eta : array_like, shape (D,)
        Direction vector including its scale.
    rng : RngStream (or any object with ``uniform(rows=...)``)
    row : int
        Which stream of ``rng`` this update consumes.
    max_expansions : int
        Total stepping-out budget (both ends) before giving up.
    """
    x0 = np.asarray(x0, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if not np.isfinite(logf_x0):
        raise InvalidStateError()
    if not np.any(eta):
        raise ValueError("zero direction vector")
    rows = [row]
    height = logf_x0 + np.log(rng.uniform(rows=rows)[0])
    left = -rng.uniform(rows=rows)[0]
    right = left + 1.0
    n_exp = n_con = 0

    n_eval = 1
    while _eval_one(log_prob, x0 + left * eta) > height:
        left -= 1.0
        n_exp += 1
        n_eval += 1
        if n_exp > max_expansions:
            raise UnboundedSliceError()
    n_eval += 1
    while _eval_one(log_prob, x0 + right * eta) > height:
        right += 1.0
        n_exp += 1
        n_eval += 1
        if n_exp > max_expansions:
            raise UnboundedSliceError()

    while True:
        s = left + (right - left) * rng.uniform(rows=rows)[0]
        x1 = x0 + s * eta
        logf1 = _eval_one(log_prob, x1)
        n_eval += 1
        if logf1 > height:
            break
        if s < 0:
            left = s
        else:
            right = s
        n_con += 1
        if n_con > MAX_CONTRACTIONS:
            raise SliceError("shrinking did not terminate")
    return SliceUpdateResult(x1, logf1, s, n_exp, n_con, n_eval, height)


@dataclass
class BatchSliceResult:
    new_points: np.ndarray
    log_prob: np.ndarray
    coefficients: np.ndarray
    n_expansions: np.ndarray
    n_contractions: np.ndarray
    n_evaluations: np.ndarray


def slice_batch(log_prob, x0, logf_x0, eta, rng, rows=None, max_expansions=MAX_EXPANSIONS):
    """Lockstep version of :func:`slice_along` for ``n`` independent walkers.

    Walker ``i`` draws from stream ``rows[i]`` in exactly the order
    :func:`slice_along` does, so the outcome for each walker is identical
    to calling :func:`slice_along` on it alone. Both interval ends step out
    in the same round, which keeps the evaluation batches large.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    logf_x0 = np.asarray(logf_x0, dtype=float)
    n = x0.shape[0]
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    bad = np.flatnonzero(~np.isfinite(logf_x0))
    if bad.size:
        raise InvalidStateError(rows=bad)
    if not np.all(np.any(eta != 0, axis=1)):
        raise ValueError("zero direction vector")

    height = logf_x0 + np.log(rng.uniform(rows=rows))
    left = -rng.uniform(rows=rows)
    # ends[:n] are the left ends, ends[n:] the right ends; both step out together
    ends = np.concatenate([left, left + 1.0])
    steps = np.repeat([-1.0, 1.0], n)
    walker = np.tile(np.arange(n), 2)
    grown = np.zeros(2 * n, dtype=np.int64)
    growing = np.arange(2 * n)
    rounds = 0
    while growing.size:
        w = walker[growing]
        vals = log_prob(x0[w] + ends[growing, None] * eta[w])
        out = growing[vals > height[w]]
        ends[out] += steps[out]
        grown[out] += 1
        growing = out
        rounds += 1
        if 2 * rounds > max_expansions:
            over = np.flatnonzero(grown[:n] + grown[n:] > max_expansions)
            if over.size:
                raise UnboundedSliceError(rows=over)
    n_exp = grown[:n] + grown[n:]
    left, right = ends[:n], ends[n:]

    x1 = np.empty_like(x0)
    logf1 = np.empty(n)
    coef = np.empty(n)
    n_con = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        la = left[active]
        s = la + (right[active] - la) * rng.uniform(rows=rows[active])
        pts = x0[active] + s[:, None] * eta[active]
        vals = log_prob(pts)
        ok = vals > height[active]
        done = active[ok]
        x1[done] = pts[ok]
        logf1[done] = vals[ok]
        coef[done] = s[ok]
        miss_mask = ~ok
        active = active[miss_mask]
        if active.size:
            sm = s[miss_mask]
            neg = sm < 0
            left[active[neg]] = sm[neg]
            right[active[~neg]] = sm[~neg]
            n_con[active] += 1
            if n_con[active[0]] > MAX_CONTRACTIONS:
                raise SliceError("shrinking did not terminate")
    n_eval = n_exp + n_con + 3
    return BatchSliceResult(x1, logf1, coef, n_exp, n_con, n_eval)
