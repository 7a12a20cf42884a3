"""Direction-vector generators for ensemble slice updates.

Every function here sees only the complementary ensemble ``comp`` (the
walkers *not* being updated) and an :class:`RngStream` with one stream per
walker that needs a direction. They return an ``(n, D)`` array of
directions, one per selected stream, in stream order.
"""

import numpy as np

from .mixture import fit_dpgm, default_truncation
from .numerics import (NotPositiveDefiniteError, RngStream, TAG_MIXTURE, cholesky,
                       sample_covariance)

__all__ = [
    "DegenerateEnsembleError",
    "differential_move",
    "gaussian_move",
    "global_move",
    "Move",
    "DifferentialMove",
    "GaussianMove",
    "GlobalMove",
    "make_move",
]


class DegenerateEnsembleError(ValueError):
    def __init__(self, message="degenerate ensemble"):
        super().__init__(message)


def _rows(rng, rows):
    return np.arange(len(rng)) if rows is None else np.asarray(rows, dtype=np.int64)


def _pairs(n_comp, rng, rows):
    """Two distinct uniform indices in ``range(n_comp)`` per stream."""
    first = rng.integers(n_comp, rows)
    second = rng.integers(n_comp - 1, rows)
    second = second + (second >= first)
    return first, second


def _check_comp(comp):
    comp = np.atleast_2d(np.asarray(comp, dtype=float))
    if comp.shape[0] < 2:
        raise DegenerateEnsembleError("degenerate ensemble: need at least 2 walkers")
    return comp


def differential_move(mu, comp, rng, rows=None):
    """``mu * (X_l - X_m)`` for a uniformly drawn distinct pair of ``comp``."""
    comp = _check_comp(comp)
    rows = _rows(rng, rows)
    l, m = _pairs(comp.shape[0], rng, rows)
    eta = mu * (comp[l] - comp[m])
    if not np.all(np.any(eta != 0, axis=1)):
        raise DegenerateEnsembleError()
    return eta


def _jittered_chol(cov, jitter):
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if scale == 0 and not np.any(cov):
        return np.zeros_like(cov)
    if jitter and scale > 0:
        cov = cov + jitter * scale * np.eye(d)
    try:
        return cholesky(cov)
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError("not PD: covariance singular even after jitter") from None


def gaussian_move(mu, comp, rng, rows=None, jitter=1e-9):
    """``2 mu z`` with ``z ~ N(0, C_S)``, ``C_S`` the comp covariance.

    ``jitter`` (relative to the mean variance) is added to the diagonal
    before factorizing.
    """
    comp = _check_comp(comp)
    rows = _rows(rng, rows)
    chol = _jittered_chol(sample_covariance(comp), jitter)
    z = rng.normal(comp.shape[1], rows)
    return 2.0 * mu * (z @ chol.T)


def global_move(mu, comp, fit, rng, rows=None, gamma=0.001, within="pair", jitter=1e-9):
    """Mixture-informed directions that favour jumps between modes.

    Two distinct walkers of ``comp`` are drawn and labelled by ``fit``. If
    they share a component, the direction is ``mu * (X_a - X_b)`` for a pair
    drawn from that component's members (``within="gaussian"`` instead draws
    ``2 mu N(0, C_i)``). Otherwise one point is drawn from each component
    with its covariance shrunk by ``gamma`` and the direction is twice their
    difference, with no ``mu`` factor.

    Returns
    -------
    eta : ndarray, shape (n, D)
    jump : ndarray of bool, shape (n,)
        True where the mode-jump branch was used.
    """
    comp = _check_comp(comp)
    rows = _rows(rng, rows)
    if fit.effective_components == 0:
        raise ValueError("mixture fit has no effective components")
    n, d = len(rows), comp.shape[1]
    labels = np.asarray(fit.assignments)
    a, b = _pairs(comp.shape[0], rng, rows)
    ci, cj = labels[a], labels[b]
    jump = ci != cj
    eta = np.empty((n, d))
    chols = {}

    def chol_of(k, scale):
        key = (int(k), scale)
        if key not in chols:
            chols[key] = _jittered_chol(scale * fit.covariances[k], jitter)
        return chols[key]

    for r in range(n):
        row = rows[r:r + 1]
        if jump[r]:
            zi = rng.normal(d, row)[0]
            zj = rng.normal(d, row)[0]
            eta_i = fit.means[ci[r]] + chol_of(ci[r], gamma) @ zi
            eta_j = fit.means[cj[r]] + chol_of(cj[r], gamma) @ zj
            eta[r] = 2.0 * (eta_i - eta_j)
            continue
        members = np.flatnonzero(labels == ci[r])
        if within == "pair" and members.size >= 2:
            p, q = _pairs(members.size, rng, row)
            eta[r] = mu * (comp[members[p[0]]] - comp[members[q[0]]])
        else:
            z = rng.normal(d, row)[0]
            eta[r] = 2.0 * mu * (chol_of(ci[r], 1.0) @ z)
    if not np.all(np.any(eta != 0, axis=1)):
        raise DegenerateEnsembleError()
    return eta, jump


class Move:
    """Interface used by the ensemble sampler.

    ``prepare`` runs once per half-ensemble phase and returns whatever the
    move wants to share across that phase's walker updates (read-only).
    ``directions`` returns ``(eta, tunes)`` where ``tunes`` flags the
    directions whose scale carries ``mu`` and so should inform tuning.
    """

    name = "move"

    def prepare(self, comp, seed, iteration, phase):
        return None

    def directions(self, mu, comp, rng, rows, context):
        raise NotImplementedError


class DifferentialMove(Move):
    name = "differential"

    def directions(self, mu, comp, rng, rows, context):
        eta = differential_move(mu, comp, rng, rows)
        return eta, np.ones(len(eta), dtype=bool)


class GaussianMove(Move):
    name = "gaussian"

    def __init__(self, jitter=1e-9):
        self.jitter = jitter

    def directions(self, mu, comp, rng, rows, context):
        eta = gaussian_move(mu, comp, rng, rows, jitter=self.jitter)
        return eta, np.ones(len(eta), dtype=bool)


class GlobalMove(Move):
    name = "global"

    def __init__(self, gamma=0.001, max_components=None, within="pair", jitter=1e-9):
        if within not in ("pair", "gaussian"):
            raise ValueError("within must be 'pair' or 'gaussian'")
        self.gamma = gamma
        self.max_components = max_components
        self.within = within
        self.jitter = jitter
        self.last_fit = None

    def prepare(self, comp, seed, iteration, phase):
        k = self.max_components or default_truncation(2 * len(comp))
        rng = RngStream(seed, iteration, [phase], tag=TAG_MIXTURE)
        fit = fit_dpgm(comp, k, rng)
        self.last_fit = fit
        return fit

    def directions(self, mu, comp, rng, rows, context):
        eta, jump = global_move(mu, comp, context, rng, rows, gamma=self.gamma,
                                within=self.within, jitter=self.jitter)
        return eta, ~jump


MOVES = {"differential": DifferentialMove, "gaussian": GaussianMove, "global": GlobalMove}


def make_move(move, **kwargs):
    if isinstance(move, Move):
        return move
    try:
        cls = MOVES[move]
    except KeyError:
        raise ValueError(f"unknown move {move!r}; choose from {sorted(MOVES)}") from None
    if cls is GlobalMove:
        return cls(**kwargs)
    return cls()
