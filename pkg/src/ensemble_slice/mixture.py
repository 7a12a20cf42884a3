"""Variational Dirichlet-process Gaussian mixture.

Truncated stick-breaking prior on the weights, Normal-Wishart prior on each
component, fitted by coordinate-ascent variational inference. The fit is
used by the global move to locate the modes traced out by the walkers.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import digamma, gammaln

from .numerics import RngStream, TAG_MIXTURE, sample_covariance

__all__ = ["MixtureFit", "fit_dpgm", "default_truncation"]


@dataclass
class MixtureFit:
    """Posterior summary of a fitted mixture.

    ``weights`` are the expected fractions of the points each component
    explains. ``covariances`` are posterior expected covariances
    (inverse-Wishart means). ``assignments`` holds the responsibility argmax
    per input point. ``effective`` marks components whose weight exceeds
    ``2 / n_points``, i.e. that explain at least two points.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    assignments: np.ndarray
    effective: np.ndarray
    n_sweeps: int
    converged: bool
    elbo_trace: np.ndarray

    @property
    def n_components_max(self):
        return len(self.weights)

    @property
    def effective_components(self):
        return int(np.sum(self.effective))

    def members(self, component):
        return np.flatnonzero(self.assignments == component)


def default_truncation(n_walkers):
    return max(1, min(10, n_walkers // 4))


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = [int(rng.integers(n)[0])]
    d2 = np.sum((x - x[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        u = rng.uniform()[0]
        if total <= 0:
            idx = int(min(u * n, n - 1))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), u * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[centers]


class _Prior:
    def __init__(self, x, concentration, mean_precision, dof):
        n, d = x.shape
        self.alpha = float(concentration)
        self.beta0 = float(mean_precision)
        self.nu0 = float(d + 2 if dof is None else dof)
        self.m0 = x.mean(axis=0)
        cov = sample_covariance(x) if n > 1 else np.eye(d)
        scale = np.trace(cov) / d
        if not scale > 0:
            scale = 1.0
        # keeps the scale matrix invertible when n <= d or points coincide
        self.winv0 = cov + 1e-6 * scale * np.eye(d)
        self.logdet_winv0 = np.linalg.slogdet(self.winv0)[1]


def _log_wishart_norm(logdet_w, nu, d):
    """log B(W, nu) for the Wishart normalizer."""
    i = np.arange(1, d + 1)
    return (-0.5 * nu * logdet_w
            - (0.5 * nu * d * math.log(2.0) + 0.25 * d * (d - 1) * math.log(math.pi)
               + np.sum(gammaln(0.5 * (np.atleast_1d(nu)[:, None] + 1 - i)), axis=-1)))


class _Params:
    """Variational parameters for q(v) q(mu, Lambda) given responsibilities."""

    def __init__(self, x, resp, prior):
        n, d = x.shape
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        xbar = resp.T @ x / nk[:, None]
        diff = x[None, :, :] - xbar[:, None, :]
        sk = np.matmul(np.swapaxes(diff * resp.T[:, :, None], 1, 2), diff) / nk[:, None, None]
        self.nk, self.xbar, self.sk = nk, xbar, sk

        self.gamma1 = 1.0 + nk
        tail = np.concatenate([np.cumsum(nk[::-1])[::-1][1:], [0.0]])
        self.gamma2 = prior.alpha + tail

        self.beta = prior.beta0 + nk
        self.m = (prior.beta0 * prior.m0 + nk[:, None] * xbar) / self.beta[:, None]
        dm = xbar - prior.m0
        winv = (prior.winv0[None] + nk[:, None, None] * sk
                + (prior.beta0 * nk / self.beta)[:, None, None] * (dm[:, :, None] * dm[:, None, :]))
        self.winv = 0.5 * (winv + np.swapaxes(winv, 1, 2))
        self.nu = prior.nu0 + nk
        self.chol_winv = np.linalg.cholesky(self.winv)
        # W_k = L^-T L^-1 with L the Cholesky factor of W_k^-1
        self.inv_chol = np.linalg.inv(self.chol_winv)
        self.w = np.matmul(np.swapaxes(self.inv_chol, 1, 2), self.inv_chol)
        self.logdet_w = -2.0 * np.sum(np.log(np.diagonal(self.chol_winv, axis1=1, axis2=2)), axis=1)

        i = np.arange(1, d + 1)
        self.e_logdet = (np.sum(digamma(0.5 * (self.nu[:, None] + 1 - i)), axis=1)
                         + d * math.log(2.0) + self.logdet_w)
        dg = digamma(self.gamma1 + self.gamma2)
        self.e_log_v = digamma(self.gamma1) - dg
        self.e_log_1mv = digamma(self.gamma2) - dg
        self.e_log_pi = self.e_log_v + np.concatenate([[0.0], np.cumsum(self.e_log_1mv)[:-1]])

    def mahalanobis(self, y):
        """``(y_k - m_k)^T W_k (y_k - m_k)`` for y of shape (k, n, d)."""
        diff = y - self.m[:, None, :]
        sol = np.matmul(self.inv_chol, np.swapaxes(diff, 1, 2))
        return np.sum(sol * sol, axis=1)

    def log_rho(self, x):
        d = x.shape[1]
        maha = self.mahalanobis(np.broadcast_to(x, (len(self.nk),) + x.shape))
        e_quad = d / self.beta[:, None] + self.nu[:, None] * maha
        log_rho = (self.e_log_pi[:, None] + 0.5 * self.e_logdet[:, None]
                   - 0.5 * d * math.log(2 * math.pi) - 0.5 * e_quad)
        return log_rho.T

    def trace_w(self, a):
        """``Tr(A_k W_k)`` for a stack of symmetric A."""
        return np.sum(a * self.w, axis=(1, 2))


def _elbo(x, resp, p, prior):
    n, d = x.shape
    k = len(p.nk)
    log2pi = math.log(2 * math.pi)

    # E[log p(X | Z, mu, Lambda)]
    maha_xbar = p.mahalanobis(p.xbar[:, None, :])[:, 0]
    ell = 0.5 * np.sum(p.nk * (p.e_logdet - d / p.beta - p.nu * p.trace_w(p.sk)
                               - p.nu * maha_xbar - d * log2pi))
    # E[log p(Z | v)] - E[log q(Z)]
    safe = np.where(resp > 0, resp, 1.0)
    ell += np.sum(resp * p.e_log_pi[None, :]) - np.sum(resp * np.log(safe))
    # E[log p(v)] - E[log q(v)]
    ell += np.sum(math.log(prior.alpha) + (prior.alpha - 1.0) * p.e_log_1mv)
    log_beta_fn = gammaln(p.gamma1) + gammaln(p.gamma2) - gammaln(p.gamma1 + p.gamma2)
    ell -= np.sum((p.gamma1 - 1) * p.e_log_v + (p.gamma2 - 1) * p.e_log_1mv - log_beta_fn)
    # E[log p(mu, Lambda)]
    maha_m0 = p.mahalanobis(np.broadcast_to(prior.m0, (k, 1, d)))[:, 0]
    log_b0 = _log_wishart_norm(-prior.logdet_winv0, np.array([prior.nu0]), d)[0]
    ell += 0.5 * np.sum(d * math.log(prior.beta0 / (2 * math.pi)) + p.e_logdet
                        - d * prior.beta0 / p.beta - prior.beta0 * p.nu * maha_m0)
    ell += k * log_b0 + 0.5 * (prior.nu0 - d - 1) * np.sum(p.e_logdet)
    ell -= 0.5 * np.sum(p.nu * p.trace_w(np.broadcast_to(prior.winv0, (k, d, d))))
    # - E[log q(mu, Lambda)]
    log_b = _log_wishart_norm(p.logdet_w, p.nu, d)
    entropy_w = -log_b - 0.5 * (p.nu - d - 1) * p.e_logdet + 0.5 * p.nu * d
    ell -= np.sum(0.5 * p.e_logdet + 0.5 * d * np.log(p.beta / (2 * math.pi)) - 0.5 * d - entropy_w)
    return float(ell)


def _seed_counts(k):
    """Numbers of k-means++ seeds tried, ascending: 1, 2, ... halving steps ..., k."""
    counts = [k]
    while counts[-1] > 1:
        counts.append((counts[-1] + 1) // 2 if counts[-1] > 2 else 1)
    return counts[::-1]


def _ascend(x, k, centers, prior, tol, max_sweeps):
    n = x.shape[0]
    nearest = np.argmin(np.sum((x[:, None, :] - centers[None]) ** 2, axis=2), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), nearest] = 1.0
    trace = []
    converged = False
    sweeps = 0
    params = _Params(x, resp, prior)
    for sweeps in range(1, max_sweeps + 1):
        log_rho = params.log_rho(x)
        resp = np.exp(log_rho - log_rho.max(axis=1, keepdims=True))
        resp /= resp.sum(axis=1, keepdims=True)
        params = _Params(x, resp, prior)
        trace.append(_elbo(x, resp, params, prior) / n)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    return params, trace, resp, sweeps, converged


def fit_dpgm(points, max_components=None, rng=None, *, seed=0, concentration=1.0,
             mean_precision=0.1, dof=None, tol=1e-4, max_sweeps=200, weight_threshold=None,
             restarts=True):
    """Fit a truncated Dirichlet-process Gaussian mixture by variational inference.

    Parameters
    ----------
    points : array_like, shape (n, D)
    max_components : int, optional
        Truncation level; defaults to ``default_truncation(2 * n)``.
    rng : RngStream, optional
        Single-stream generator for the k-means++ initialization. When
        omitted one is derived from ``seed``.
    tol : float
        Stop once the per-point evidence lower bound improves by less.
    max_sweeps : int
        Hard cap on coordinate-ascent sweeps; hitting it sets
        ``converged=False`` rather than raising.
    restarts : bool
        Coordinate ascent easily stalls in an over-split solution when it
        starts from one seed per component. With ``restarts`` the fit is
        repeated from k-means++ seedings with ``1, 2, ..., K/2, K`` centres,
        stopping at the first seeding whose lower bound does not improve on
        the best so far; the best run is kept.

    Returns
    -------
    MixtureFit
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array (n, D)")
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least 2 points")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    k = default_truncation(2 * n) if max_components is None else int(max_components)
    k = max(1, min(k, n))
    if rng is None:
        rng = RngStream(seed, 0, 1, tag=TAG_MIXTURE)
    prior = _Prior(x, concentration, mean_precision, dof)

    best = None
    for seeds in _seed_counts(k) if restarts else (k,):
        fit = _ascend(x, k, _kmeanspp(x, seeds, rng), prior, tol, max_sweeps)
        if best is not None and fit[1][-1] <= best[1][-1]:
            break
        best = fit
    params, trace, resp, sweeps, converged = best

    # share of the points each component explains; the stick-breaking mean
    # would leave about 1/(n_k + 2) of the mass on empty tail components
    weights = resp.sum(axis=0) / n
    weights = weights / weights.sum()
    covariances = params.winv / np.maximum(params.nu - d - 1, 1e-12)[:, None, None]
    threshold = 2.0 / n if weight_threshold is None else weight_threshold
    return MixtureFit(
        weights=weights,
        means=params.m.copy(),
        covariances=covariances,
        assignments=np.argmax(resp, axis=1),
        effective=weights > threshold,
        n_sweeps=sweeps,
        converged=converged,
        elbo_trace=np.array(trace),
    )
