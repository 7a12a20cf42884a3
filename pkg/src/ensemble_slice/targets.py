"""Benchmark log-densities and the evaluation plumbing shared by all samplers.

Targets are batch-oriented: ``log_prob`` maps an ``(n, D)`` array to ``n``
log-densities. Implementations only use row-wise numpy operations, so the
value for a row never depends on which other rows share the batch; this is
what lets the thread pool split batches freely without changing results.
"""

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logsumexp

from .numerics import RngStream, TAG_INIT

__all__ = [
    "LogDensityTarget",
    "FunctionTarget",
    "GaussianTarget",
    "Evaluator",
    "ar1_target",
    "funnel_target",
    "ring_target",
    "shells_target",
    "gaussian_mixture_target",
    "object_detection_target",
    "ObjectDetectionTarget",
    "simulate_image",
    "save_image",
    "load_image",
    "PaddedTarget",
    "StepTarget",
    "make_target",
    "TARGETS",
]

_LOG_2PI = math.log(2.0 * math.pi)


class LogDensityTarget:
    """Base class: a dimension and a batched log-density.

    Subclasses implement ``_log_prob(x)`` for a 2-D array. Optional hooks:
    ``sample_prior(rng)`` drawing one point per stream of an RngStream,
    ``ground_truth`` (dict with analytic ``mean``/``var`` arrays, entries may
    be NaN where unknown, and optionally ``mode_masses``) and ``mode_of(x)``.
    """

    name = "target"
    ground_truth = None

    def __init__(self, dim):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def log_prob(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {x.shape[1]}")
        out = np.asarray(self._log_prob(np.ascontiguousarray(x)), dtype=float)
        out = np.where(np.isnan(out), -np.inf, out)
        return out[0] if single else out

    __call__ = log_prob

    def _log_prob(self, x):
        raise NotImplementedError

    def params(self):
        return {}

    def has_prior(self):
        return type(self).sample_prior is not LogDensityTarget.sample_prior

    def sample_prior(self, rng):
        raise NotImplementedError(f"{self.name} has no prior sampler")

    def mode_of(self, x):
        raise NotImplementedError(f"{self.name} has no mode labelling")


class FunctionTarget(LogDensityTarget):
    """Wrap a user callable ``f(x) -> float`` acting on single points."""

    name = "function"

    def __init__(self, func, dim, vectorized=False):
        super().__init__(dim)
        self.func = func
        self.vectorized = vectorized

    def _log_prob(self, x):
        if self.vectorized:
            return self.func(x)
        return np.array([self.func(row) for row in x], dtype=float)


class GaussianTarget(LogDensityTarget):
    """Multivariate normal with dense covariance."""

    name = "gaussian"

    def __init__(self, cov, mean=None):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        super().__init__(cov.shape[0])
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=float)
        self.cov = cov
        self.precision = np.linalg.inv(cov)
        self.precision = 0.5 * (self.precision + self.precision.T)
        _, logdet = np.linalg.slogdet(cov)
        self._norm = -0.5 * (self.dim * _LOG_2PI + logdet)
        self.ground_truth = {"mean": self.mean.copy(), "var": np.diag(cov).copy()}

    @classmethod
    def standard(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def correlated(cls, dim, rho=0.9):
        """Equicorrelated normal: unit variances, pairwise correlation rho."""
        cov = (1 - rho) * np.eye(dim) + rho * np.ones((dim, dim))
        return cls(cov)

    def _log_prob(self, x):
        d = x - self.mean
        # einsum (not BLAS) keeps each row's arithmetic independent of the batch
        quad = np.einsum("ni,ij,nj->n", d, self.precision, d, optimize=False)
        return self._norm - 0.5 * quad

    def sample_prior(self, rng):
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.normal(self.dim) @ chol.T

    def params(self):
        return {"dim": self.dim}


class AR1Target(LogDensityTarget):
    name = "ar1"

    def __init__(self, dim, alpha):
        super().__init__(dim)
        if not abs(alpha) < 1:
            raise ValueError("AR(1) requires |alpha| < 1")
        self.alpha = float(alpha)
        self.beta2 = 1.0 - self.alpha**2
        self._norm = -0.5 * self.dim * _LOG_2PI - 0.5 * (self.dim - 1) * math.log(self.beta2)
        self.ground_truth = {"mean": np.zeros(self.dim), "var": np.ones(self.dim)}

    def _log_prob(self, x):
        innov = x[:, 1:] - self.alpha * x[:, :-1]
        return self._norm - 0.5 * x[:, 0] ** 2 - 0.5 * np.sum(innov**2, axis=1) / self.beta2

    def sample_prior(self, rng):
        return rng.normal(self.dim)

    def params(self):
        return {"dim": self.dim, "alpha": self.alpha}


def ar1_target(dim=50, alpha=0.95):
    """AR(1) chain density; every marginal is N(0, 1)."""
    return AR1Target(dim, alpha)


class FunnelTarget(LogDensityTarget):
    name = "funnel"

    def __init__(self, dim, gamma):
        super().__init__(dim)
        if self.dim < 2:
            raise ValueError("funnel needs dim >= 2")
        m = self.dim - 1
        gamma = float(gamma)
        if m > 1 and not (-1.0 / (m - 1) < gamma < 1.0):
            raise ValueError(f"gamma must lie in (-1/{m - 1}, 1) for dim={self.dim}")
        self.gamma = gamma
        self._m = m
        if m == 1:
            self._logdet0 = 0.0
        else:
            self._big = 1.0 - gamma + m * gamma
            self._logdet0 = (m - 1) * math.log(1.0 - gamma) + math.log(self._big)
        gt_mean = np.full(self.dim, np.nan)
        gt_var = np.full(self.dim, np.nan)
        gt_mean[0], gt_var[0] = 0.0, 1.0
        self.ground_truth = {"mean": gt_mean, "var": gt_var}

    def _log_prob(self, x):
        x1 = x[:, 0]
        z = x[:, 1:]
        m = self._m
        ss = np.sum(z * z, axis=1)
        if m == 1:
            q0 = ss
        else:
            s = np.sum(z, axis=1)
            q0 = (ss - self.gamma * s * s / self._big) / (1.0 - self.gamma)
        logdet = m * x1 + self._logdet0
        cond = -0.5 * (m * _LOG_2PI + logdet + np.exp(-x1) * q0)
        return -0.5 * (_LOG_2PI + x1 * x1) + cond

    def sample_prior(self, rng):
        return rng.normal(self.dim)

    def params(self):
        return {"dim": self.dim, "gamma": self.gamma}


def funnel_target(dim=25, gamma=0.95):
    """Correlated funnel: x1 ~ N(0,1), rest ~ N(0, e^x1 [(1-g) I + g J])."""
    return FunnelTarget(dim, gamma)


class RingTarget(LogDensityTarget):
    name = "ring"

    def __init__(self, dim, a, b):
        if dim < 2:
            raise ValueError("ring needs dim >= 2")
        super().__init__(dim)
        self.a = float(a)
        self.b = float(b)

    def _log_prob(self, x):
        sq = x * x
        pair = sq + np.roll(sq, -1, axis=1)
        terms = ((pair - self.a) ** 2 / self.b) ** 2
        return -np.sum(terms, axis=1)

    def sample_prior(self, rng):
        return 4.0 * rng.uniform(self.dim) - 2.0

    def params(self):
        return {"dim": self.dim, "a": self.a, "b": self.b}


def ring_target(dim=16, a=2.0, b=1.0):
    """Cyclic ring density with the doubled square in each term."""
    return RingTarget(dim, a, b)


class ShellsTarget(LogDensityTarget):
    name = "shells"

    def __init__(self, dim, radius=2.0, width=0.1, offset=3.5):
        super().__init__(dim)
        self.radius = float(radius)
        self.width = float(width)
        self.centers = np.zeros((2, self.dim))
        self.centers[0, 0] = -offset
        self.centers[1, 0] = offset
        self._lognorm = -math.log(math.sqrt(2.0 * math.pi) * self.width)

    def _log_prob(self, x):
        terms = []
        for c in self.centers:
            d = x - c
            dist = np.sqrt(np.sum(d * d, axis=1))
            terms.append(self._lognorm - 0.5 * (dist - self.radius) ** 2 / self.width**2)
        return logsumexp(np.stack(terms, axis=1), axis=1)

    def sample_prior(self, rng):
        return 12.0 * rng.uniform(self.dim) - 6.0

    def mode_of(self, x):
        return (np.atleast_2d(x)[:, 0] > 0).astype(int)

    def params(self):
        return {"dim": self.dim}


def shells_target(dim=10):
    """Two Gaussian shells of radius 2 and width 0.1 centred at -/+3.5 e_1."""
    return ShellsTarget(dim)


class GaussianMixtureTarget(LogDensityTarget):
    name = "gaussian_mixture"

    def __init__(self, dim, sigma=0.1, weights=(1 / 3, 2 / 3), locs=(-0.5, 0.5)):
        super().__init__(dim)
        self.sigma = float(sigma)
        self.weights = np.asarray(weights, dtype=float)
        self.locs = np.asarray(locs, dtype=float)
        self._logw = np.log(self.weights)
        self._norm = -0.5 * self.dim * (_LOG_2PI + 2 * math.log(self.sigma))
        w, mu = self.weights, self.locs
        mean = np.sum(w * mu)
        var = np.sum(w * (self.sigma**2 + mu**2)) - mean**2
        self.ground_truth = {
            "mean": np.full(self.dim, mean),
            "var": np.full(self.dim, var),
            "mode_masses": self.weights.copy(),
        }

    def _log_prob(self, x):
        terms = []
        for logw, loc in zip(self._logw, self.locs):
            d = x - loc
            terms.append(logw + self._norm - 0.5 * np.sum(d * d, axis=1) / self.sigma**2)
        return logsumexp(np.stack(terms, axis=1), axis=1)

    def sample_prior(self, rng):
        return 2.0 * rng.uniform(self.dim) - 1.0

    def mode_of(self, x):
        x = np.atleast_2d(x)
        d = [np.sum((x - loc) ** 2, axis=1) for loc in self.locs]
        return np.argmin(np.stack(d, axis=1), axis=1)

    def params(self):
        return {"dim": self.dim}


def gaussian_mixture_target(dim=10):
    """Two isotropic components at -0.5 and +0.5 (sd 0.1), masses 1/3 and 2/3."""
    return GaussianMixtureTarget(dim)


class ObjectDetectionTarget(LogDensityTarget):
    """Posterior over one circular Gaussian blob (X, Y, A, R) in a noisy image.

    Pixel ``(x, y)`` is ``image[y, x]`` with integer coordinates. The residual
    sum is evaluated through the separable form of the profile, which is
    algebraically identical to the direct pixel sum.
    """

    name = "object_detection"
    bounds = np.array([[0.0, 200.0], [0.0, 200.0], [1.0, 2.0], [2.0, 9.0]])

    def __init__(self, image, sigma=2.0):
        super().__init__(4)
        self.image = np.ascontiguousarray(image, dtype=float)
        self.sigma = float(sigma)
        ny, nx = self.image.shape
        self._xs = np.arange(nx, dtype=float)
        self._ys = np.arange(ny, dtype=float)
        self._sum_d2 = float(np.sum(self.image**2))
        if ny != nx:
            self.bounds = self.bounds.copy()
            self.bounds[0, 1] = nx
            self.bounds[1, 1] = ny

    def profile(self, theta):
        """The image of one object, ``A exp(-r^2 / 2R^2)`` on the pixel grid."""
        x0, y0, amp, rad = theta
        gx = np.exp(-((self._xs - x0) ** 2) / (2 * rad**2))
        gy = np.exp(-((self._ys - y0) ** 2) / (2 * rad**2))
        return amp * np.outer(gy, gx)

    def _log_prob(self, x):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        inside = np.all((x > lo) & (x < hi), axis=1)
        out = np.full(x.shape[0], -np.inf)
        for i in np.flatnonzero(inside):
            x0, y0, amp, rad = x[i]
            gx = np.exp(-((self._xs - x0) ** 2) / (2 * rad**2))
            gy = np.exp(-((self._ys - y0) ** 2) / (2 * rad**2))
            sum_g2 = amp * amp * np.dot(gx, gx) * np.dot(gy, gy)
            sum_gd = amp * np.dot(gy, self.image @ gx)
            resid = sum_g2 - 2.0 * sum_gd + self._sum_d2
            out[i] = -resid / (2.0 * self.sigma**2)
        return out

    def sample_prior(self, rng):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + (hi - lo) * rng.uniform(4)

    def params(self):
        return {"sigma": self.sigma, "shape": list(self.image.shape)}


def object_detection_target(image, sigma=2.0):
    return ObjectDetectionTarget(image, sigma)


def simulate_image(seed, n_objects=8, size=200, noise_sd=2.0):
    """Noisy image with ``n_objects`` Gaussian blobs.

    Returns ``(image, objects)`` where objects is an ``(n_objects, 4)`` array
    of true ``(X, Y, A, R)``.
    """
    rng = RngStream(seed, 0, 1, tag=TAG_INIT)
    u = rng.uniform(4 * n_objects)[0].reshape(n_objects, 4)
    objects = np.column_stack([
        size * u[:, 0],
        size * u[:, 1],
        1.0 + u[:, 2],
        3.0 + 4.0 * u[:, 3],
    ])
    blank = ObjectDetectionTarget(np.zeros((size, size)))
    image = sum(blank.profile(obj) for obj in objects)
    noise = RngStream(seed, 1, 1, tag=TAG_INIT).normal(size * size)[0].reshape(size, size)
    return image + noise_sd * noise, objects


def save_image(path, image, meta=None):
    """Write ``path`` (raw little-endian float64 grid) plus ``path.json``."""
    image = np.asarray(image, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(image.tobytes(order="C"))
    sidecar = {"shape": list(image.shape), "dtype": "<f8", "order": "C"}
    sidecar.update(meta or {})
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_image(path):
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    data = np.fromfile(path, dtype=meta.get("dtype", "<f8"))
    return data.reshape(meta["shape"]), meta


class StepTarget(LogDensityTarget):
    """Piecewise-constant 1-D density: mass ``p[i]`` spread over ``[i, i+1)``."""

    name = "step"

    def __init__(self, probs):
        super().__init__(1)
        self.probs = np.asarray(probs, dtype=float) / np.sum(probs)
        self._logp = np.log(self.probs)

    def _log_prob(self, x):
        cell = np.floor(x[:, 0])
        ok = (cell >= 0) & (cell < len(self.probs))
        out = np.full(x.shape[0], -np.inf)
        out[ok] = self._logp[cell[ok].astype(int)]
        return out

    def sample_prior(self, rng):
        return len(self.probs) * rng.uniform(1)

    def mode_of(self, x):
        return np.floor(np.atleast_2d(x)[:, 0]).astype(int)


class PaddedTarget(LogDensityTarget):
    """Delegates to ``base`` but sleeps ``delay`` seconds per evaluated point.

    Stands in for an expensive model; the sleep releases the GIL, like a call
    into compiled code or an external simulator would.
    """

    def __init__(self, base, delay=1e-3):
        super().__init__(base.dim)
        self.base = base
        self.delay = float(delay)
        self.name = f"padded_{base.name}"
        self.ground_truth = base.ground_truth

    def _log_prob(self, x):
        out = self.base.log_prob(x)
        for _ in range(x.shape[0]):
            time.sleep(self.delay)
        return out

    def sample_prior(self, rng):
        return self.base.sample_prior(rng)


class Evaluator:
    """Counts density evaluations and optionally spreads batches over threads.

    Rows are split into contiguous chunks, one per worker; since targets are
    row-independent the result is the same for any worker count. Callers
    with whole independent tasks (a group of walker updates) can run them
    on the pool with :meth:`map`; inside a task, evaluate with
    :meth:`serial`.
    """

    def __init__(self, target, workers=1):
        self.target = target
        self.workers = max(1, int(workers))
        self.n_evaluations = 0
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        self._lock = threading.Lock()

    def serial(self, x):
        """Counted evaluation in the calling thread."""
        x = np.atleast_2d(x)
        with self._lock:
            self.n_evaluations += x.shape[0]
        if x.shape[0] == 0:
            return np.empty(0)
        return self.target.log_prob(x)

    def map(self, fn, items):
        items = list(items)
        if self._pool is None or len(items) < 2:
            return [fn(item) for item in items]
        return list(self._pool.map(fn, items))

    def __call__(self, x):
        x = np.atleast_2d(x)
        n = x.shape[0]
        with self._lock:
            self.n_evaluations += n
        if n == 0:
            return np.empty(0)
        if self._pool is None or n == 1:
            return self.target.log_prob(x)
        chunks = np.array_split(x, min(self.workers, n))
        return np.concatenate(list(self._pool.map(self.target.log_prob, chunks)))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _standard_normal(dim=2, **_):
    return GaussianTarget.standard(dim)


def _correlated_normal(dim=20, rho=0.9, **_):
    return GaussianTarget.correlated(dim, rho)


TARGETS = {
    "normal": _standard_normal,
    "correlated_normal": _correlated_normal,
    "ar1": lambda dim=50, alpha=0.95, **_: ar1_target(dim, alpha),
    "funnel": lambda dim=25, gamma=0.95, **_: funnel_target(dim, gamma),
    "ring": lambda dim=16, a=2.0, b=1.0, **_: ring_target(dim, a, b),
    "shells": lambda dim=10, **_: shells_target(dim),
    "gaussian_mixture": lambda dim=10, **_: gaussian_mixture_target(dim),
}


def make_target(target_id, **params):
    """Build a registered target; ``object_detection`` takes ``image_seed``
    or ``image_path``."""
    if target_id == "object_detection":
        if params.get("image_path"):
            image, _ = load_image(params["image_path"])
        else:
            image, _ = simulate_image(int(params.get("image_seed", 0)))
        return ObjectDetectionTarget(image, params.get("sigma", 2.0))
    if target_id not in TARGETS:
        raise KeyError(f"unknown target id {target_id!r}")
    params = {k: v for k, v in params.items() if v is not None}
    return TARGETS[target_id](**params)
