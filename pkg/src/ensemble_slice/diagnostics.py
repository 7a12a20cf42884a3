"""Autocorrelation, integrated autocorrelation time and run reports."""

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

__all__ = [
    "ChainTooShortError",
    "autocorrelation",
    "integrated_autocorrelation_time",
    "ensemble_iat",
    "efficiency",
    "RunReport",
    "make_report",
]

WINDOW_C = 5.0
MAX_REL_ERROR = 0.1


class ChainTooShortError(ValueError):
    """The adaptive window could not be resolved; ``estimate`` is the best guess."""

    def __init__(self, message, estimate, window):
        super().__init__(message)
        self.estimate = estimate
        self.window = window


def autocorrelation(series):
    """Normalized autocorrelation for lags ``0 .. n-1``.

    Uses the lag-dependent ``1/(n-k)`` normalization of the autocovariance
    and an FFT for the lagged products.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series must be one-dimensional with at least 2 samples")
    n = x.size
    d = x - x.mean()
    size = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    acov = acov / np.arange(n, 0, -1)
    if not acov[0] > 0:
        raise ValueError("zero variance")
    rho = acov / acov[0]
    rho[0] = 1.0
    return rho


def integrated_autocorrelation_time(series, c=WINDOW_C, max_rel_error=MAX_REL_ERROR):
    """``1 + 2 sum_{k<=M} rho(k)`` with the self-consistent window ``M >= c IAT(M)``.

    Raises :class:`ChainTooShortError` when no window satisfies the rule, or
    when the estimate's relative standard error ``sqrt(2 (2M + 1) / n)``
    exceeds ``max_rel_error``.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    rho = autocorrelation(x)
    taus = 1.0 + 2.0 * np.cumsum(rho[1:])
    windows = np.arange(1, n)
    ok = windows >= c * taus
    if not ok.any():
        m = max(1, int(n / c))
        raise ChainTooShortError("chain too short: no self-consistent window",
                                 float(taus[m - 1]), m)
    m = int(np.argmax(ok)) + 1
    tau = float(taus[m - 1])
    if math.sqrt(2.0 * (2 * m + 1) / n) > max_rel_error:
        needed = math.ceil(2.0 * (2 * m + 1) / max_rel_error**2)
        raise ChainTooShortError(
            f"chain too short: window {m} needs {needed} samples for a "
            f"{max_rel_error:.0%} relative error, have {n}", tau, m)
    return tau


def ensemble_iat(chains, parameter=None, **kwargs):
    """IAT of the walker chains concatenated in walker order.

    ``chains`` is walker-major: shape ``(n_walkers, n_steps)`` or
    ``(n_walkers, n_steps, D)`` with ``parameter`` selecting the coordinate.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 3:
        arr = arr[:, :, 0 if parameter is None else parameter]
    elif arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] < 100:
        raise ValueError("each walker chain needs at least 100 samples")
    return integrated_autocorrelation_time(arr.reshape(-1), **kwargs)


def efficiency(n_eff, n_density_evaluations):
    if n_density_evaluations < 1:
        raise ValueError("need at least one density evaluation")
    return n_eff / n_density_evaluations


@dataclass
class RunReport:
    status: str = "ok"
    sampler: str = "ess"
    n_samples: int = 0
    iat: list = None
    iat_mean: float = None
    iat_reliable: bool = True
    n_eff: float = None
    efficiency: float = None
    n_evaluations: int = 0
    n_evaluations_total: int = 0
    evaluations_per_sample: float = None
    mean: list = None
    var: list = None
    mode_masses: list = None
    mu_final: float = None
    mu_trajectory: list = None
    acceptance_rate: float = None
    burn_in_index: int = 0
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), default=_jsonable, **kwargs)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(values):
    return [None if not np.isfinite(v) else float(v) for v in np.atleast_1d(values)]


def make_report(chain, target=None, config=None, burn_in=None):
    """Diagnostics for the post-burn-in part of ``chain``."""
    cfg = config.to_dict() if config is not None else {}
    if burn_in is None:
        burn_in = cfg.get("burn_in", 0.5)
    report = RunReport(config=cfg, sampler=chain.info.get("sampler", cfg.get("sampler", "ess")),
                       n_evaluations_total=chain.n_density_evaluations,
                       mu_trajectory=_clean(chain.mu_trajectory),
                       acceptance_rate=chain.info.get("acceptance_rate"))
    if chain.mu_trajectory:
        report.mu_final = float(chain.mu_trajectory[-1])
    t_total = chain.n_iterations
    burn = int(burn_in * t_total)
    report.burn_in_index = burn
    kept = chain.samples[burn:]
    if chain.failure:
        report.status = "failed"
        report.notes.append(chain.failure)
    if kept.shape[0] == 0:
        if report.status == "ok":
            report.status = "no samples"
        return report
    n_steps, n_walkers, dim = kept.shape
    report.n_samples = int(n_steps * n_walkers)
    report.n_evaluations = int(np.sum(chain.evaluations[burn:]))
    report.evaluations_per_sample = report.n_evaluations / report.n_samples
    flat = kept.reshape(-1, dim)
    report.mean = _clean(flat.mean(axis=0))
    report.var = _clean(flat.var(axis=0))
    if target is not None:
        gt = getattr(target, "ground_truth", None) or {}
        if "mode_masses" in gt:
            labels = target.mode_of(flat)
            k = len(gt["mode_masses"])
            report.mode_masses = _clean(np.bincount(labels, minlength=k)[:k] / len(labels))
    if n_steps < 100:
        report.notes.append("fewer than 100 post-burn-in steps per walker; IAT not computed")
        return report
    walker_major = np.swapaxes(kept, 0, 1)
    iats = []
    for p in range(dim):
        try:
            iats.append(ensemble_iat(walker_major, p))
        except ChainTooShortError as exc:
            iats.append(exc.estimate)
            report.iat_reliable = False
        except ValueError as exc:
            iats.append(float("nan"))
            report.notes.append(f"parameter {p}: {exc}")
    if not report.iat_reliable:
        report.notes.append("IAT window unresolved for some parameters; best estimates reported")
    report.iat = _clean(iats)
    finite = [v for v in iats if np.isfinite(v)]
    if finite:
        report.iat_mean = float(np.mean(finite))
        report.n_eff = report.n_samples / report.iat_mean
        report.efficiency = efficiency(report.n_eff, max(report.n_evaluations, 1))
    return report
