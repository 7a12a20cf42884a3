"""Comparison samplers: random-walk Metropolis, standard slice sampling,
the affine-invariant stretch move and differential-evolution MCMC.

All of them evaluate the target through an :class:`Evaluator`, so density
evaluation counts (and hence efficiencies) are comparable with ensemble
slice sampling. Single-chain methods run ``n_chains`` independent chains
in lockstep; ensemble methods reuse the two half-set scheme.
"""

from dataclasses import replace
import math

import numpy as np

from .config import RunConfig
from .ensemble import Recorder, SamplerError, check_walker_count, draw_initial, init_strategy
from .numerics import RngStream, TAG_BASELINE, TAG_TUNING
from .slice import MAX_EXPANSIONS, SliceError, slice_batch
from .targets import Evaluator
from .tuning import TuningState, tune_length_scale

__all__ = [
    "metropolis_step",
    "metropolis_autotune",
    "TuningFailedError",
    "standard_slice_step",
    "stretch_step",
    "stretch_z",
    "demc_step",
    "default_demc_gamma",
    "run_baseline",
]

# Metropolis draws are generated for this many steps at a time
_BLOCK = 256


class TuningFailedError(RuntimeError):
    pass


def _single(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x, x.ndim == 1


# -- random-walk Metropolis -------------------------------------------------

def metropolis_step(log_prob, x, scale, rng, logf_x=None, z=None, u=None):
    """One isotropic random-walk Metropolis update per row of ``x``.

    ``z`` (standard normal, shape of ``x``) and ``u`` (uniforms, one per
    row) may be supplied; otherwise they are drawn from ``rng``.

    Returns ``(x_new, logf_new, accepted)``.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    x, single = _single(x)
    if logf_x is None:
        logf_x = log_prob(x)
    logf_x = np.atleast_1d(logf_x)
    if z is None:
        z = rng.normal(x.shape[1])
    if u is None:
        u = rng.uniform()
    prop = x + scale * np.atleast_2d(z)
    logf_p = np.atleast_1d(log_prob(prop))
    with np.errstate(invalid="ignore"):
        accept = np.log(u) < logf_p - logf_x
    accept &= np.isfinite(logf_p)
    x_new = np.where(accept[:, None], prop, x)
    lp_new = np.where(accept, logf_p, logf_x)
    if single:
        return x_new[0], lp_new[0], bool(accept[0])
    return x_new, lp_new, accept


class _MetropolisChains:
    """Lockstep chains drawing their proposals block-wise from keyed streams."""

    def __init__(self, log_prob, x, logf, scale, seed, tag=TAG_BASELINE):
        self.log_prob = log_prob
        self.x, self.logf = x, logf
        self.scale = scale
        self.seed, self.tag = seed, tag
        self.t = 0
        self._z = self._u = None

    def _draws(self):
        block, offset = divmod(self.t, _BLOCK)
        if offset == 0:
            n, d = self.x.shape
            rng = RngStream(self.seed, block, n, tag=self.tag)
            self._z = rng.normal(_BLOCK * d).reshape(n, _BLOCK, d)
            self._u = rng.uniform(_BLOCK)
        return self._z[:, offset], self._u[:, offset]

    def step(self):
        z, u = self._draws()
        self.x, self.logf, acc = metropolis_step(self.log_prob, self.x, self.scale, None,
                                                 self.logf, z, u)
        self.t += 1
        return acc


def _acceptance(chains, n_steps):
    acc = 0
    for _ in range(n_steps):
        acc += int(chains.step().sum())
    return acc / (n_steps * chains.x.shape[0])


def metropolis_autotune(log_prob, x0, seed=0, scale0=None, probe_steps=2000, max_probes=40,
                        band=(0.2, 0.3), return_state=False):
    """Find an isotropic proposal scale whose acceptance rate lies in ``band``.

    Doubles or halves the scale until the acceptance rate brackets the band,
    then bisects in log-scale. Each probe runs ``probe_steps`` steps of all
    rows of ``x0`` (one chain per row) continuing from the previous probe;
    the probe samples are discarded.

    Returns the scale, or ``(scale, acceptance, x, logf, n_probes)`` with
    ``return_state=True``.
    """
    x, single = _single(x0)
    d = x.shape[1]
    scale = 2.38 / math.sqrt(d) if scale0 is None else float(scale0)
    logf = log_prob(x)
    lo = hi = None  # scales with acceptance above / below the band
    chains = _MetropolisChains(log_prob, x, logf, scale, seed, tag=TAG_TUNING)
    for probe in range(1, max_probes + 1):
        chains.scale = scale
        rate = _acceptance(chains, probe_steps)
        if band[0] <= rate <= band[1]:
            if return_state:
                return scale, rate, chains.x, chains.logf, probe
            return scale
        if rate > band[1]:
            lo = scale
        else:
            hi = scale
        if lo is not None and hi is not None:
            scale = math.sqrt(lo * hi)
        elif hi is None:
            scale *= 2.0
        else:
            scale *= 0.5
    raise TuningFailedError(
        f"Metropolis tuning failed to reach acceptance in {band} after {max_probes} probes")


# -- standard slice sampling ------------------------------------------------

def standard_slice_step(log_prob, x, mu, axis_policy, rng, axis=0, logf_x=None,
                        max_expansions=MAX_EXPANSIONS):
    """One slice update per row of ``x`` along a coordinate axis or a random direction.

    ``axis_policy="component_cycle"`` uses coordinate ``axis`` (the caller
    advances it round-robin); ``"random_direction"`` draws a uniformly
    distributed unit vector per row. The direction is scaled by ``mu``.

    Returns the :class:`~ensemble_slice.slice.BatchSliceResult`.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    x, _ = _single(x)
    n, d = x.shape
    if axis_policy == "component_cycle":
        eta = np.zeros((n, d))
        eta[:, axis % d] = mu
    elif axis_policy == "random_direction":
        z = rng.normal(d)
        eta = mu * z / np.linalg.norm(z, axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown axis_policy {axis_policy!r}")
    if logf_x is None:
        logf_x = log_prob(x)
    return slice_batch(log_prob, x, logf_x, eta, rng, max_expansions=max_expansions)


# -- affine-invariant stretch move ------------------------------------------

def stretch_z(u, a=2.0):
    """Map uniforms to the stretch factor density g(z) ~ 1/sqrt(z) on [1/a, a]."""
    ra = math.sqrt(a)
    return (u * (ra - 1.0 / ra) + 1.0 / ra) ** 2


def stretch_step(log_prob, active, logf_active, comp, a, rng):
    """Stretch-move update of the ``active`` half-set given the complementary half.

    Returns ``(positions, logf, accepted)``.
    """
    if a <= 1:
        raise ValueError("stretch parameter a must exceed 1")
    n, d = active.shape
    j = rng.integers(comp.shape[0])
    z = stretch_z(rng.uniform(), a)
    u = rng.uniform()
    prop = comp[j] + z[:, None] * (active - comp[j])
    logf_p = log_prob(prop)
    with np.errstate(invalid="ignore"):
        accept = np.log(u) < (d - 1) * np.log(z) + logf_p - logf_active
    accept &= np.isfinite(logf_p)
    return (np.where(accept[:, None], prop, active), np.where(accept, logf_p, logf_active),
            accept)


# -- differential-evolution MCMC with snooker -------------------------------

def default_demc_gamma(dim):
    return 2.38 / math.sqrt(2 * dim)


def _distinct(n, k, rng, rows):
    """``k`` distinct uniform indices in ``range(n)`` per row (k <= 3)."""
    picks = []
    for i in range(k):
        r = rng.integers(n - i, rows)
        if picks:
            # skip over earlier picks in ascending order
            for prev in np.sort(np.stack(picks), axis=0):
                r = r + (r >= prev)
        picks.append(r)
    return picks


def demc_step(log_prob, active, logf_active, comp, gamma, snooker_probability, rng,
              epsilon=1e-6):
    """Differential-evolution update of the ``active`` half-set.

    Each walker proposes ``x + gamma (X_l - X_m) + e`` with ``e`` ~
    N(0, epsilon^2 I), or with probability ``snooker_probability`` a snooker
    update: the difference of two complementary walkers is projected onto
    the line through ``x`` and a third (anchor) walker, scaled by a factor
    drawn from U(1.2, 2.2), and accepted with the ``|.|^(D-1)`` correction.

    Returns ``(positions, logf, accepted)``.
    """
    n, d = active.shape
    rows = np.arange(n)
    snook = rng.uniform() < snooker_probability
    if comp.shape[0] < 3:
        snook[:] = False
    prop = active.copy()
    log_corr = np.zeros(n)

    de = rows[~snook]
    if de.size:
        l, m = _distinct(comp.shape[0], 2, rng, de)
        e = epsilon * rng.normal(d, de) if epsilon else 0.0
        prop[de] = active[de] + gamma * (comp[l] - comp[m]) + e

    sn = rows[snook]
    if sn.size:
        anchor, l, m = _distinct(comp.shape[0], 3, rng, sn)
        g = 1.2 + rng.uniform(rows=sn)
        x = active[sn]
        za = comp[anchor]
        axis = x - za
        norm = np.linalg.norm(axis, axis=1, keepdims=True)
        unit = np.divide(axis, norm, out=np.zeros_like(axis), where=norm > 0)
        proj = np.sum((comp[l] - comp[m]) * unit, axis=1, keepdims=True) * unit
        prop[sn] = x + g[:, None] * proj
        with np.errstate(divide="ignore"):
            log_corr[sn] = (d - 1) * (np.log(np.linalg.norm(prop[sn] - za, axis=1))
                                      - np.log(norm[:, 0]))

    u = rng.uniform()
    logf_p = log_prob(prop)
    with np.errstate(invalid="ignore"):
        accept = np.log(u) < logf_p - logf_active + log_corr
    accept &= np.isfinite(logf_p)
    return (np.where(accept[:, None], prop, active), np.where(accept, logf_p, logf_active),
            accept)


# -- runners ------------------------------------------------------------------

def _initial(target, n, config, evaluator):
    x = draw_initial(target, n, init_strategy(config), config.seed)
    logf = evaluator(x)
    bad = np.flatnonzero(~np.isfinite(logf))
    if bad.size:
        raise ValueError(f"walker outside support: chains {bad.tolist()} have log density -inf")
    return x, logf


def _finish(rec, shape, n_init, target, config, **info):
    from .diagnostics import make_report

    chain = rec.chain(shape, n_init, sampler=config.sampler, **info)
    return chain, make_report(chain, target, config)


def _n_steps(config, per_step):
    if config.budget:
        return max(0, config.budget // per_step)
    return config.n_iterations


def _run_metropolis(target, config, ev):
    n = config.n_chains
    x, logf = _initial(target, n, config, ev)
    info = {}
    if config.proposal_scale is None:
        scale, rate, x, logf, probes = metropolis_autotune(ev, x, seed=config.seed,
                                                           return_state=True)
        info.update(tuning_acceptance=rate, tuning_probes=probes)
    else:
        scale = config.proposal_scale
    n_init = ev.n_evaluations
    chains = _MetropolisChains(ev, x, logf, scale, config.seed)
    rec = Recorder(config.thin)
    accepted = 0
    steps = _n_steps(config, n)
    for _ in range(steps):
        accepted += int(chains.step().sum())
        rec.record(chains.x, chains.logf, n)
    info.update(proposal_scale=scale,
                acceptance_rate=accepted / (steps * n) if steps else None)
    return rec, (n, target.dim), n_init, info


def _run_slice(target, config, ev):
    n = config.n_chains
    x, logf = _initial(target, n, config, ev)
    n_init = ev.n_evaluations
    tuning = TuningState(mu=config.mu0, max_adapt_iterations=config.adapt_max,
                         tolerance=config.adapt_tol)
    rec = Recorder(config.thin)
    t = 0
    spent = 0
    while (spent < config.budget) if config.budget else (t < config.n_iterations):
        rng = RngStream(config.seed, t, n, tag=TAG_BASELINE)
        try:
            res = standard_slice_step(ev, x, tuning.mu, config.axis_policy, rng, axis=t,
                                      logf_x=logf, max_expansions=config.max_expansions)
        except SliceError as exc:
            raise SamplerError(f"{exc} (step {t})", iteration=t,
                               chain=rec.chain((n, target.dim), n_init, failure=str(exc))) from exc
        x, logf = res.new_points, res.log_prob
        cost = int(res.n_evaluations.sum())
        spent += cost
        tuning = tune_length_scale(tuning, int(res.n_expansions.sum()),
                                   int(res.n_contractions.sum()))
        rec.record(x, logf, cost, tuning.mu, tuning.last_ratio)
        t += 1
    return rec, (n, target.dim), n_init, {"axis_policy": config.axis_policy}


def _run_ensemble(target, config, ev, kind):
    n, d = config.n_walkers, target.dim
    check_walker_count(n, d)
    x, logf = _initial(target, n, config, ev)
    n_init = ev.n_evaluations
    half = n // 2
    gamma = config.demc_gamma if config.demc_gamma is not None else default_demc_gamma(d)
    rec = Recorder(config.thin)
    accepted = 0
    steps = _n_steps(config, n)
    for t in range(steps):
        rng = RngStream(config.seed, t, n, tag=TAG_BASELINE)
        for phase in (0, 1):
            act = np.arange(phase * half, (phase + 1) * half)
            comp = x[np.arange((1 - phase) * half, (2 - phase) * half)].copy()
            sub = _SubStream(rng, act)
            if kind == "stretch":
                new, lp, acc = stretch_step(ev, x[act], logf[act], comp, config.stretch_a, sub)
            else:
                new, lp, acc = demc_step(ev, x[act], logf[act], comp, gamma,
                                         config.snooker_probability, sub)
            x[act], logf[act] = new, lp
            accepted += int(acc.sum())
        rec.record(x, logf, n)
    info = {"acceptance_rate": accepted / (steps * n) if steps else None}
    if kind == "demc":
        info["demc_gamma"] = gamma
    return rec, (n, d), n_init, info


class _SubStream:
    """View of an RngStream restricted to a subset of its streams.

    Row indices passed to the view are positions within ``rows``.
    """

    def __init__(self, rng, rows):
        self.rng = rng
        self.rows = np.asarray(rows)

    def __len__(self):
        return len(self.rows)

    def _map(self, rows):
        return self.rows if rows is None else self.rows[np.asarray(rows)]

    def uniform(self, size=None, rows=None):
        return self.rng.uniform(size, self._map(rows))

    def normal(self, size=None, rows=None):
        return self.rng.normal(size, self._map(rows))

    def integers(self, high, rows=None):
        return self.rng.integers(high, self._map(rows))


_RUNNERS = {
    "metropolis": _run_metropolis,
    "slice": _run_slice,
    "stretch": lambda t, c, e: _run_ensemble(t, c, e, "stretch"),
    "demc": lambda t, c, e: _run_ensemble(t, c, e, "demc"),
}


def run_baseline(target, config=None, **overrides):
    """Run the baseline named by ``config.sampler``.

    ``config.budget`` (density evaluations after initialization) takes
    precedence over ``config.n_iterations``. For Metropolis the tuning
    probes are not charged to the budget; their count is reported in
    ``chain.info``.

    Returns ``(ChainStore, RunReport)``.
    """
    config = replace(config or RunConfig(sampler="metropolis"), **overrides)
    config.validate(target.dim)
    try:
        runner = _RUNNERS[config.sampler]
    except KeyError:
        raise ValueError(f"{config.sampler!r} is not a baseline sampler") from None
    with Evaluator(target, config.workers) as ev:
        rec, shape, n_init, info = runner(target, config, ev)
        info["setup_evaluations"] = n_init
    # tuning probes are counted separately from the sampling budget
    n_init_charged = n_init if config.sampler != "metropolis" else config.n_chains
    return _finish(rec, shape, n_init_charged, target, config, **info)
