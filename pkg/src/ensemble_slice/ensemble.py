"""Ensemble slice sampling: split-ensemble iteration, initialization, runs.

One iteration updates the first half of the walkers along directions built
from the second half, then the second half from the (already updated)
first half. Within a half every walker update is independent, so the
target evaluations of a phase can be spread over a thread pool. All
randomness is keyed by ``(seed, iteration, walker)``, which makes chains
independent of the worker count.
"""

from dataclasses import dataclass, field, replace
import warnings

import numpy as np

from .config import RunConfig
from .moves import DegenerateEnsembleError, make_move
from .numerics import RngStream, TAG_INIT, TAG_WALKER
from .slice import (MAX_EXPANSIONS, BatchSliceResult, SliceError, slice_along,
                    slice_batch)
from .targets import Evaluator
from .tuning import TuningState, tune_length_scale

__all__ = [
    "EnsembleState",
    "ChainStore",
    "SamplerError",
    "Ball",
    "initialize",
    "draw_initial",
    "Recorder",
    "check_walker_count",
    "step",
    "run",
]


class SamplerError(RuntimeError):
    """A walker update failed; ``chain`` holds the samples recorded so far."""

    def __init__(self, message, walker=None, iteration=None, chain=None):
        super().__init__(message)
        self.walker = walker
        self.iteration = iteration
        self.chain = chain


@dataclass
class EnsembleState:
    positions: np.ndarray
    log_prob: np.ndarray
    tuning: TuningState = field(default_factory=TuningState)
    iteration: int = 0

    @property
    def n_walkers(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]


@dataclass
class ChainStore:
    """Recorded samples, ``samples[t, k]`` is walker ``k`` at stored step ``t``.

    ``evaluations[t]`` counts the density evaluations spent producing stored
    step ``t`` (including thinned-away steps); ``n_density_evaluations`` adds
    the initialization cost on top.
    """

    samples: np.ndarray
    log_prob: np.ndarray
    evaluations: np.ndarray
    n_init_evaluations: int = 0
    mu_trajectory: list = field(default_factory=list)
    ratio_trajectory: list = field(default_factory=list)
    failure: str = None
    info: dict = field(default_factory=dict)

    @property
    def n_density_evaluations(self):
        return int(self.n_init_evaluations + np.sum(self.evaluations))

    @property
    def n_iterations(self):
        return self.samples.shape[0]

    def walker_major(self):
        return np.swapaxes(self.samples, 0, 1)


@dataclass
class Ball:
    """Initialize walkers at ``center + radius * N(0, I)``."""

    center: object = 0.0
    radius: float = 1e-3


def check_walker_count(n_walkers, dim):
    if n_walkers % 2 or n_walkers < 2 * dim:
        raise ValueError(
            f"n_walkers={n_walkers} invalid: need an even number >= 2 x D = {2 * dim} walkers")


def draw_initial(target, n, strategy="prior", seed=0):
    """Starting points for ``n`` walkers or chains (no walker-count checks)."""
    dim = target.dim
    rng = RngStream(seed, 0, n, tag=TAG_INIT)
    if isinstance(strategy, str) and strategy == "prior":
        if not target.has_prior():
            raise ValueError(f"target {target.name!r} has no prior sampler")
        positions = np.asarray(target.sample_prior(rng), dtype=float)
    elif isinstance(strategy, str) and strategy == "normal":
        positions = rng.normal(dim)
    elif isinstance(strategy, Ball):
        center = np.broadcast_to(np.asarray(strategy.center, dtype=float), (dim,))
        positions = center + strategy.radius * rng.normal(dim)
    elif isinstance(strategy, str):
        raise ValueError(f"unknown initialization strategy {strategy!r}")
    else:
        positions = np.array(strategy, dtype=float)
    if positions.shape != (n, dim):
        raise ValueError(f"initial positions must have shape {(n, dim)}, got {positions.shape}")
    return positions


def initialize(target, n_walkers, strategy="prior", seed=0, tuning=None, evaluator=None):
    """Build the starting ensemble.

    ``strategy`` is ``"prior"`` (uses ``target.sample_prior``), a
    :class:`Ball`, ``"normal"`` (independent standard normal coordinates)
    or an explicit ``(n_walkers, D)`` array.
    """
    dim = target.dim
    check_walker_count(n_walkers, dim)
    positions = draw_initial(target, n_walkers, strategy, seed)
    log_prob = (evaluator or target.log_prob)(positions)
    bad = np.flatnonzero(~np.isfinite(log_prob))
    if bad.size:
        raise ValueError(f"walker outside support: walkers {bad.tolist()} have log density -inf")
    disp = positions - positions.mean(axis=0)
    if np.linalg.matrix_rank(disp) < dim:
        warnings.warn("initial walker displacements do not span the parameter space",
                      RuntimeWarning, stacklevel=2)
    return EnsembleState(positions, np.asarray(log_prob, dtype=float),
                         tuning or TuningState(), 0)


def step(state, log_prob, move="differential", seed=0, max_expansions=MAX_EXPANSIONS):
    """Advance the ensemble by one iteration.

    Parameters
    ----------
    state : EnsembleState
    log_prob : callable
        Batched log-density, typically an :class:`Evaluator` (which owns the
        worker pool) or a target.
    move : str or Move

    Returns
    -------
    new_state : EnsembleState
    counts : dict
        ``expansions``, ``contractions``, ``evaluations`` summed over the
        ensemble (these drive the length-scale update), the same counts
        restricted to directions whose scale carries ``mu``
        (``tuning_expansions``/``tuning_contractions``) and the per-walker
        ``coefficients``.
    """
    move = make_move(move)
    n = state.n_walkers
    check_walker_count(n, state.dim)
    half = n // 2
    mu = state.tuning.mu
    rng = RngStream(seed, state.iteration, n, tag=TAG_WALKER)
    pos = state.positions.copy()
    lp = state.log_prob.copy()
    coef = np.empty(n)
    totals = dict(expansions=0, contractions=0, evaluations=0,
                  tuning_expansions=0, tuning_contractions=0)
    for phase in (0, 1):
        active = np.arange(phase * half, (phase + 1) * half)
        other = np.arange((1 - phase) * half, (2 - phase) * half)
        comp = pos[other].copy()
        try:
            context = move.prepare(comp, seed, state.iteration, phase)
            eta, tunes = move.directions(mu, comp, rng, active, context)
            res = _slice_half(log_prob, pos[active], lp[active], eta, rng, active,
                              max_expansions)
        except (SliceError, DegenerateEnsembleError, np.linalg.LinAlgError) as exc:
            rows = getattr(exc, "rows", None)
            walker = None if rows is None else active[np.atleast_1d(rows)].tolist()
            raise SamplerError(f"{exc} (iteration {state.iteration}, walkers {walker})",
                               walker=walker, iteration=state.iteration) from exc
        pos[active] = res.new_points
        lp[active] = res.log_prob
        coef[active] = res.coefficients
        totals["expansions"] += int(res.n_expansions.sum())
        totals["contractions"] += int(res.n_contractions.sum())
        totals["evaluations"] += int(res.n_evaluations.sum())
        totals["tuning_expansions"] += int(res.n_expansions[tunes].sum())
        totals["tuning_contractions"] += int(res.n_contractions[tunes].sum())
    tuning = tune_length_scale(state.tuning, totals["expansions"], totals["contractions"])
    totals["coefficients"] = coef
    return EnsembleState(pos, lp, tuning, state.iteration + 1), totals


def _slice_half(log_prob, x, logf, eta, rng, rows, max_expansions):
    """Slice updates of one half-ensemble.

    With a multi-worker :class:`Evaluator` every walker update becomes its
    own pool task, so idle workers pick up the next walker instead of
    waiting on the slowest slice of a lockstep round. Streams are per
    walker, so the outcome matches the single lockstep batch exactly.
    """
    workers = getattr(log_prob, "workers", 1)
    if workers < 2 or len(rows) < 2:
        return slice_batch(log_prob, x, logf, eta, rng, rows=rows,
                           max_expansions=max_expansions)

    def task(i):
        try:
            return slice_along(log_prob.serial, x[i], logf[i], eta[i],
                               rng.subset([rows[i]]), max_expansions=max_expansions)
        except SliceError as exc:
            exc.rows = np.array([i])
            raise

    parts = log_prob.map(task, range(len(rows)))
    return BatchSliceResult(np.array([p.new_point for p in parts]),
                            np.array([p.log_prob for p in parts]),
                            np.array([p.coefficient for p in parts]),
                            *(np.array([getattr(p, k) for p in parts], dtype=np.int64)
                              for k in ("n_expansions", "n_contractions", "n_evaluations")))


def init_strategy(config):
    if config.init == "ball":
        return Ball(config.init_center, config.init_radius)
    return config.init


def _initial_state(target, config, evaluator):
    tuning = TuningState(mu=config.mu0, max_adapt_iterations=config.adapt_max,
                         tolerance=config.adapt_tol)
    return initialize(target, config.n_walkers, init_strategy(config), config.seed, tuning,
                      evaluator)


class Recorder:
    """Accumulates every ``thin``-th state and the evaluations spent on it."""

    def __init__(self, thin=1):
        self.thin = thin
        self.samples, self.log_probs, self.evals = [], [], []
        self.mus, self.ratios = [], []
        self.pending = 0
        self.steps = 0

    def record(self, positions, log_prob, evaluations, mu=None, ratio=None):
        self.pending += evaluations
        self.steps += 1
        if mu is not None:
            self.mus.append(float(mu))
            self.ratios.append(float(ratio))
        if self.steps % self.thin == 0:
            self.samples.append(np.array(positions, dtype=float))
            self.log_probs.append(np.array(log_prob, dtype=float))
            self.evals.append(self.pending)
            self.pending = 0

    def chain(self, shape, n_init, failure=None, **info):
        n, d = shape
        if self.samples:
            samples = np.stack(self.samples)
            log_probs = np.stack(self.log_probs)
        else:
            samples, log_probs = np.empty((0, n, d)), np.empty((0, n))
        evals = np.array(self.evals, dtype=np.int64)
        if self.pending and evals.size:
            # thinned-away tail still cost evaluations
            evals[-1] += self.pending
        return ChainStore(samples, log_probs, evals, n_init, list(self.mus),
                          list(self.ratios), failure=failure, info=info)


def run(target, config=None, initial_state=None, callback=None, **overrides):
    """Run ensemble slice sampling.

    Runs ``config.n_iterations`` iterations, or, when ``config.budget`` is
    set, iterations until that many density evaluations (initialization
    excluded) have been spent. Every iteration is recorded unless
    ``config.thin > 1``. Returns the :class:`ChainStore` and a
    :class:`~ensemble_slice.diagnostics.RunReport` computed after
    discarding the ``burn_in`` fraction.

    On a failed walker update a :class:`SamplerError` is raised whose
    ``chain`` attribute holds everything recorded up to that point.
    """
    from .diagnostics import make_report

    config = replace(config or RunConfig(), **overrides)
    config.validate(target.dim)
    move = make_move(config.move, gamma=config.gamma, max_components=config.max_components)
    rec = Recorder(config.thin)
    with Evaluator(target, config.workers) as evaluator:
        state = initial_state or _initial_state(target, config, evaluator)
        n_init = evaluator.n_evaluations
        shape = state.positions.shape
        spent = 0
        while (spent < config.budget) if config.budget else (rec.steps < config.n_iterations):
            try:
                state, counts = step(state, evaluator, move, config.seed, config.max_expansions)
            except SamplerError as exc:
                exc.chain = rec.chain(shape, n_init, failure=str(exc), sampler="ess")
                raise
            spent += counts["evaluations"]
            rec.record(state.positions, state.log_prob, counts["evaluations"],
                       state.tuning.mu, state.tuning.last_ratio)
            if callback is not None:
                callback(state, counts)
    chain = rec.chain(shape, n_init, final_state=state, sampler="ess", move=move.name)
    return chain, make_report(chain, target, config)
