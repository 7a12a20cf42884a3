"""Stochastic-approximation tuning of the initial length scale."""

from dataclasses import dataclass, replace

__all__ = ["TuningState", "tune_length_scale", "FACTOR_BOUNDS"]

FACTOR_BOUNDS = (0.1, 2.0)


@dataclass(frozen=True)
class TuningState:
    """Length scale ``mu`` plus the bookkeeping needed to stop adapting.

    ``iteration`` counts the updates applied so far. Once ``frozen`` is set
    it never clears, which bounds the adaptive phase.
    """

    mu: float = 1.0
    iteration: int = 0
    max_adapt_iterations: int = 100
    tolerance: float = 0.05
    frozen: bool = False
    last_ratio: float = float("nan")

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 < self.tolerance < 0.5:
            raise ValueError("tolerance must lie in (0, 0.5)")


def tune_length_scale(state, n_expansions, n_contractions):
    """Apply one update ``mu <- 2 mu Ne / (Ne + Nc)``.

    The multiplicative factor is clamped to ``FACTOR_BOUNDS`` and an
    iteration without any expansion or contraction leaves ``mu`` alone.
    Adaptation freezes once the expansion fraction is within ``tolerance``
    of 1/2 or after ``max_adapt_iterations`` updates.
    """
    if n_expansions < 0 or n_contractions < 0:
        raise ValueError("counts must be non-negative")
    if state.frozen:
        return state
    total = n_expansions + n_contractions
    iteration = state.iteration + 1
    if total == 0:
        return replace(state, iteration=iteration,
                       frozen=iteration >= state.max_adapt_iterations)
    ratio = n_expansions / total
    lo, hi = FACTOR_BOUNDS
    factor = min(max(2.0 * ratio, lo), hi)
    frozen = abs(ratio - 0.5) <= state.tolerance or iteration >= state.max_adapt_iterations
    return replace(state, mu=state.mu * factor, iteration=iteration,
                   frozen=frozen, last_ratio=ratio)
