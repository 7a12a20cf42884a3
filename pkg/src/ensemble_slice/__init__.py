"""Ensemble slice sampling with differential, Gaussian and mixture-informed moves."""

from .config import ConfigError, RunConfig
from .diagnostics import (ChainTooShortError, RunReport, autocorrelation, efficiency,
                          ensemble_iat, integrated_autocorrelation_time, make_report)
from .ensemble import (Ball, ChainStore, EnsembleState, SamplerError, initialize, run,
                       step)
from .mixture import MixtureFit, fit_dpgm
from .moves import (DegenerateEnsembleError, DifferentialMove, GaussianMove, GlobalMove,
                    differential_move, gaussian_move, global_move, make_move)
from .numerics import NotPositiveDefiniteError, RngStream, philox4x32
from .slice import (InvalidStateError, SliceError, SliceUpdateResult, UnboundedSliceError,
                    slice_along, slice_batch)
from .targets import TARGETS, Evaluator, LogDensityTarget, make_target
from .tuning import TuningState, tune_length_scale

__version__ = "0.1.0"
