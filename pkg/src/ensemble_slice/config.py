"""Run configuration shared by the samplers and the experiment harness."""

from dataclasses import asdict, dataclass, field, fields
import json

__all__ = ["RunConfig", "ConfigError", "SAMPLERS"]

SAMPLERS = ("ess", "metropolis", "slice", "stretch", "demc")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce one sampler run.

    ``budget`` caps density evaluations for baselines (``None`` = use
    ``n_iterations``). ``init`` is ``"prior"``, ``"ball"`` or ``"normal"``
    (independent N(0, 1) coordinates).
    """

    target: str = "normal"
    target_params: dict = field(default_factory=dict)
    sampler: str = "ess"
    move: str = "differential"
    n_walkers: int = 4
    n_iterations: int = 1000
    burn_in: float = 0.5
    seed: int = 0
    workers: int = 1
    gamma: float = 0.001
    adapt_max: int = 100
    adapt_tol: float = 0.05
    mu0: float = 1.0
    thin: int = 1
    init: str = "prior"
    init_center: float = 0.0
    init_radius: float = 1e-3
    budget: int = None
    n_chains: int = 1
    proposal_scale: float = None
    stretch_a: float = 2.0
    demc_gamma: float = None
    snooker_probability: float = 0.1
    axis_policy: str = "component_cycle"
    max_components: int = None
    max_expansions: int = 10000
    out: str = None
    label: str = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def validate(self, dim=None):
        """Check preconditions that do not need the target built."""
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}; choose from {SAMPLERS}")
        if self.move not in ("differential", "gaussian", "global"):
            raise ConfigError(f"unknown move {self.move!r}")
        if self.n_iterations < 0:
            raise ConfigError("n_iterations must be >= 0")
        if not 0 <= self.burn_in < 1:
            raise ConfigError("burn_in must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.max_expansions < 1:
            raise ConfigError("max_expansions must be >= 1")
        if self.mu0 <= 0:
            raise ConfigError("mu0 must be positive")
        if not 0 < self.adapt_tol < 0.5:
            raise ConfigError("adapt_tol must lie in (0, 0.5)")
        if self.stretch_a <= 1:
            raise ConfigError("stretch_a must exceed 1")
        if not 0 <= self.snooker_probability <= 1:
            raise ConfigError("snooker_probability must lie in [0, 1]")
        if self.init not in ("prior", "ball", "normal"):
            raise ConfigError(f"unknown init strategy {self.init!r}")
        if self.sampler in ("ess", "stretch", "demc") and dim is not None:
            if self.n_walkers < 2 * dim or self.n_walkers % 2:
                raise ConfigError(
                    f"n_walkers={self.n_walkers} invalid: need an even number "
                    f">= 2 x D = {2 * dim} walkers")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")
        return self
