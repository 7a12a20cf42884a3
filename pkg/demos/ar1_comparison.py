"""Compare ensemble slice sampling with Metropolis and standard slice sampling.

All three samplers get the same budget of density evaluations on a 10-D
AR(1) target with lag-one correlation 0.95. Run with ``python3
demos/ar1_comparison.py``; it takes about a minute.
"""

from ensemble_slice import RunConfig, make_target, run
from ensemble_slice.baselines import run_baseline
from ensemble_slice.cli import format_table

target = make_target("ar1", dim=10, alpha=0.95)
budget = dict(budget=5 * 10**5, seed=0)

rows = []
_, report = run(target, RunConfig(n_walkers=20, **budget))
rows.append({"label": "ess", **report.to_dict()})
for sampler in ("metropolis", "slice"):
    _, report = run_baseline(target, RunConfig(sampler=sampler, n_chains=20, **budget))
    rows.append({"label": sampler, **report.to_dict()})

print(format_table(rows))
