"""Length-scale adaptation from very different starting values.

On a 20-D correlated normal the expansion/contraction rule brings mu to the
same neighbourhood within a few iterations, whether it starts 1000 times too
small or too large. Run with ``python3 demos/length_scale_adaptation.py``.
"""

from ensemble_slice import RunConfig, make_target, run

target = make_target("correlated_normal", dim=20)
for mu0 in (1e-3, 1e-1, 10.0, 1e3):
    chain, _ = run(target, RunConfig(n_walkers=40, n_iterations=30, mu0=mu0, seed=3))
    path = " ".join(f"{m:.3g}" for m in chain.mu_trajectory[:12])
    print(f"mu0={mu0:<8g} {path}")
