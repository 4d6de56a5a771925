"""Confidence sets and the reaction test.

Coverage of the joint chi-squared ellipsoid is checked by simulation at a
resolution where the dt-bias is negligible; the reaction-test size and
power come from the estimator's limit law in the d=3 regime where the test
is calibrated (the d=3 field itself is outside the simulator's scope).
"""

import numpy as np

from localspde import advection_diffusion_spec, bump_kernel, normalized
from localspde.experiments import (ExperimentConfig, batch_coverage,
                                   run_reaction_test)
from localspde.fastsim import CanonicalEngine1D

theta = np.array([1.0, 0.5])
spec = advection_diffusion_spec(1, c=0.0)
kernel = normalized(bump_kernel(1))

delta = 1.0 / 16.0
engine = CanonicalEngine1D(spec, theta, kernel, delta, 4, T=1.0,
                           dt=delta ** 2 / 2100.0, n_modes=64)
batch = engine.run(150, seed=613)
cover, se, n = batch_coverage(batch, theta, alpha=0.05, p=2)
print(f"95% confidence-set coverage over {n} replicates: "
      f"{cover:.3f} +- {se:.3f}")

cfg = ExperimentConfig(
    kind="reaction-test", theta=[1.0, 0.5, 0.0], dim=3, with_reaction=True,
    deltas=[1.0 / 32.0], m_rule={"kind": "per-delta-inverse-d", "c": 1 / 16},
    T=4.0, replicates=2000, alpha=0.05, theta3_grid=[0.0, -2.0, -5.0],
    seed=5)
res = run_reaction_test(cfg)
for row in res["results"]:
    label = "size" if row["theta3"] == 0.0 else "power"
    print(f"theta3 = {row['theta3']:+.1f}: one-sided {label} "
          f"{row['reject_one_sided']:.3f} "
          f"(two-sided form: {row['reject_two_sided']:.3f})")
