"""dt-refinement study of the estimator's reconstruction bias.

The stepping is exact at any dt, so shrinking dt isolates the bias of the
left-endpoint Ito sums: modes with relaxation time shorter than the step
contribute a damped drift reconstruction, shifting the estimate
multiplicatively by about <xi^2>_K * dt / (2 delta^2) with the average over
the kernel's spectral weight (about 9.3 * dt/delta^2 for the bump). The
exact pseudo-true value of each discretization tracks the measured means.
Runtime: a few minutes.
"""

import numpy as np

from localspde import advection_diffusion_spec, bump_kernel, normalized
from localspde.fastsim import CanonicalEngine1D

theta = np.array([1.0, 0.5])
spec = advection_diffusion_spec(1, c=0.0)
kernel = normalized(bump_kernel(1))
delta, M = 1.0 / 16.0, 4

print(" dt_factor |   mean theta1    |  pseudo-true  | 9.3/dt_factor")
for ct in [20, 80, 320]:
    engine = CanonicalEngine1D(spec, theta, kernel, delta, M, T=1.0,
                               dt=delta ** 2 / ct, n_modes=64)
    batch = engine.run(100, seed=ct)
    mean = batch.theta_hat[batch.flags, 0].mean()
    se = batch.theta_hat[batch.flags, 0].std() / np.sqrt(batch.flags.sum())
    star = engine.pseudo_true()[0]
    print(f"  {ct:7d}  | {mean:.4f} +- {se:.4f} |    {star:.4f}     |"
          f"   {1 - 9.3 / ct:.4f}")
print("halving dt halves the bias; the Fisher matrix itself is a")
print("trapezoid of products and carries no such damping.")
