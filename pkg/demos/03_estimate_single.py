"""One replicate of the augmented MLE on the canonical two-parameter model.

The estimator is the closed-form ratio of the Ito score to the observed
Fisher information. With dt = delta^2/400 the reconstruction bias of the
left-endpoint sums is about 2% of theta_1 (the dt-refinement demo
quantifies the law); the exact pseudo-true value of the discrete scheme is
printed alongside.
"""

import numpy as np

from localspde import advection_diffusion_spec, bump_kernel, normalized
from localspde.estimator import augmented_mle, standardized_error
from localspde.fastsim import CanonicalEngine1D
from localspde.measurements import MeasurementPath

theta = np.array([1.0, 0.5])
spec = advection_diffusion_spec(1, c=0.0)
kernel = normalized(bump_kernel(1))
delta, M = 1.0 / 32.0, 8

engine = CanonicalEngine1D(spec, theta, kernel, delta, M, T=1.0,
                           dt=delta ** 2 / 400.0, n_modes=128)
t, frames = engine.run_single_path(seed=42)
X = frames[:, :M].T
XA = np.stack([frames[:, M * (1 + i):M * (2 + i)].T for i in range(2)])
path = MeasurementPath(t=t, X=X, XA=XA, XA0=np.zeros_like(X), knorm=1.0)

report = augmented_mle(path, delta=delta, M=M, orders=spec.orders[1:])
standardized_error(report, theta)
print(report.summary())
print("pseudo-true value of this discretization:", engine.pseudo_true())
