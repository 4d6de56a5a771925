import numpy as np
import pytest

from localspde.errors import Divergent, SingularInformation
from localspde.estimator import (augmented_mle, fisher_and_score,
                                 observed_fisher, rate_matrix,
                                 standardized_error)
from localspde.fourier import asymptotic_sigma, fractional_norm_sq
from localspde.kernels import KernelSpec, normalized
from localspde.measurements import MeasurementPath
from localspde.operators import OperatorSpec, advection_diffusion_spec
from localspde.simulate import build_stepper, simulate_path


def _path_from_arrays(t, X, XA, XA0, knorm=1.0):
    return MeasurementPath(t=t, X=X, XA=XA, XA0=XA0, knorm=knorm)


def test_fisher_constant_channels():
    # constant X^A = c over M measurements: I = M c^2 T
    M, n, c, T = 3, 50, 1.7, 2.0
    t = np.linspace(0.0, T, n + 1)
    XA = np.full((1, M, n + 1), c)
    path = _path_from_arrays(t, np.zeros((M, n + 1)), XA,
                             np.zeros((M, n + 1)))
    I = observed_fisher(path)
    assert I[0, 0] == pytest.approx(M * c ** 2 * T)


def test_fisher_psd():
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 1.0, 101)
    XA = rng.normal(size=(3, 2, 101))
    path = _path_from_arrays(t, np.zeros((2, 101)), XA, np.zeros((2, 101)))
    I = observed_fisher(path)
    assert np.min(np.linalg.eigvalsh(I)) >= -1e-10 * np.trace(I)


def test_fisher_refinement_on_frozen_trajectory(example1_spec, unit_bump1):
    # halving dt on a frozen trajectory moves I by < 0.1 % (trapezoid error)
    from localspde.measurements import (design_grid, extract_measurements,
                                        project_kernel)
    from localspde.operators import galerkin_drift

    system = galerkin_drift(example1_spec, [1.0, 0.5], 48)
    st = build_stepper(system, 5e-5)
    rng = np.random.default_rng(3)
    from localspde.simulate import sample_initial

    x0 = sample_initial(system, "stationary", rng)
    traj = simulate_path(st, x0, 4000, rng)
    design = design_grid(unit_bump1, 0.125, 2, 0.25)
    tens = project_kernel(design, example1_spec, system)
    path_fine = extract_measurements(traj, tens, 1.0)
    from localspde.simulate import CoefficientTrajectory

    coarse = CoefficientTrajectory(t=traj.t[::2], x=traj.x[::2])
    path_coarse = extract_measurements(coarse, tens, 1.0)
    I_f = observed_fisher(path_fine)
    I_c = observed_fisher(path_coarse)
    rel = np.linalg.norm(I_f - I_c) / np.linalg.norm(I_f)
    assert rel < 1e-3


def test_zero_noise_exact_recovery():
    # path built to satisfy dX = (theta . XA + XA0) dt exactly on the grid,
    # with matching boundary values so that left and trapezoid sums agree
    rng = np.random.default_rng(1)
    theta = np.array([1.3, -0.4])
    M, n = 3, 512
    dt = 1.0 / n
    t = dt * np.arange(n + 1)
    base = np.stack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t) ** 2],
                    axis=0)
    XA = np.stack([base + rng.normal(size=(2, 1)) for _ in range(M)], axis=1)
    XA0 = np.tile(0.25 + np.sin(4 * np.pi * t), (M, 1))
    drift = np.einsum("i,ikm->km", theta, XA) + XA0
    X = np.zeros((M, n + 1))
    X[:, 1:] = np.cumsum(drift[:, :-1] * dt, axis=1)
    path = _path_from_arrays(t, X, XA, XA0)
    report = augmented_mle(path)
    assert np.max(np.abs(report.theta_hat - theta)) < 1e-8


def test_ou_toy_matches_classical_mle():
    # single-channel toy where X itself is an OU coefficient; the augmented
    # MLE with A_1 = identity must match the classical drift MLE computed
    # from the closed-form Ito identity int X dX = (X_T^2 - X_0^2 - [X])/2
    lam = 3.0
    dt = 1e-4
    n = 20000
    st = build_stepper(np.array([[-lam]]), dt)
    rng = np.random.default_rng(8)
    traj = simulate_path(st, np.array([1.0 / np.sqrt(2 * lam)]), n, rng)
    y = traj.x[:, 0]
    t = traj.t
    X = y[None, :]
    XA = X[None, :, :]                      # A_1 = identity
    XA0 = np.zeros_like(X)
    path = _path_from_arrays(t, X, XA, XA0)
    report = augmented_mle(path)
    qv = np.sum(np.diff(y) ** 2)
    ito_closed = 0.5 * (y[-1] ** 2 - y[0] ** 2 - qv)
    denom = np.trapezoid(y ** 2, t)
    classical = ito_closed / denom
    # same data, independent formula; they differ only through the
    # quadrature rule of the denominator
    assert report.theta_hat[0] == pytest.approx(classical, abs=5e-3)
    assert report.theta_hat[0] == pytest.approx(-lam, abs=0.6)


def test_rate_matrix_values():
    assert np.allclose(rate_matrix(0.1, 100, [2, 1, 0]), [0.01, 0.1, 1.0])
    assert rate_matrix(0.37, 1, [1])[0] == pytest.approx(1.0)
    assert rate_matrix(1 / 64, 64, [2])[0] == pytest.approx(64.0 ** -1.5)


def test_sigma_example1_entries(unit_bump1, example1_spec):
    theta = [1.25, 0.5]
    T = 1.7
    sigma = asymptotic_sigma(unit_bump1, example1_spec, theta, T)
    pref = T / (2 * theta[0])
    assert sigma[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert sigma[0, 0] == pytest.approx(pref * unit_bump1.grad_norm ** 2,
                                        rel=1e-9)
    # d=1: ||(-Lap)^{-1/2} d K|| = ||K||, so the transport entry is pref
    assert sigma[1, 1] == pytest.approx(pref, rel=1e-6)


def test_sigma_example2_entries(unit_bump3, example2_spec3d):
    theta = [1.0, 0.5, -1.0]
    T = 1.0
    sigma = asymptotic_sigma(unit_bump3, example2_spec3d, theta, T)
    assert sigma[0, 2] == pytest.approx(-T / (2 * theta[0]), rel=1e-9)
    assert abs(sigma[0, 1]) < 1e-6 and abs(sigma[1, 2]) < 1e-6
    # radial identity: transport entry is ||K||^2 / d
    assert sigma[1, 1] == pytest.approx(T / (2 * theta[0]) / 3.0, rel=1e-6)
    assert np.min(np.linalg.eigvalsh(sigma)) > 0.0


def test_sigma_divergent_for_order_zero_pair_d1(unit_bump1):
    spec = advection_diffusion_spec(1, with_reaction=True)
    with pytest.raises(Divergent):
        asymptotic_sigma(unit_bump1, spec, [1.0, 0.5, -0.5], 1.0)


def test_fractional_norm_zero_moment_kernel(zero_moment2, bump2):
    # the zero-moment kernel makes |xi|^{-2}|Khat|^2 integrable in d=2
    unit = normalized(zero_moment2)
    val = fractional_norm_sq(unit, -1.0)
    assert val > 0.0
    with pytest.raises(Divergent):
        fractional_norm_sq(normalized(bump2), -1.0)


def test_leading_order_gram_and_independence(unit_bump1, example1_spec):
    from localspde.fourier import (check_leading_independence,
                                   leading_order_gram)

    gram = leading_order_gram(unit_bump1, example1_spec)
    # diagonal entries are ||Lap K||^2 and ||dK||^2 for the unit-norm bump
    assert gram[0, 0] == pytest.approx(unit_bump1.lap_norm ** 2, rel=1e-8)
    assert gram[1, 1] == pytest.approx(unit_bump1.grad_norm ** 2, rel=1e-8)
    assert gram[0, 1] == 0.0  # opposite parity
    det = check_leading_independence(unit_bump1, example1_spec)
    assert det > 1e-10


@pytest.mark.slow
def test_monte_carlo_consistency(unit_bump1, example1_spec):
    # mean(theta_hat) within 3 s.e. of theta once dt resolves the kernel's
    # fastest relaxation scale (dt = delta^2/4000 here)
    from localspde.fastsim import CanonicalEngine1D

    theta = np.array([1.0, 0.5])
    delta = 1.0 / 8.0
    eng = CanonicalEngine1D(example1_spec, theta, unit_bump1, delta, 2, 1.0,
                            delta ** 2 / 4000.0, n_modes=32)
    batch = eng.run(200, seed=4)
    th = batch.theta_hat[batch.flags]
    se = th.std(0, ddof=1) / np.sqrt(len(th))
    assert np.all(np.abs(th.mean(0) - theta) < 3.0 * se)


def test_standardized_error_trivial():
    report = augmented_mle.__wrapped__ if False else None
    from localspde.estimator import EstimateReport

    rep = EstimateReport(theta_hat=np.array([1.0, 0.5]),
                         fisher=np.diag([4.0, 9.0]), cond=2.25,
                         rho=np.array([0.5, 1.0 / 3.0]))
    err = standardized_error(rep, [1.0, 0.5])
    assert np.allclose(err, 0.0)
    # p = 1 with I = rho^{-2}: the prefactor (rho I rho)^{1/2} is 1 and the
    # standardized error reduces to rho^{-1}(theta_hat - theta)
    rep1 = EstimateReport(theta_hat=np.array([2.0]),
                          fisher=np.array([[16.0]]), cond=1.0,
                          rho=np.array([0.25]))
    err1 = standardized_error(rep1, [1.5])
    assert err1[0] == pytest.approx(0.5 / 0.25)


def test_singular_information():
    t = np.linspace(0.0, 1.0, 11)
    XA = np.zeros((2, 1, 11))
    XA[0, 0] = 1.0
    XA[1, 0] = 1.0  # perfectly collinear channels
    path = _path_from_arrays(t, np.zeros((1, 11)), XA, np.zeros((1, 11)))
    with pytest.raises(SingularInformation):
        augmented_mle(path)


def test_kernel_scale_equivariance():
    # multiplying K by a scalar multiplies all channels by it and leaves
    # theta_hat unchanged: exact identity on a frozen path
    rng = np.random.default_rng(5)
    t = np.linspace(0.0, 1.0, 201)
    X = rng.normal(size=(2, 201)).cumsum(axis=1) * 0.05
    XA = rng.normal(size=(2, 2, 201))
    XA0 = rng.normal(size=(2, 201))
    path = _path_from_arrays(t, X, XA, XA0)
    scaled = _path_from_arrays(t, 3.0 * X, 3.0 * XA, 3.0 * XA0, knorm=3.0)
    r1 = augmented_mle(path)
    r2 = augmented_mle(scaled)
    assert np.allclose(r1.theta_hat, r2.theta_hat, rtol=1e-12)


def test_error_decomposition_identity():
    # theta_hat - theta = I^{-1} * (left-point sum of X^A against the
    # reconstructed noise increments), to discretization tolerance
    rng = np.random.default_rng(6)
    theta = np.array([0.8, -0.2])
    M, n = 2, 2000
    dt = 1.0 / n
    t = dt * np.arange(n + 1)
    XA = rng.normal(size=(2, M, n + 1)).cumsum(axis=2) * np.sqrt(dt)
    XA0 = rng.normal(size=(M, n + 1)).cumsum(axis=1) * np.sqrt(dt)
    noise = rng.normal(size=(M, n)) * np.sqrt(dt)
    X = np.zeros((M, n + 1))
    drift = np.einsum("i,ikm->km", theta, XA) + XA0
    X[:, 1:] = np.cumsum(drift[:, :-1] * dt + noise, axis=1)
    path = _path_from_arrays(t, X, XA, XA0)
    report = augmented_mle(path)
    fisher, _, _ = fisher_and_score(path)
    recon = np.einsum("ikm,km->i", XA[:, :, :-1], noise)
    identity_rhs = np.linalg.solve(fisher, recon)
    assert np.allclose(report.theta_hat - theta, identity_rhs, atol=5e-3)


def test_report_csv_and_summary():
    from localspde.estimator import EstimateReport

    rep = EstimateReport(theta_hat=np.array([1.0, 2.0]),
                         fisher=np.eye(2), cond=1.0,
                         rho=np.array([1.0, 1.0]),
                         meta={"dt": 0.1})
    row = rep.csv_row().split(",")
    header = rep.csv_header().split(",")
    assert len(row) == len(header)
    assert "theta_hat = " in rep.summary()
