import numpy as np
import pytest

from localspde.estimator import fisher_and_score, rate_matrix
from localspde.fastsim import (CanonicalEngine1D, ReactionEngine2D,
                               replicate_rng)
from localspde.kernels import bump_kernel, normalized
from localspde.measurements import MeasurementPath, project_kernel
from localspde.operators import galerkin_drift


def _path_from_frames(t, frames, M, p, with_a0):
    X = frames[:, :M].T
    XA = np.stack([frames[:, M + i * M:M + (i + 1) * M].T
                   for i in range(p)], axis=0)
    XA0 = (frames[:, (1 + p) * M:(2 + p) * M].T if with_a0
           else np.zeros_like(X))
    return MeasurementPath(t=t, X=X, XA=XA, XA0=XA0, knorm=1.0)


def test_streaming_accumulator_matches_path_estimator(example1_spec,
                                                      unit_bump1):
    eng = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                            delta=1 / 8, M=2, T=0.25, dt=1e-3, n_modes=48)
    t, frames = eng.run_single_path(seed=3)
    path = _path_from_frames(t, frames, 2, 2, eng.with_a0)
    fisher, ito, drift = fisher_and_score(path)
    batch = eng.run(1, seed=3)
    assert np.max(np.abs(batch.fisher[0] - fisher)) < 1e-12 * np.trace(fisher)
    theta = np.linalg.solve(fisher, ito - drift)
    assert np.allclose(batch.theta_hat[0], theta, atol=1e-12)


def test_channels_match_projection_tensors_when_self_adjoint(example1_spec,
                                                             unit_bump1):
    eng = CanonicalEngine1D(example1_spec, [1.0, 0.0], unit_bump1,
                            delta=1 / 8, M=2, T=0.1, dt=1e-3, n_modes=48)
    system = galerkin_drift(example1_spec, [1.0, 0.0], 48)
    tens = project_kernel(eng.design, example1_spec, system,
                          method="profile")
    assert np.max(np.abs(eng.identity_coeffs - tens.identity)) < 1e-12
    assert np.max(np.abs(eng.channels[2:4] - tens.ops[1])) < 1e-10


def test_channel_tensors_with_transport_vs_quadrature(example1_spec,
                                                      unit_bump1):
    # <A phi_j, K_k> with phi_j = e^{-w y} e_j against direct quadrature
    from localspde.quad import gauss_legendre

    eng = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                            delta=1 / 8, M=2, T=0.1, dt=1e-3, n_modes=24)
    w = eng.w
    k = 1
    ker = eng.design.scaled(k)
    x0 = eng.design.locations[k, 0]
    nodes, wts = gauss_legendre(x0 - 1 / 8, x0 + 1 / 8, 220)
    kv = ker(nodes[:, None]) * wts
    for j in [1, 5, 17]:
        phi = np.exp(-w * nodes) * np.sqrt(2) * np.sin(j * np.pi * nodes)
        direct = float(np.sum(kv * phi))
        assert eng.identity_coeffs[k, j - 1] == pytest.approx(direct,
                                                              abs=1e-12)
        dphi = np.exp(-w * nodes) * np.sqrt(2) * (
            j * np.pi * np.cos(j * np.pi * nodes)
            - w * np.sin(j * np.pi * nodes))
        direct_d = float(np.sum(kv * dphi))
        assert eng.channels[2 * 2 + k, j - 1] == pytest.approx(direct_d,
                                                               abs=1e-12)


def test_noise_variance_is_unit(example1_spec, unit_bump1):
    eng = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                            delta=1 / 8, M=2, T=0.1, dt=1e-3, n_modes=64)
    assert eng.noise_mode == "dst"
    dev = np.max(np.abs(eng.noise_variance_check() - 1.0))
    assert dev < 1e-4


def test_dst_noise_matches_exact_factor_statistically(example1_spec,
                                                      unit_bump1):
    # compare channel second moments under the dst noise and the dense
    # exact factor over a short horizon
    kwargs = dict(delta=1 / 8, M=2, T=0.125, dt=2e-3, n_modes=40)
    eng_dst = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                                noise="dst", **kwargs)
    eng_ex = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                               noise="exact", **kwargs)
    reps = 300
    second = {"dst": np.zeros(2), "exact": np.zeros(2)}
    for name, eng in [("dst", eng_dst), ("exact", eng_ex)]:
        acc = []
        for rep in range(reps):
            t, frames = eng.run_single_path(seed=50 + rep)
            acc.append(np.mean(frames[:, :2] ** 2, axis=0))
        second[name] = np.mean(acc, axis=0), np.std(acc, axis=0) / np.sqrt(reps)
    diff = np.abs(second["dst"][0] - second["exact"][0])
    se = np.sqrt(second["dst"][1] ** 2 + second["exact"][1] ** 2)
    assert np.all(diff < 4.0 * se + 1e-12)


def test_pseudo_true_matches_monte_carlo(example1_spec, unit_bump1):
    eng = CanonicalEngine1D(example1_spec, [1.0, 0.5], unit_bump1,
                            delta=1 / 16, M=4, T=1.0,
                            dt=(1 / 16) ** 2 / 20.0, n_modes=64)
    star = eng.pseudo_true()
    batch = eng.run(120, seed=17)
    th = batch.theta_hat[batch.flags]
    se = th.std(0) / np.sqrt(len(th))
    assert np.all(np.abs(th.mean(0) - star) < 4.0 * se + 1e-3)


def test_fast_vs_dense_engine_statistics(example1_spec, unit_bump1):
    # the streaming engine agrees with the exact Van Loan pipeline in law
    from localspde.estimator import augmented_mle
    from localspde.measurements import extract_measurements
    from localspde.simulate import build_stepper, sample_initial, simulate_path

    theta = np.array([1.0, 0.5])
    delta, M, Nm = 1 / 16, 4, 64
    dt = delta ** 2 / 20.0
    n = int(round(1.0 / dt))
    R = 80
    eng = CanonicalEngine1D(example1_spec, theta, unit_bump1, delta, M, 1.0,
                            dt, Nm)
    fast = eng.run(R, seed=42)
    system = galerkin_drift(example1_spec, theta, Nm)
    stepper = build_stepper(system, dt)
    tens = project_kernel(eng.design, example1_spec, system)
    rho = rate_matrix(delta, M, [2, 1])
    ths, scaled = [], []
    for rep in range(R):
        rng = replicate_rng(1042, rep)
        x0 = sample_initial(system, "stationary", rng)
        traj = simulate_path(stepper, x0, n, rng)
        path = extract_measurements(traj, tens, 1.0)
        report = augmented_mle(path)
        ths.append(report.theta_hat)
        scaled.append(report.fisher * np.outer(rho, rho))
    ths = np.asarray(ths)
    scaled = np.asarray(scaled)
    fast_th = fast.theta_hat[fast.flags]
    se = np.sqrt(ths.std(0) ** 2 / R + fast_th.std(0) ** 2 / len(fast_th))
    assert np.all(np.abs(ths.mean(0) - fast_th.mean(0)) < 4.0 * se)
    fast_scaled = fast.fisher[fast.flags] * np.outer(rho, rho)[None]
    dd = np.diagonal(scaled.mean(0)) - np.diagonal(fast_scaled.mean(0))
    sed = np.sqrt(np.diagonal(np.var(scaled, axis=0)) / R
                  + np.diagonal(np.var(fast_scaled, axis=0)) / len(fast_th))
    assert np.all(np.abs(dd) < 4.0 * sed)


def test_replicate_rng_reproducible():
    a = replicate_rng(7, 3).standard_normal(5)
    b = replicate_rng(7, 3).standard_normal(5)
    c = replicate_rng(7, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_reaction_engine_2d_variance(bump2):
    # zero-init variance of the measurement at time T against the analytic
    # truncated value sum g^2 (1 - e^{-2 lam T}) / (2 lam)
    kern = normalized(bump2)
    eng = ReactionEngine2D(theta=-0.5, kernel=kern, delta=1 / 8, side=2,
                           T=0.25, dt=1e-3, n_side=16)
    reps = 600
    vals = []
    for rep in range(reps):
        rng = replicate_rng(5, rep)
        y = np.zeros(len(eng.mu))
        phi = np.exp(eng.mu * eng.dt)
        s = np.sqrt(np.where(eng.mu == 0, eng.dt,
                             np.expm1(2 * eng.mu * eng.dt) / (2 * eng.mu)))
        from localspde.fastsim import _ar_scan

        buf = rng.standard_normal((eng.n_steps, len(eng.mu)))
        _ar_scan(y, phi, s, buf)
        X, _ = eng._extract(y[None, :])
        vals.append(X[0])
    vals = np.asarray(vals)
    # analytic variance from the profile tensors
    prof = eng.profile
    lam = (eng.lam_axis[:, None] + eng.lam_axis[None, :]) - eng.theta
    xk = np.unique(eng.design.locations[:, 0])
    j = np.arange(1, eng.n_side + 1)
    var = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            g = (np.sqrt(2) * np.sin(np.pi * j * xk[a]))[:, None] * \
                (np.sqrt(2) * np.sin(np.pi * j * xk[b]))[None, :] * prof
            var[a, b] = np.sum(g ** 2 * (1 - np.exp(-2 * lam * 0.25))
                               / (2 * lam))
    emp = np.var(vals, axis=0).reshape(2, 2)
    se = var * np.sqrt(2.0 / reps)
    assert np.all(np.abs(emp - var) < 4 * se)


def test_reaction_engine_estimator_runs(bump2):
    kern = normalized(bump2)
    eng = ReactionEngine2D(theta=-0.5, kernel=kern, delta=1 / 8, side=2,
                           T=0.5, dt=5e-4, n_side=16)
    batch = eng.run(3, seed=9)
    assert batch.clean_fraction == 1.0
    assert np.all(np.isfinite(batch.theta_hat[batch.flags]))
