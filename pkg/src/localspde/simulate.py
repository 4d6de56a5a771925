"""Exact-in-distribution time stepping of the Galerkin coefficient system.

The truncated field is X(t) = sum_j x_j(t) e_j where x solves the linear SDE
dx = B x dt + d(beta_1..beta_N). On a uniform grid the transition is
x(t+dt) = Phi x(t) + xi with Phi = exp(B dt) and Gaussian xi whose covariance
is the integrated noise covariance; both are computed with the augmented
(Van Loan) matrix exponential, so the dynamics carry no time-discretization
error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import FactorizationFailure, NotDissipative
from .operators import GalerkinSystem

__all__ = ["Stepper", "CoefficientTrajectory", "build_stepper",
           "sample_initial", "stationary_covariance", "simulate_path"]

JITTER_BASE = 1e-12
JITTER_ESCALATIONS = 3


def _jittered_cholesky(Q: np.ndarray, what: str) -> np.ndarray:
    """Lower Cholesky factor after the documented jitter policy.

    Adds 1e-12 * trace(Q)/N to the diagonal, escalating by factors of 10 at
    most three times; the matrix is PSD in exact arithmetic, so any failure
    here is roundoff.
    """
    n = Q.shape[0]
    jitter = JITTER_BASE * max(np.trace(Q), np.finfo(float).tiny) / n
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            return np.linalg.cholesky(Q + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationFailure(f"{what} not factorizable within jitter budget")


@dataclass
class Stepper:
    """One-step transition of the coefficient SDE on a uniform grid.

    For diagonal drift the scalar formulas Phi = exp(-lambda dt) and
    Q = (1 - exp(-2 lambda dt)) / (2 lambda) are used directly and the
    stepping cost is linear in the basis size.
    """

    dt: float
    Phi: np.ndarray
    Q: np.ndarray
    noise_factor: np.ndarray
    diagonal: bool
    B: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.Phi.shape[-1] if self.Phi.ndim else 1


@dataclass
class CoefficientTrajectory:
    """Coefficients x of shape (n_steps + 1, N) on the uniform grid."""

    t: np.ndarray
    x: np.ndarray
    seed_info: str = ""

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self, path):
        """Debug-scale dump with columns t, x_1..x_N."""
        data = np.column_stack([self.t, self.x])
        header = "t," + ",".join(f"x_{j+1}" for j in range(self.x.shape[1]))
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def _as_drift_matrix(system) -> np.ndarray:
    if isinstance(system, GalerkinSystem):
        return system.B
    return np.atleast_2d(np.asarray(system, dtype=float))


def _diagonal_step_parts(bdiag: np.ndarray, dt: float):
    phi = np.exp(bdiag * dt)
    # (e^{2 b dt} - 1) / (2 b), continuous at b = 0 where it equals dt
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(bdiag == 0.0, dt, (np.exp(2.0 * bdiag * dt) - 1.0)
                     / np.where(bdiag == 0.0, 1.0, 2.0 * bdiag))
    return phi, q


def build_stepper(system, dt: float) -> Stepper:
    """Exact transition matrix and integrated noise covariance for step dt.

    Phi = exp(B dt) and Q = int_0^dt exp(Bs) exp(B^T s) ds are read off the
    exponential of the augmented block matrix [[B, I], [0, -B^T]].

    Raises
    ------
    FactorizationFailure
        If Q stays numerically indefinite beyond the jitter budget.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    B = _as_drift_matrix(system)
    n = B.shape[0]
    diagonal = isinstance(system, GalerkinSystem) and system.is_diagonal
    diagonal = diagonal or np.count_nonzero(B - np.diag(np.diag(B))) == 0
    if diagonal:
        phi, q = _diagonal_step_parts(np.diag(B), dt)
        return Stepper(dt=dt, Phi=phi, Q=q, noise_factor=np.sqrt(q),
                       diagonal=True, B=B)
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = B
    aug[:n, n:] = np.eye(n)
    aug[n:, n:] = -B.T
    E = scipy.linalg.expm(aug * dt)
    Phi = E[:n, :n]
    Q = E[:n, n:] @ Phi.T
    Q = 0.5 * (Q + Q.T)
    L = _jittered_cholesky(Q, "step noise covariance")
    return Stepper(dt=dt, Phi=Phi, Q=Q, noise_factor=L, diagonal=False, B=B)


def stationary_covariance(system) -> np.ndarray:
    """Solve B S + S B^T = -I for the stationary coefficient covariance.

    Raises
    ------
    NotDissipative
        If the symmetric part of B is not negative definite.
    """
    B = _as_drift_matrix(system)
    sym_top = np.linalg.eigvalsh(0.5 * (B + B.T))[-1]
    if sym_top >= 0.0:
        raise NotDissipative(f"symmetric part has top eigenvalue {sym_top}")
    if np.count_nonzero(B - np.diag(np.diag(B))) == 0:
        return np.diag(1.0 / (-2.0 * np.diag(B)))
    S = scipy.linalg.solve_continuous_lyapunov(B, -np.eye(B.shape[0]))
    return 0.5 * (S + S.T)


def sample_initial(system, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Draw the initial coefficient vector: zeros, or the stationary law."""
    B = _as_drift_matrix(system)
    n = B.shape[0]
    if mode == "zero":
        return np.zeros(n)
    if mode != "stationary":
        raise ValueError(f"unsupported initial condition {mode!r}; "
                         "only 'zero' and 'stationary' are implemented")
    S = stationary_covariance(system)
    if np.count_nonzero(B - np.diag(np.diag(B))) == 0:
        return np.sqrt(np.diag(S)) * rng.standard_normal(n)
    L = _jittered_cholesky(S, "stationary covariance")
    return L @ rng.standard_normal(n)


def simulate_path(stepper: Stepper, x0: np.ndarray, n_steps: int,
                  rng: np.random.Generator, seed_info: str = "") -> CoefficientTrajectory:
    """Simulate x(t_m), m = 0..n_steps, exactly in distribution on the grid."""
    x0 = np.asarray(x0, dtype=float)
    n = stepper.size
    if x0.shape != (n,):
        raise ValueError("initial vector has wrong length")
    out = np.empty((n_steps + 1, n))
    out[0] = x0
    noise = rng.standard_normal((n_steps, n))
    if stepper.diagonal:
        phi, s = stepper.Phi, stepper.noise_factor
        x = x0.copy()
        for m in range(n_steps):
            x = phi * x + s * noise[m]
            out[m + 1] = x
    else:
        x = x0.copy()
        for m in range(n_steps):
            x = stepper.Phi @ x + stepper.noise_factor @ noise[m]
            out[m + 1] = x
    t = stepper.dt * np.arange(n_steps + 1)
    return CoefficientTrajectory(t=t, x=out, seed_info=seed_info)
