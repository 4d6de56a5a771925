"""The augmented maximum-likelihood estimator and its standardization.

Stochastic integrals against the measurement increments use left-endpoint
Riemann sums (the Ito convention; any other endpoint would bias the drift
estimate), ordinary time integrals use the trapezoidal rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInformation
from .measurements import MeasurementPath

__all__ = ["EstimateReport", "observed_fisher", "augmented_mle",
           "rate_matrix", "standardized_error", "CONDITION_CAP",
           "fisher_and_score"]

CONDITION_CAP = 1e12


def _trapezoid_weights(n_points: int, dt: float) -> np.ndarray:
    w = np.full(n_points, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def fisher_and_score(path: MeasurementPath):
    """Observed Fisher information and the two pieces of the score.

    Returns (I, ito, drift) where
      I[i, j]  = sum_k int X^{A_i}_k X^{A_j}_k dt          (trapezoid),
      ito[i]   = sum_k sum_m X^{A_i}_k(t_m) dX_k(t_m)      (left-point sums),
      drift[i] = sum_k int X^{A_i}_k X^{A_0}_k dt          (trapezoid).
    """
    w = _trapezoid_weights(path.X.shape[1], path.dt)
    fisher = np.einsum("ikm,jkm,m->ij", path.XA, path.XA, w)
    fisher = 0.5 * (fisher + fisher.T)
    increments = np.diff(path.X, axis=1)  # (M, n)
    ito = np.einsum("ikm,km->i", path.XA[:, :, :-1], increments)
    drift = np.einsum("ikm,km,m->i", path.XA, path.XA0, w)
    return fisher, ito, drift


def observed_fisher(path: MeasurementPath) -> np.ndarray:
    """I[i, j] = sum_k int_0^T X^{A_i}_k X^{A_j}_k dt, trapezoidal in time."""
    return fisher_and_score(path)[0]


def rate_matrix(delta: float, M: int, orders) -> np.ndarray:
    """Diagonal of the scaling matrix: rho_ii = M^{-1/2} delta^{n_i - 1}."""
    orders = np.asarray(orders, dtype=float)
    return M ** (-0.5) * delta ** (orders - 1.0)


@dataclass
class EstimateReport:
    """Estimate, observed information, scalings and standardization.

    `meta` records the discretization (dt, basis size, quadrature settings)
    so every number is recomputable.
    """

    theta_hat: np.ndarray
    fisher: np.ndarray
    cond: float
    rho: np.ndarray = None
    sigma: np.ndarray = None
    standardized: np.ndarray = None
    knorm: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.theta_hat)

    def csv_header(self) -> str:
        p = self.p
        cols = [f"theta_hat_{i+1}" for i in range(p)]
        cols += [f"fisher_{i+1}{j+1}" for i in range(p) for j in range(p)]
        cols += ["cond", "knorm"]
        cols += [f"rho_{i+1}" for i in range(p)]
        cols += [f"std_err_{i+1}" for i in range(p)]
        return ",".join(cols)

    def csv_row(self) -> str:
        p = self.p
        vals = list(self.theta_hat) + list(self.fisher.ravel())
        vals += [self.cond, self.knorm]
        vals += list(self.rho) if self.rho is not None else [np.nan] * p
        vals += (list(self.standardized) if self.standardized is not None
                 else [np.nan] * p)
        return ",".join(format(v, ".17g") for v in vals)

    def summary(self) -> str:
        lines = [f"theta_hat = {np.array2string(self.theta_hat, precision=6)}",
                 f"cond(I)   = {self.cond:.3e}"]
        if self.standardized is not None:
            lines.append(
                f"standardized error = "
                f"{np.array2string(self.standardized, precision=4)}")
        for key, val in sorted(self.meta.items()):
            lines.append(f"{key} = {val}")
        return "\n".join(lines)


def augmented_mle(path: MeasurementPath, delta: float = None, M: int = None,
                  orders=None, condition_cap: float = CONDITION_CAP,
                  meta: dict = None) -> EstimateReport:
    """Closed-form estimator I^{-1} (Ito score - A_0 drift correction).

    Raises
    ------
    SingularInformation
        If cond(I) exceeds `condition_cap`; the replicate should be flagged
        rather than silently inverted.
    """
    fisher, ito, drift = fisher_and_score(path)
    cond = float(np.linalg.cond(fisher))
    if not np.isfinite(cond) or cond > condition_cap:
        raise SingularInformation(f"cond(I) = {cond:.3e} exceeds cap")
    theta_hat = np.linalg.solve(fisher, ito - drift)
    rho = None
    if delta is not None and M is not None and orders is not None:
        rho = rate_matrix(delta, M, orders)
    report_meta = {"dt": path.dt, "n_steps": path.X.shape[1] - 1,
                   "M": path.M}
    if meta:
        report_meta.update(meta)
    return EstimateReport(theta_hat=theta_hat, fisher=fisher, cond=cond,
                          rho=rho, knorm=path.knorm, meta=report_meta)


def _spd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.maximum(vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.T


def standardized_error(report: EstimateReport, theta_true) -> np.ndarray:
    """(rho I rho)^{1/2} rho^{-1} (theta_hat - theta); asymptotically
    N(0, ||K||^2 Id) under the CLT."""
    if report.rho is None:
        raise ValueError("report carries no rate matrix")
    theta_true = np.asarray(theta_true, dtype=float)
    rho = report.rho
    inner = _spd_sqrt(report.fisher * np.outer(rho, rho))
    err = report.standardized = inner @ ((report.theta_hat - theta_true) / rho)
    return err
