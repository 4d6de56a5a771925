"""Cameron-Martin norms, Hellinger distances and the two-point certification.

The reproducing kernel Hilbert space of a stationary scalar OU process with
rate lambda consists of the absolutely continuous functions on [0, T] with
square-integrable derivative, and

    ||h||^2 = lambda^2 int h^2 + lambda (h(T)^2 + h(0)^2) + int (h')^2.

An infinite-dimensional stationary evolution diagonalized by (lambda_j, e_j)
adds these norms over modes, which equals the operator form
||A h||^2 + ||h'||^2 + ||(-A)^{1/2} h(0)||^2 + ||(-A)^{1/2} h(T)||^2.

For centered Gaussians with nonsingular covariances C0, C1 on R^m the squared
Hellinger distance has the closed form

    H^2 = 2 - 2 * det(C0)^{1/4} det(C1)^{1/4} / det((C0 + C1)/2)^{1/2},

obtained by evaluating the Gaussian affinity integral int sqrt(p0 p1):
completing the square gives a Gaussian integral with precision
(C0^{-1} + C1^{-1})/2 and the stated determinant ratio. The certification
sum S = sum_{j,k} <u_j, (C1 - C0) u_k>^2 / (sigma_j^2 sigma_k^2) bounds
H^2 <= 2 S, so S <= 1/2 certifies H^2 <= 1 and with it the two-point minimax
lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Degenerate, SingularGram

__all__ = [
    "SampledFunction", "ou_rkhs_norm", "ou_rkhs_inner", "spde_rkhs_norm",
    "rkhs_bound_check", "measurement_rkhs_bound", "GaussianPairTruncation",
    "hellinger_gaussian", "lower_bound_condition", "nystrom_rkhs_norm",
]

EIGENVALUE_FLOOR = 1e-12  # relative to trace; below counts as degenerate


@dataclass
class SampledFunction:
    """Function values (and derivative) on a uniform grid over [0, T].

    If no analytic derivative is supplied, second-order central differences
    with one-sided order-2 boundary stencils are used and the truncation
    scale O(dt^2) is recorded in `derivative_error`.
    """

    t: np.ndarray
    values: np.ndarray
    derivative: np.ndarray = None
    derivative_error: float = field(default=0.0, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.derivative is None:
            dt = self.dt
            d = np.gradient(self.values, dt)
            # order-2 one-sided boundary stencils
            v = self.values
            if len(v) >= 3:
                d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
                d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)
            self.derivative = d
            self.derivative_error = dt ** 2
        else:
            self.derivative = np.asarray(self.derivative, dtype=float)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])


def _trapz(y: np.ndarray, dt: float) -> float:
    return float(dt * (np.sum(y) - 0.5 * (y[0] + y[-1])))


def ou_rkhs_norm(h: SampledFunction, lam: float) -> float:
    """Squared RKHS norm of h for the stationary OU process with rate lam."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    dt = h.dt
    v, d = h.values, h.derivative
    return (lam ** 2 * _trapz(v ** 2, dt)
            + lam * (v[-1] ** 2 + v[0] ** 2)
            + _trapz(d ** 2, dt))


def ou_rkhs_inner(h: SampledFunction, g: SampledFunction, lam: float) -> float:
    """Inner product polarized from the norm: (||h+g||^2 - ||h-g||^2) / 4."""
    plus = SampledFunction(h.t, h.values + g.values,
                           h.derivative + g.derivative)
    minus = SampledFunction(h.t, h.values - g.values,
                            h.derivative - g.derivative)
    return 0.25 * (ou_rkhs_norm(plus, lam) - ou_rkhs_norm(minus, lam))


def spde_rkhs_norm(h_modes, lams, check_tol: float = 1e-8) -> float:
    """Squared RKHS norm of h = sum_j h_j e_j: the sum of per-mode OU norms.

    Also evaluates the operator form ||A h||^2 + ||h'||^2 +
    ||(-A)^{1/2}h(0)||^2 + ||(-A)^{1/2}h(T)||^2 and asserts agreement.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    series = sum(ou_rkhs_norm(h, lam) for h, lam in zip(h_modes, lams))
    dt = h_modes[0].dt
    drift = sum(lam ** 2 * _trapz(h.values ** 2, dt)
                for h, lam in zip(h_modes, lams))
    vel = sum(_trapz(h.derivative ** 2, dt) for h in h_modes)
    ends = sum(lam * (h.values[0] ** 2 + h.values[-1] ** 2)
               for h, lam in zip(h_modes, lams))
    operator_form = drift + vel + ends
    if abs(operator_form - series) > check_tol * max(1.0, abs(series)):
        raise AssertionError("series and operator RKHS forms disagree")
    return series


def rkhs_bound_check(h_modes, lams, tol: float = 1e-9):
    """Norm versus the bound 3||A h||^2 + ||h||^2 + 2||h'||^2 (needs T >= 1).

    Returns (norm, bound, holds).
    """
    if h_modes[0].T < 1.0:
        raise ValueError("the bound is stated for T >= 1")
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    norm = spde_rkhs_norm(h_modes, lams)
    dt = h_modes[0].dt
    bound = sum(3.0 * lam ** 2 * _trapz(h.values ** 2, dt)
                + _trapz(h.values ** 2, dt)
                + 2.0 * _trapz(h.derivative ** 2, dt)
                for h, lam in zip(h_modes, lams))
    holds = norm <= bound + tol * max(1.0, abs(bound))
    return norm, bound, bool(holds)


def measurement_rkhs_bound(G: np.ndarray, G_A: np.ndarray, hs) -> float:
    """Upper bound for the RKHS norm of an M-channel measurement path.

    (3 ||G^{-1}||_op^2 ||G_A||_op + ||G^{-1}||_op) sum ||h_k||^2
      + 2 ||G^{-1}||_op sum ||h_k'||^2,
    with G the Gram matrix of the measurement functions and G_A the Gram of
    their images under the drift operator.

    Raises
    ------
    SingularGram
        If G is numerically singular.
    """
    G = np.asarray(G, dtype=float)
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise SingularGram("Gram matrix is singular")
    ginv_op = 1.0 / sv[-1]
    ga_op = float(np.linalg.svd(np.asarray(G_A, dtype=float),
                                compute_uv=False)[0])
    dt = hs[0].dt
    l2 = sum(_trapz(h.values ** 2, dt) for h in hs)
    dl2 = sum(_trapz(h.derivative ** 2, dt) for h in hs)
    return (3.0 * ginv_op ** 2 * ga_op + ginv_op) * l2 + 2.0 * ginv_op * dl2


@dataclass
class GaussianPairTruncation:
    """Two centered Gaussians on R^m given by covariance matrices.

    C0 must be positive definite; its eigendecomposition is cached.

    Raises
    ------
    Degenerate
        If either covariance has an eigenvalue below 1e-12 times its trace,
        or is not symmetric to 1e-12.
    """

    C0: np.ndarray
    C1: np.ndarray
    eigvals: np.ndarray = field(default=None, repr=False)
    eigvecs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.C0 = np.asarray(self.C0, dtype=float)
        self.C1 = np.asarray(self.C1, dtype=float)
        for C in (self.C0, self.C1):
            scale = max(np.trace(C), np.finfo(float).tiny)
            if np.max(np.abs(C - C.T)) > 1e-12 * scale:
                raise Degenerate("covariance not symmetric")
        vals, vecs = np.linalg.eigh(self.C0)
        if vals[0] <= EIGENVALUE_FLOOR * np.trace(self.C0):
            raise Degenerate("C0 has (numerically) vanishing eigenvalues")
        if np.linalg.eigvalsh(self.C1)[0] <= EIGENVALUE_FLOOR * np.trace(self.C1):
            raise Degenerate("C1 has (numerically) vanishing eigenvalues")
        self.eigvals = vals
        self.eigvecs = vecs

    @property
    def m(self) -> int:
        return self.C0.shape[0]


def hellinger_gaussian(pair: GaussianPairTruncation) -> float:
    """Exact squared Hellinger distance between the two centered Gaussians.

    Evaluated through log-determinants for numerical stability; the result
    lies in [0, 2].
    """
    s0 = np.linalg.slogdet(pair.C0)
    s1 = np.linalg.slogdet(pair.C1)
    sm = np.linalg.slogdet(0.5 * (pair.C0 + pair.C1))
    if s0[0] <= 0 or s1[0] <= 0 or sm[0] <= 0:
        raise Degenerate("covariance determinant not positive")
    log_affinity = 0.25 * (s0[1] + s1[1]) - 0.5 * sm[1]
    h2 = 2.0 - 2.0 * np.exp(log_affinity)
    return float(min(max(h2, 0.0), 2.0))


def lower_bound_condition(pair: GaussianPairTruncation):
    """Certification sum S and whether the two-point lower bound applies.

    S = sum_{j,k} <u_j, (C1 - C0) u_k>^2 / (sigma_j^2 sigma_k^2) computed in
    the eigenbasis of C0. Returns (S, certified, H2): S <= 1/2 guarantees
    H2 <= 1, and the exact Hellinger distance is returned for cross-checking.
    """
    A = pair.eigvecs.T @ (pair.C1 - pair.C0) @ pair.eigvecs
    S = float(np.sum(A ** 2 / np.outer(pair.eigvals, pair.eigvals)))
    certified = S <= 0.5
    h2 = hellinger_gaussian(pair)
    if certified and h2 > 1.0 + 1e-9:
        raise AssertionError("certified pair with Hellinger above one")
    return S, bool(certified), h2


def nystrom_rkhs_norm(C: np.ndarray, weights: np.ndarray,
                      h: np.ndarray) -> float:
    """RKHS norm of h for a process with covariance kernel matrix C.

    C[(m,k),(m',l)] are kernel values on the grid and `weights` the
    quadrature weights of the time grid (replicated over channels); the
    weighted eigenproblem discretizes the covariance operator on
    L2([0,T])^M and the norm is sum <v_j, h>_w^2 / sigma_j^2.
    """
    w_half = np.sqrt(weights)
    B = (C * w_half[None, :]) * w_half[:, None]
    vals, vecs = np.linalg.eigh(0.5 * (B + B.T))
    floor = EIGENVALUE_FLOOR * max(np.trace(B), np.finfo(float).tiny)
    keep = vals > floor
    coeff = vecs[:, keep].T @ (w_half * h)
    return float(np.sum(coeff ** 2 / vals[keep]))
