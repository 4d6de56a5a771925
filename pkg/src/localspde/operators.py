"""Parametrized second-order differential operators and their Galerkin matrices.

An operator family A(theta) = sum_i theta_i A_i + A_0 is described by constant
coefficient tables over multi-indices of order <= 2 on the unit cube with zero
Dirichlet boundary conditions. The Galerkin system projects A(theta) onto the
Dirichlet-Laplacian eigenbasis (products of scaled sines).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NonElliptic

__all__ = [
    "OperatorSpec", "DiagonalizingTransform", "GalerkinSystem",
    "ellipticity_check", "diagonalize", "galerkin_drift",
    "advection_diffusion_spec", "reaction_spec_2d",
    "operator_spec_from_config", "operator_spec_to_config",
]


def _normalize_coeffs(coeffs: dict, dim: int) -> dict:
    out = {}
    for alpha, value in coeffs.items():
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != dim or any(a < 0 for a in alpha) or sum(alpha) > 2:
            raise ValueError(f"bad multi-index {alpha} for dim {dim}")
        if value != 0.0:
            out[alpha] = float(value)
    return out


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficient tables of A_0, ..., A_p with differential orders n_i.

    coeffs[i] maps multi-indices alpha (tuples of length dim, |alpha| <= 2)
    to the real coefficient of D^alpha in A_i; index 0 is the known offset
    operator A_0, which may be identically zero.
    """

    dim: int
    coeffs: tuple
    orders: tuple

    def __post_init__(self):
        # d = 3 is admitted for symbol-level work (asymptotic covariances);
        # the Galerkin machinery itself is restricted to d <= 2.
        if self.dim not in (1, 2, 3):
            raise ValueError("only dimensions 1, 2 and 3 are supported")
        object.__setattr__(self, "coeffs",
                           tuple(_normalize_coeffs(c, self.dim) for c in self.coeffs))
        object.__setattr__(self, "orders", tuple(int(n) for n in self.orders))
        if len(self.orders) != len(self.coeffs):
            raise ValueError("orders and coeffs length mismatch")
        for i, (table, n) in enumerate(zip(self.coeffs, self.orders)):
            if not table:
                if i == 0:
                    continue
                raise ValueError(f"operator A_{i} is identically zero")
            top = max(sum(a) for a in table)
            if top != n:
                raise ValueError(f"operator A_{i}: order {n} but top degree {top}")

    @property
    def p(self) -> int:
        return len(self.coeffs) - 1

    def combined(self, theta) -> dict:
        """Coefficient table of A_theta = sum theta_i A_i + A_0."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.p,):
            raise ValueError(f"theta must have length {self.p}")
        out = dict(self.coeffs[0])
        for t, table in zip(theta, self.coeffs[1:]):
            for alpha, value in table.items():
                out[alpha] = out.get(alpha, 0.0) + t * value
        return out

    def symbol_matrix(self, theta) -> np.ndarray:
        """Second-order symbol matrix a_theta (symmetric d x d)."""
        a = np.zeros((self.dim, self.dim))
        for alpha, value in self.combined(theta).items():
            if sum(alpha) != 2:
                continue
            idx = [i for i, k in enumerate(alpha) for _ in range(k)]
            i, j = idx
            if i == j:
                a[i, i] += value
            else:
                a[i, j] += 0.5 * value
                a[j, i] += 0.5 * value
        return a

    def first_order_vector(self, theta) -> np.ndarray:
        b = np.zeros(self.dim)
        for alpha, value in self.combined(theta).items():
            if sum(alpha) == 1:
                b[alpha.index(1)] += value
        return b

    def zero_order(self, theta) -> float:
        table = self.combined(theta)
        return table.get(tuple([0] * self.dim), 0.0)


@dataclass(frozen=True)
class DiagonalizingTransform:
    """Multiplier exponent and shifted constant of the symmetrizing transform.

    A_theta = U (div a grad + c_tilde) U^{-1} with U the multiplication
    operator by exp(-w . x).
    """

    w: np.ndarray
    c_tilde: float


def ellipticity_check(spec: OperatorSpec, theta) -> float:
    """Smallest value of the second-order symbol on the unit sphere.

    Returns the ellipticity constant C_theta > 0, the minimal eigenvalue of
    the symbol matrix a_theta.

    Raises
    ------
    NonElliptic
        If the minimum is not strictly positive.
    """
    a = spec.symbol_matrix(theta)
    c = float(np.linalg.eigvalsh(a)[0])
    if not np.isfinite(c) or c <= 0.0:
        raise NonElliptic(f"symbol minimum {c} is not positive")
    return c


def diagonalize(spec: OperatorSpec, theta) -> DiagonalizingTransform:
    """Exponent w = a^{-1} b / 2 and c_tilde = c - b . (a^{-1} b) / 4."""
    ellipticity_check(spec, theta)
    a = spec.symbol_matrix(theta)
    b = spec.first_order_vector(theta)
    c = spec.zero_order(theta)
    ainv_b = np.linalg.solve(a, b)
    return DiagonalizingTransform(w=0.5 * ainv_b,
                                  c_tilde=c - 0.25 * float(b @ ainv_b))


def sine_modes(dim: int, size) -> list:
    """Mode index tuples of the Dirichlet-Laplacian basis, sorted by eigenvalue.

    `size` is the per-axis mode count (int, or tuple for anisotropic d=2).
    """
    if dim not in (1, 2):
        raise ValueError("explicit eigenbasis only on (0,1)^d for d <= 2")
    if dim == 1:
        return [(j,) for j in range(1, int(size) + 1)]
    if np.isscalar(size):
        size = (int(size), int(size))
    modes = [(j1, j2) for j1 in range(1, size[0] + 1)
             for j2 in range(1, size[1] + 1)]
    modes.sort(key=lambda m: (m[0] ** 2 + m[1] ** 2, m))
    return modes


def mode_eigenvalue(mode) -> float:
    """Dirichlet-Laplacian eigenvalue lambda' = pi^2 |j|^2 of a mode."""
    return float(np.pi ** 2 * sum(j ** 2 for j in mode))


def _sine_factor_matrix(order: int, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """<d^order s_l, s_j> on (0,1) for orthonormal sines s_j = sqrt(2) sin(j pi x).

    Rows range over j in `left`, columns over l in `right`.
    """
    j = left[:, None].astype(float)
    l = right[None, :].astype(float)
    if order == 0:
        return (j == l).astype(float)
    if order == 2:
        return np.where(j == l, -(np.pi * l) ** 2, 0.0)
    if order == 1:
        odd = (j + l) % 2 == 1
        denom = j ** 2 - l ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(odd, 4.0 * j * l / np.where(odd, denom, 1.0), 0.0)
        return vals
    raise ValueError(f"unsupported derivative order {order}")


@dataclass
class GalerkinSystem:
    """Drift matrix of A_theta in the Dirichlet-Laplacian eigenbasis.

    Immutable after construction; safe to share across replicate workers.
    """

    spec: OperatorSpec
    theta: np.ndarray
    modes: list
    lambdas: np.ndarray
    B: np.ndarray
    is_diagonal: bool
    c_theta: float
    truncation_note: str = field(default="", repr=False)

    @property
    def size(self) -> int:
        return len(self.modes)

    @property
    def dim(self) -> int:
        return self.spec.dim

    def neg_drift_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of -A_theta, available in the diagonal case."""
        if not self.is_diagonal:
            raise ValueError("drift matrix is not diagonal")
        return -np.diag(self.B)


def _operator_matrix(table: dict, modes: list, dim: int) -> np.ndarray:
    n = len(modes)
    out = np.zeros((n, n))
    if not table:
        return out
    axes = [np.array([m[k] for m in modes]) for k in range(dim)]
    for alpha, value in table.items():
        term = _sine_factor_matrix(alpha[0], axes[0], axes[0])
        for k in range(1, dim):
            term = term * _sine_factor_matrix(alpha[k], axes[k], axes[k])
        out += value * term
    return out


def galerkin_drift(spec: OperatorSpec, theta, size) -> GalerkinSystem:
    """Assemble B[j, l] = <A_theta e_l, e_j> for the first modes.

    Entries are exact (sine-basis integrals of constant-coefficient operators
    have closed forms). `size` is the per-axis mode count.
    """
    ellipticity_check(spec, theta)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    modes = sine_modes(spec.dim, size)
    lambdas = np.array([mode_eigenvalue(m) for m in modes])
    B = _operator_matrix(spec.combined(theta), modes, spec.dim)
    a = spec.symbol_matrix(theta)
    b = spec.first_order_vector(theta)
    is_diagonal = (np.allclose(b, 0.0)
                   and np.allclose(a, np.diag(np.diag(a))))
    if is_diagonal:
        B = np.diag(np.diag(B))
    return GalerkinSystem(spec=spec, theta=theta, modes=modes, lambdas=lambdas,
                          B=B, is_diagonal=is_diagonal,
                          c_theta=spec.zero_order(theta))


def advection_diffusion_spec(dim: int, b=None, c: float = 0.0,
                             with_reaction: bool = False) -> OperatorSpec:
    """Canonical model: A_1 = Laplacian, A_2 = b . grad, optionally A_3 = 1.

    Without reaction, A_0 is the constant c (the known offset); with
    reaction, A_0 = 0 and theta_3 multiplies the identity.
    """
    if b is None:
        b = np.zeros(dim)
        b[0] = 1.0
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise ValueError("transport direction must be a unit vector")
    zero = tuple([0] * dim)
    lap = {}
    grad = {}
    for i in range(dim):
        alpha2 = tuple(2 if k == i else 0 for k in range(dim))
        alpha1 = tuple(1 if k == i else 0 for k in range(dim))
        lap[alpha2] = 1.0
        if b[i] != 0.0:
            grad[alpha1] = b[i]
    coeffs = [{zero: c} if c != 0.0 else {}, lap, grad]
    orders = [0, 2, 1]
    if with_reaction:
        coeffs.append({zero: 1.0})
        orders.append(0)
    return OperatorSpec(dim=dim, coeffs=tuple(coeffs), orders=tuple(orders))


def reaction_spec_2d() -> OperatorSpec:
    """Boundary-case model in d=2: A_theta = Laplacian + theta (p = 1)."""
    lap = {(2, 0): 1.0, (0, 2): 1.0}
    return OperatorSpec(dim=2, coeffs=(lap, {(0, 0): 1.0}), orders=(2, 0))


def _alpha_key(alpha) -> str:
    return " ".join(str(a) for a in alpha)


def operator_spec_to_config(spec: OperatorSpec) -> dict:
    ops = []
    for table, order in zip(spec.coeffs, spec.orders):
        items = sorted(table.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        ops.append({"order": order,
                    "coeffs": {_alpha_key(a): v for a, v in items}})
    return {"dimension": spec.dim, "p": spec.p, "operators": ops}


def operator_spec_from_config(cfg) -> OperatorSpec:
    """Load an OperatorSpec from a dict or a JSON string.

    Expected keys: dimension, p, operators (list of p + 1 entries, first is
    A_0), each with a coefficient map "alpha -> value" where alpha is a
    space-separated multi-index, plus an optional declared order.
    """
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    dim = int(cfg["dimension"])
    ops = cfg["operators"]
    if "p" in cfg and int(cfg["p"]) != len(ops) - 1:
        raise ValueError("p does not match the number of operators")
    coeffs, orders = [], []
    for entry in ops:
        table = {tuple(int(s) for s in key.split()): float(v)
                 for key, v in entry.get("coeffs", {}).items()}
        table = {a: v for a, v in table.items() if v != 0.0}
        order = entry.get("order")
        if order is None:
            order = max((sum(a) for a in table), default=0)
        coeffs.append(table)
        orders.append(int(order))
    return OperatorSpec(dim=dim, coeffs=tuple(coeffs), orders=tuple(orders))
