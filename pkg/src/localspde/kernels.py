"""Point-spread kernels and their scaled/shifted copies.

The default kernel is the radial bump K(x) = exp(-5/(1-|x|^2)) on the closed
unit ball. All partial derivatives of the bump have the form
K(x) * P(x, v) with v = 1/(1-|x|^2) and P a polynomial, so derivatives of any
order are available in closed form; the zero-moment kernel used for the
two-dimensional reaction boundary case is the Laplacian of a bump and reuses
the same algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SupportViolation
from .quad import integrate_with_doubling

BUMP_SHARPNESS = 5.0


def _poly_derivative(poly: dict, axis: int) -> dict:
    """Differentiate a polynomial in (x, v), v = 1/(1-|x|^2), along one axis.

    Polynomials are dicts {(beta, k): coeff} representing
    sum coeff * x^beta * v^k. Uses d v/d x_i = 2 x_i v^2.
    """
    out: dict = {}
    for (beta, k), c in poly.items():
        beta = tuple(beta)
        if beta[axis] > 0:
            key = (tuple(b - (i == axis) for i, b in enumerate(beta)), k)
            out[key] = out.get(key, 0.0) + c * beta[axis]
        if k != 0:
            key = (tuple(b + (i == axis) for i, b in enumerate(beta)), k + 1)
            out[key] = out.get(key, 0.0) + 2.0 * c * k
    return out


def _bump_poly(alpha: tuple, dim: int) -> dict:
    """Polynomial P_alpha with D^alpha exp(-c*v) = exp(-c*v) * P_alpha(x, v).

    Differentiating exp(-c*v)*P gives exp(-c*v)*(dP - 2*c*x_i*v^2*P)
    because dv/dx_i = 2*x_i*v^2.
    """
    c = BUMP_SHARPNESS
    poly = {(tuple([0] * dim), 0): 1.0}
    for axis in range(dim):
        for _ in range(alpha[axis]):
            new = _poly_derivative(poly, axis)
            for (beta, k), coeff in poly.items():
                key = (tuple(b + (i == axis) for i, b in enumerate(beta)), k + 2)
                new[key] = new.get(key, 0.0) - 2.0 * c * coeff
            poly = new
    return poly


def _eval_poly(poly: dict, pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape)
    for (beta, k), c in poly.items():
        term = np.full(v.shape, c)
        for i, b in enumerate(beta):
            if b:
                term = term * pts[..., i] ** b
        if k:
            term = term * v ** k
        out += term
    return out


class _Bump:
    """Closed-form evaluator for D^alpha of the unit-ball bump."""

    def __init__(self, dim: int):
        self.dim = dim
        self._polys: dict = {}

    def derivative(self, alpha: tuple, pts: np.ndarray) -> np.ndarray:
        alpha = tuple(alpha)
        if alpha not in self._polys:
            self._polys[alpha] = _bump_poly(alpha, self.dim)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r2 = np.sum(pts ** 2, axis=-1)
        inside = r2 < 1.0
        out = np.zeros(r2.shape)
        if np.any(inside):
            u = 1.0 - r2[inside]
            v = 1.0 / u
            base = np.exp(-BUMP_SHARPNESS * v)
            out[inside] = base * _eval_poly(self._polys[alpha], pts[inside], v)
        return out

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.derivative(tuple([0] * self.dim), pts)


@dataclass
class KernelSpec:
    """A compactly supported kernel with derivatives up to (at least) order 2.

    Attributes
    ----------
    dim : spatial dimension.
    derivative : callable (alpha, points) -> values, alpha a multi-index.
    support_radius : radius of the support ball (reference scale delta=1).
    norm, grad_norm, lap_norm : cached L2(R^d) norms of K, |grad K|, Delta K.
    nonnegative, zero_integral, zero_first_moment : metadata flags.
    """

    dim: int
    derivative: Callable
    support_radius: float = 1.0
    name: str = "kernel"
    nonnegative: bool = False
    zero_integral: bool = False
    zero_first_moment: bool = False
    norm: float = field(default=0.0)
    grad_norm: float = field(default=0.0)
    lap_norm: float = field(default=0.0)
    norm_error: float = field(default=0.0, repr=False)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.derivative(tuple([0] * self.dim), pts)

    def compute_norms(self, nodes_per_axis: int = 40, rtol: float = 1e-9):
        """Fill the cached norms by tensor Gauss-Legendre with doubling check."""
        zero = tuple([0] * self.dim)

        def sq(f):
            return lambda p: f(p) ** 2

        val, err = integrate_with_doubling(
            sq(lambda p: self.derivative(zero, p)), self.dim, -self.support_radius,
            self.support_radius, nodes_per_axis, rtol)
        self.norm = float(np.sqrt(val))
        self.norm_error = err
        grad_sq = 0.0
        lap = None
        for i in range(self.dim):
            alpha = tuple(2 if j == i else 0 for j in range(self.dim))
            one = tuple(1 if j == i else 0 for j in range(self.dim))
            g, _ = integrate_with_doubling(
                sq(lambda p, a=one: self.derivative(a, p)), self.dim,
                -self.support_radius, self.support_radius, nodes_per_axis, rtol)
            grad_sq += g
            term = lambda p, a=alpha: self.derivative(a, p)
            lap = term if lap is None else (lambda p, f=lap, g2=term: f(p) + g2(p))
        self.grad_norm = float(np.sqrt(grad_sq))
        lap_val, _ = integrate_with_doubling(
            sq(lap), self.dim, -self.support_radius, self.support_radius,
            nodes_per_axis, rtol)
        self.lap_norm = float(np.sqrt(lap_val))
        return self

    def integral_moments(self, nodes_per_axis: int = 80):
        """Return (integral of K, integral of x K) by quadrature."""
        zero = tuple([0] * self.dim)
        m0, _ = integrate_with_doubling(
            lambda p: self.derivative(zero, p), self.dim, -self.support_radius,
            self.support_radius, nodes_per_axis)
        m1 = []
        for i in range(self.dim):
            v, _ = integrate_with_doubling(
                lambda p: p[..., i] * self.derivative(zero, p), self.dim,
                -self.support_radius, self.support_radius, nodes_per_axis)
            m1.append(v)
        return m0, np.array(m1)


def bump_kernel(dim: int) -> KernelSpec:
    """The default point-spread function exp(-5/(1-|x|^2)) on the unit ball."""
    bump = _Bump(dim)
    spec = KernelSpec(dim=dim, derivative=bump.derivative, name="bump",
                      nonnegative=True)
    return spec.compute_norms()


def laplacian_bump_kernel(dim: int = 2) -> KernelSpec:
    """Zero-moment kernel: the Laplacian of the default bump.

    Has vanishing integral and first moments by the divergence theorem, which
    is what the two-dimensional reaction boundary case requires.
    """
    bump = _Bump(dim)

    def derivative(alpha, pts):
        out = None
        for i in range(dim):
            shifted = tuple(a + 2 * (j == i) for j, a in enumerate(alpha))
            term = bump.derivative(shifted, pts)
            out = term if out is None else out + term
        return out

    spec = KernelSpec(dim=dim, derivative=derivative, name="laplacian-bump",
                      zero_integral=True, zero_first_moment=True)
    return spec.compute_norms()


def normalized(kernel: KernelSpec) -> KernelSpec:
    """Copy of the kernel rescaled to unit L2 norm (norms rescale exactly)."""
    scale = 1.0 / kernel.norm
    base = kernel.derivative
    return KernelSpec(
        dim=kernel.dim,
        derivative=lambda alpha, pts: scale * base(alpha, pts),
        support_radius=kernel.support_radius,
        name=kernel.name + "-normalized",
        nonnegative=kernel.nonnegative,
        zero_integral=kernel.zero_integral,
        zero_first_moment=kernel.zero_first_moment,
        norm=1.0,
        grad_norm=kernel.grad_norm * scale,
        lap_norm=kernel.lap_norm * scale,
        norm_error=kernel.norm_error * scale ** 2,
    )


def kernel_by_name(name: str, dim: int) -> KernelSpec:
    if name == "bump":
        return bump_kernel(dim)
    if name in ("laplacian-bump", "zero-moment"):
        return laplacian_bump_kernel(dim)
    raise ValueError(f"unknown kernel {name!r}")


@dataclass
class ScaledKernel:
    """K_{delta,x}(y) = delta^{-d/2} K(delta^{-1}(y - x)) and its derivatives."""

    base: KernelSpec
    delta: float
    center: np.ndarray

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int:
        return self.base.dim

    def derivative(self, alpha, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        local = (pts - self.center) / self.delta
        scale = self.delta ** (-0.5 * self.dim - sum(alpha))
        return scale * self.base.derivative(tuple(alpha), local)

    def __call__(self, pts):
        return self.derivative(tuple([0] * self.dim), pts)


def scale_kernel(base: KernelSpec, delta: float, center,
                 domain_width: float = 1.0) -> ScaledKernel:
    """Scale and shift a kernel, checking that the support stays in (0, w)^d.

    Raises
    ------
    SupportViolation
        If the support ball of radius delta*support_radius leaves the domain.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    radius = delta * base.support_radius
    if np.any(center - radius < 0.0) or np.any(center + radius > domain_width):
        raise SupportViolation(
            f"support ball of radius {radius} at {center} leaves the domain")
    return ScaledKernel(base, delta, center)
