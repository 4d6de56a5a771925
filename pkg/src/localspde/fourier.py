"""FFT evaluation of the asymptotic covariance and related symbol norms.

The limiting covariance of the rescaled Fisher information has entries

    Sigma[i, j] = (T/2) <(-Abar)^{-1/2} Abar_i^* K, (-Abar)^{-1/2} Abar_j^* K>

over L2(R^d), where Abar_i^* keeps only the top-order terms of A_i^*. In
Fourier variables this is a weighted integral of |Khat|^2 against rational
symbol functions, evaluated here on an FFT grid of the padded kernel with
trapezoidal (equal-weight) frequency quadrature; the zero-frequency bin is
excluded, with integrability near zero guaranteed by the order condition
n_i + n_j + d > 2 (relaxed when the kernel has vanishing moments).
"""

from __future__ import annotations

import numpy as np

from .errors import Divergent
from .kernels import KernelSpec
from .operators import OperatorSpec

__all__ = ["kernel_power_spectrum", "asymptotic_sigma", "fractional_norm_sq",
           "leading_order_gram", "check_leading_independence"]

DEFAULT_GRID = {1: (4096, 4), 2: (512, 2), 3: (96, 2)}
HALF_WIDTH = 2.0  # sampling box [-2, 2]^d around the unit-ball support


def kernel_power_spectrum(kernel: KernelSpec, n_per_axis: int | None = None,
                          pad: int | None = None):
    """|Khat|^2 on an FFT frequency grid.

    Returns (xi_axes, power, cell) with xi_axes the per-axis frequency
    arrays, power the |Khat(xi)|^2 array and cell the frequency-cell volume.
    Uses the convention Khat(xi) = int K(x) exp(-i xi . x) dx.
    """
    d = kernel.dim
    if n_per_axis is None or pad is None:
        dn, dp = DEFAULT_GRID[d]
        n_per_axis = n_per_axis or dn
        pad = pad or dp
    h = 2.0 * HALF_WIDTH / n_per_axis
    axis = -HALF_WIDTH + h * np.arange(n_per_axis)
    if d == 1:
        vals = kernel(axis[:, None])
    elif d == 2:
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        vals = kernel(np.column_stack([xx.ravel(), yy.ravel()])).reshape(
            n_per_axis, n_per_axis)
    else:
        vals = np.empty((n_per_axis,) * 3)
        for i, x0 in enumerate(axis):
            xx, yy = np.meshgrid(axis, axis, indexing="ij")
            pts = np.column_stack([np.full(xx.size, x0), xx.ravel(), yy.ravel()])
            vals[i] = kernel(pts).reshape(n_per_axis, n_per_axis)
    n_fft = n_per_axis * pad
    khat = np.fft.fftn(vals, s=(n_fft,) * d, axes=tuple(range(d))) * h ** d
    power = np.abs(khat) ** 2
    xi = 2.0 * np.pi * np.fft.fftfreq(n_fft, d=h)
    return [xi] * d, power, (xi[1] - xi[0]) ** d


def _top_order_polynomial(table: dict, order: int, grids) -> np.ndarray:
    """P_i(xi) = sum_{|alpha| = order} a_alpha xi^alpha on the mesh."""
    d = len(grids)
    out = 0.0
    for alpha, value in table.items():
        if sum(alpha) != order:
            continue
        term = np.array(value)
        for a in range(d):
            if alpha[a]:
                term = term * grids[a] ** alpha[a]
        out = out + term
    return out


def _moment_gain(kernel: KernelSpec) -> int:
    if kernel.zero_integral and kernel.zero_first_moment:
        return 4
    if kernel.zero_integral:
        return 2
    return 0


def _sphere_average(func, d: int, n: int = 8192) -> float:
    """Average of a smooth function over the unit sphere in R^d."""
    if d == 1:
        return 0.5 * float(func(np.array([[1.0]]))[0]
                           + func(np.array([[-1.0]]))[0])
    if d == 2:
        ang = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        return float(np.mean(func(pts)))
    # Fibonacci sphere
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z ** 2, 0.0))
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return float(np.mean(func(pts)))


def asymptotic_sigma(kernel: KernelSpec, spec: OperatorSpec, theta,
                     T: float, n_per_axis: int | None = None,
                     pad: int | None = None) -> np.ndarray:
    """Asymptotic covariance Sigma_theta of the rescaled Fisher information.

    Entry (i, j) integrates sigma_i conj(sigma_j) |Khat|^2 / s_theta over
    frequencies (normalized by (2 pi)^d), where sigma_i = (-i)^{n_i} P_i and
    s_theta > 0 is the principal symbol of -Abar_theta. Entries with symbols
    of opposite parity are exactly zero.

    Raises
    ------
    Divergent
        If some pair (i, j) has n_i + n_j + d (+ moment gain) <= 2, so the
        integrand is not integrable at zero.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p = spec.p
    d = spec.dim
    gain = _moment_gain(kernel)
    for i in range(p):
        for j in range(p):
            if spec.orders[1 + i] + spec.orders[1 + j] + d + gain <= 2:
                raise Divergent(
                    f"pair ({i + 1},{j + 1}) with orders "
                    f"{spec.orders[1 + i]},{spec.orders[1 + j]} "
                    f"is not integrable in d={d}")
    xi_axes, power, cell = kernel_power_spectrum(kernel, n_per_axis, pad)
    grids = np.meshgrid(*xi_axes, indexing="ij") if d > 1 else [xi_axes[0]]
    a = spec.symbol_matrix(theta)
    s = 0.0
    for ii in range(d):
        for jj in range(d):
            if a[ii, jj]:
                s = s + a[ii, jj] * grids[ii] * grids[jj]
    s = np.asarray(s, dtype=float)
    zero_bin = tuple([0] * d)
    s[zero_bin] = np.inf  # no division at zero; the bin is handled below
    weight = power / s
    sigma = np.zeros((p, p))
    polys = [_top_order_polynomial(spec.coeffs[1 + i], spec.orders[1 + i], grids)
             for i in range(p)]

    def ratio_limit(i: int, j: int) -> float:
        # Directional average of P_i P_j / s on the unit sphere: the
        # zero-frequency limit of the integrand divided by |Khat(0)|^2.
        def func(pts):
            num = (_top_order_polynomial(spec.coeffs[1 + i],
                                         spec.orders[1 + i],
                                         [pts[:, k] for k in range(d)])
                   * _top_order_polynomial(spec.coeffs[1 + j],
                                           spec.orders[1 + j],
                                           [pts[:, k] for k in range(d)]))
            den = np.einsum("ni,ij,nj->n", pts, a, pts)
            return num / den

        return _sphere_average(func, d)

    for i in range(p):
        for j in range(i, p):
            ni, nj = spec.orders[1 + i], spec.orders[1 + j]
            if (ni - nj) % 2 == 1:
                continue  # imaginary product, vanishes identically
            parity = np.real((-1j) ** ni * 1j ** nj)
            val = np.sum(polys[i] * polys[j] * weight)
            if ni + nj == 2:
                # removable singularity: restore the zero bin at its
                # directional-limit value
                val += power[zero_bin] * ratio_limit(i, j)
            sigma[i, j] = sigma[j, i] = (0.5 * T * parity * val * cell
                                         / (2.0 * np.pi) ** d)
    return sigma


def leading_order_gram(kernel: KernelSpec, spec: OperatorSpec,
                       n_per_axis: int | None = None,
                       pad: int | None = None) -> np.ndarray:
    """Gram matrix of the top-order filtered kernels Abar_i^* K over R^d.

    Entries are (2 pi)^{-d} int P_i P_j |Khat|^2 (real part); pairs of
    opposite symbol parity vanish identically.
    """
    p = spec.p
    d = spec.dim
    xi_axes, power, cell = kernel_power_spectrum(kernel, n_per_axis, pad)
    grids = np.meshgrid(*xi_axes, indexing="ij") if d > 1 else [xi_axes[0]]
    polys = [_top_order_polynomial(spec.coeffs[1 + i], spec.orders[1 + i],
                                   grids) for i in range(p)]
    gram = np.zeros((p, p))
    for i in range(p):
        for j in range(i, p):
            if (spec.orders[1 + i] - spec.orders[1 + j]) % 2 == 1:
                continue
            parity = np.real((-1j) ** spec.orders[1 + i]
                             * 1j ** spec.orders[1 + j])
            val = parity * np.sum(polys[i] * polys[j] * power)
            gram[i, j] = gram[j, i] = val * cell / (2.0 * np.pi) ** d
    return gram


def check_leading_independence(kernel: KernelSpec, spec: OperatorSpec,
                               floor: float = 1e-10) -> float:
    """Numerical check of the linear independence of the Abar_i^* K.

    Returns the normalized Gram determinant (product of correlations
    removed); raises if it falls below the configurable floor.
    """
    gram = leading_order_gram(kernel, spec)
    scale = np.sqrt(np.diag(gram))
    corr = gram / np.outer(scale, scale)
    det = float(np.linalg.det(corr))
    if not np.isfinite(det) or det < floor:
        raise Divergent(f"leading-order kernels nearly dependent "
                        f"(normalized Gram determinant {det:.3e})")
    return det


def fractional_norm_sq(kernel: KernelSpec, exponent: float,
                       n_per_axis: int | None = None,
                       pad: int | None = None) -> float:
    """||(-Laplacian)^{exponent/2} K||^2 over R^d by FFT quadrature.

    exponent = -1 gives the norm appearing in the reaction test; requires
    integrability at zero (d + 2*exponent + moment gain > 0).
    """
    d = kernel.dim
    if d + 2.0 * exponent + _moment_gain(kernel) <= 0.0:
        raise Divergent(f"|xi|^{2 * exponent} |Khat|^2 not integrable in d={d}")
    xi_axes, power, cell = kernel_power_spectrum(kernel, n_per_axis, pad)
    grids = np.meshgrid(*xi_axes, indexing="ij") if d > 1 else [xi_axes[0]]
    r2 = sum(g ** 2 for g in grids)
    r2 = np.asarray(r2, dtype=float)
    r2[tuple([0] * d)] = np.inf if exponent < 0 else 1.0
    zero_weight = 0.0 if exponent != 0 else power[tuple([0] * d)]
    integrand = power * r2 ** exponent
    integrand[tuple([0] * d)] = zero_weight
    return float(np.sum(integrand) * cell / (2.0 * np.pi) ** d)
