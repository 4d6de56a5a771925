import json

import numpy as np
import pytest

from localspde.errors import NonElliptic
from localspde.operators import (GalerkinSystem, OperatorSpec,
                                 advection_diffusion_spec, diagonalize,
                                 ellipticity_check, galerkin_drift,
                                 operator_spec_from_config,
                                 operator_spec_to_config, reaction_spec_2d)
from localspde.quad import composite_gauss_legendre


def test_ellipticity_pure_laplacian():
    spec = OperatorSpec(dim=1, coeffs=({}, {(2,): 1.0}), orders=(0, 2))
    assert ellipticity_check(spec, [1.0]) == pytest.approx(1.0)
    with pytest.raises(NonElliptic):
        ellipticity_check(spec, [0.0])
    with pytest.raises(NonElliptic):
        ellipticity_check(spec, [-2.0])


def test_ellipticity_example2_grid_oracle():
    # minimum of the second-order symbol over the unit circle, brute force
    spec = advection_diffusion_spec(2, with_reaction=True)
    theta = [2.0, 0.5, -1.0]
    ang = np.linspace(0.0, 2 * np.pi, 20001)
    xs = np.column_stack([np.cos(ang), np.sin(ang)])
    a = spec.symbol_matrix(theta)
    grid_min = np.min(np.einsum("ni,ij,nj->n", xs, a, xs))
    assert ellipticity_check(spec, theta) == pytest.approx(grid_min, abs=1e-8)
    assert ellipticity_check(spec, theta) == pytest.approx(2.0)


def test_diagonalize_no_transport():
    spec = advection_diffusion_spec(1, c=0.3)
    out = diagonalize(spec, [1.5, 0.0])
    assert np.allclose(out.w, 0.0)
    assert out.c_tilde == pytest.approx(0.3)


def test_diagonalize_unit_transport():
    # theta = (1, 1), c = 0: w = 1/2 and c_tilde = -1/4
    spec = advection_diffusion_spec(1, c=0.0)
    out = diagonalize(spec, [1.0, 1.0])
    assert out.w[0] == pytest.approx(0.5)
    assert out.c_tilde == pytest.approx(-0.25)


def test_diagonalize_sign_flip():
    spec = advection_diffusion_spec(1, c=0.1)
    plus = diagonalize(spec, [2.0, 0.7])
    minus = diagonalize(spec, [2.0, -0.7])
    assert np.allclose(plus.w, -minus.w)
    assert plus.c_tilde == pytest.approx(minus.c_tilde)


def test_diagonalize_conjugation_pointwise():
    # A f = U (div a grad + c_tilde) U^{-1} f checked by finite differences
    rng = np.random.default_rng(5)
    theta = np.array([1.0 + rng.random(), rng.normal(), rng.normal()])
    spec = advection_diffusion_spec(1, with_reaction=True)
    tr = diagonalize(spec, theta)
    a, b, c = theta[0], theta[1], theta[2]
    w = tr.w[0]
    xs = np.linspace(0.2, 0.8, 31)
    h = 1e-4

    def f(x):
        return np.sin(3.0 * x) * np.exp(np.cos(2.0 * x))

    def lap(g, x):
        return (g(x + h) - 2 * g(x) + g(x - h)) / h ** 2

    def grad(g, x):
        return (g(x + h) - g(x - h)) / (2 * h)

    lhs = a * lap(f, xs) + b * grad(f, xs) + c * f(xs)

    def conj(x):
        return np.exp(w * x) * f(x)  # U^{-1} f

    rhs = np.exp(-w * xs) * (a * lap(conj, xs) + tr.c_tilde * conj(xs))
    assert np.max(np.abs(lhs - rhs)) < 1e-5 * max(1.0, np.max(np.abs(lhs)))


def test_galerkin_pure_laplacian_entry():
    spec = OperatorSpec(dim=1, coeffs=({}, {(2,): 1.0}), orders=(0, 2))
    system = galerkin_drift(spec, [1.0], 4)
    assert system.B[2, 2] == pytest.approx(-9 * np.pi ** 2)
    assert system.is_diagonal


def test_galerkin_advection_parity():
    spec = advection_diffusion_spec(1, c=0.0)
    system = galerkin_drift(spec, [1.0, 1.0], 6)
    # j + l even (both indices 1-based): zero advection coupling
    assert system.B[0, 2] == pytest.approx(0.0)
    assert system.B[3, 1] == pytest.approx(0.0)


def test_galerkin_advection_quadrature_oracle():
    # <d e_2, e_1> on (0,1): composite Gauss-Legendre with >= 64 nodes
    spec = OperatorSpec(dim=1, coeffs=({}, {(1,): 1.0}), orders=(0, 1))
    x, w = composite_gauss_legendre(0.0, 1.0, 16, 8)
    oracle = np.sum(w * np.sqrt(2) * np.sin(np.pi * x)
                    * np.sqrt(2) * 2 * np.pi * np.cos(2 * np.pi * x))
    # the operator alone is not elliptic; add a Laplacian carrier
    full = advection_diffusion_spec(1, c=0.0)
    system = galerkin_drift(full, [1.0, 1.0], 4)
    advection_part = system.B[0, 1] - 0.0  # diagonal Laplacian absent here
    assert advection_part == pytest.approx(oracle, abs=1e-10)
    assert oracle == pytest.approx(-8.0 / 3.0, abs=1e-10)


def test_galerkin_linearity_in_theta():
    spec = advection_diffusion_spec(1, c=0.4)
    t1 = np.array([1.0, 0.3])
    t2 = np.array([2.0, -0.5])
    B1 = galerkin_drift(spec, t1, 12).B
    B2 = galerkin_drift(spec, t2, 12).B
    mid = galerkin_drift(spec, 0.5 * (t1 + t2), 12).B
    assert np.allclose(mid, 0.5 * (B1 + B2), atol=1e-12)


def test_symmetric_part_negative_definite():
    spec = advection_diffusion_spec(1, c=0.4)
    for theta in ([1.0, 0.5], [2.0, -1.0]):
        system = galerkin_drift(spec, theta, 24)
        shifted = system.B - system.c_theta * np.eye(system.size)
        top = np.linalg.eigvalsh(0.5 * (shifted + shifted.T))[-1]
        assert top < 0.0


def test_eigenvalue_growth():
    spec = advection_diffusion_spec(1, c=0.0)
    system = galerkin_drift(spec, [1.0, 0.0], 64)
    lam = system.lambdas
    assert np.all(np.diff(lam) > 0)
    j = np.arange(1, 65)
    assert np.allclose(lam, (j * np.pi) ** 2)
    spec2 = reaction_spec_2d()
    system2 = galerkin_drift(spec2, [-0.5], (8, 8))
    lam2 = system2.lambdas
    assert np.all(np.diff(lam2) >= 0)
    # growth like j^{2/d} = j in d=2
    ratio = lam2[-1] / lam2[len(lam2) // 2]
    assert 1.5 < ratio < 3.0


def test_galerkin_2d_mixed_derivative_quadrature():
    # anisotropic operator with a mixed second derivative
    spec = OperatorSpec(
        dim=2,
        coeffs=({}, {(2, 0): 1.0, (0, 2): 1.0, (1, 1): 0.6}),
        orders=(0, 2))
    system = galerkin_drift(spec, [1.0], (3, 3))
    modes = system.modes
    x, w = composite_gauss_legendre(0.0, 1.0, 12, 6)

    def e(j, x):
        return np.sqrt(2) * np.sin(j * np.pi * x)

    def de(j, x):
        return np.sqrt(2) * j * np.pi * np.cos(j * np.pi * x)

    j1, j2 = modes[0]
    l1, l2 = modes[4]
    lhs = system.B[0, 4]
    mixed = (np.sum(w * de(l1, x) * e(j1, x))
             * np.sum(w * de(l2, x) * e(j2, x)))
    lap = 0.0
    if (j1, j2) == (l1, l2):
        lap = -((l1 * np.pi) ** 2 + (l2 * np.pi) ** 2)
    assert lhs == pytest.approx(lap + 0.6 * mixed, abs=1e-9)


def test_config_round_trip():
    spec = advection_diffusion_spec(2, b=[0.6, 0.8], c=0.25,
                                    with_reaction=True)
    cfg = operator_spec_to_config(spec)
    back = operator_spec_from_config(json.dumps(cfg))
    assert back.dim == spec.dim and back.orders == spec.orders
    assert back.coeffs == spec.coeffs


def test_config_validation():
    with pytest.raises(ValueError):
        operator_spec_from_config({"dimension": 1, "p": 3,
                                   "operators": [{"coeffs": {"2": 1.0}}]})
    with pytest.raises(ValueError):
        OperatorSpec(dim=1, coeffs=({}, {(2,): 1.0}), orders=(0, 1))


def test_zero_operator_rejected_except_a0():
    with pytest.raises(ValueError):
        OperatorSpec(dim=1, coeffs=({}, {}), orders=(0, 0))
    spec = OperatorSpec(dim=1, coeffs=({}, {(2,): 1.0}), orders=(0, 2))
    assert spec.p == 1
