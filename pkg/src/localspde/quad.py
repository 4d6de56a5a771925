"""Gauss-Legendre quadrature helpers used throughout the library."""

from __future__ import annotations

import itertools

import numpy as np


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_gauss_legendre(a: float, b: float, n: int, panels: int):
    """Composite rule: `panels` equal panels with n Gauss-Legendre nodes each."""
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def tensor_rule(dim: int, a: float, b: float, n: int):
    """Tensor Gauss-Legendre rule on [a, b]^dim.

    Returns points of shape (n**dim, dim) and weights of shape (n**dim,).
    """
    x, w = gauss_legendre(a, b, n)
    pts = np.array(list(itertools.product(x, repeat=dim)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return pts, wts


def integrate_tensor(f, dim: int, a: float, b: float, n: int) -> float:
    """Integrate a vectorized function over [a, b]^dim with a tensor GL rule."""
    pts, wts = tensor_rule(dim, a, b, n)
    return float(np.sum(wts * f(pts)))


def integrate_with_doubling(f, dim: int, a: float, b: float, n: int = 40,
                            rtol: float = 1e-9, max_doublings: int = 3):
    """Integrate, doubling the per-axis node count until the value is stable.

    Returns (value, error_estimate). The error estimate is the change under
    the last doubling.
    """
    val = integrate_tensor(f, dim, a, b, n)
    err = np.inf
    for _ in range(max_doublings):
        n *= 2
        new = integrate_tensor(f, dim, a, b, n)
        err = abs(new - val)
        val = new
        if err <= rtol * max(1.0, abs(val)):
            break
    return val, err
