"""Quadrature rules and Lagrange bases on the reference triangle."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def triangle_rule(order: int):
    """Collapsed (Duffy) Gauss rule on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``order``.  Returns points (nq, 2)
    and weights (nq,) summing to 1/2.
    """
    n = max(1, (order + 2) // 2)
    a, wa = np.polynomial.legendre.leggauss(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    r, s = 0.5 * (a + 1.0), 0.5 * (b + 1.0)
    R, S = np.meshgrid(r, s, indexing="ij")
    W = np.outer(wa, wb) / 8.0
    pts = np.column_stack([(R * (1.0 - S)).ravel(), S.ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def line_rule(n: int = 3):
    """Gauss-Legendre points and weights on [0, 1]."""
    a, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + 1.0), 0.5 * w


def p1_basis(pts):
    x, y = pts[:, 0], pts[:, 1]
    val = np.column_stack([1.0 - x - y, x, y])
    grad = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
                           (len(pts), 3, 2)).copy()
    return val, grad


def p2_basis(pts):
    """Quadratic basis: vertices 0, 1, 2 then midpoints of edges (0,1), (1,2), (2,0)."""
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    val = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    # d(lambda_i)/d(x, y)
    g0, g1, g2 = np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])
    L = [l0, l1, l2]
    G = [g0, g1, g2]
    grad = np.empty((len(pts), 6, 2))
    for i in range(3):
        grad[:, i] = (4 * L[i] - 1)[:, None] * G[i]
    for k, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
        grad[:, 3 + k] = 4 * (L[i][:, None] * G[j] + L[j][:, None] * G[i])
    return val, grad


def p2_line_basis(s):
    """Quadratic trace basis on an edge parametrized by s in [0, 1]:
    start vertex, end vertex, midpoint."""
    return np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])


def p1_line_basis(s):
    return np.column_stack([1 - s, s])
