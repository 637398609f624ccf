"""Quadrature rules on the reference tetrahedron and triangle.

Rules are constructed by collapsing tensor-product Gauss-Legendre rules onto
the simplex (Duffy transform), so a rule of any requested polynomial degree is
available from one code path.  The degree-4 rules returned by ``tet_rule(4)``
and ``tri_rule(4)`` are the default volume and surface rules used for
assembly; with the piecewise-constant coefficients employed here they are
exact for every integrand that arises from P2/P0 elements on affine cells.

Reference simplices:
    tetrahedron: {x, y, z >= 0, x + y + z <= 1}, volume 1/6
    triangle:    {x, y >= 0, x + y <= 1},        area   1/2
"""

from __future__ import annotations

import numpy as np


def gauss_01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def tet_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Volume rule on the reference tetrahedron, exact for total degree `degree`.

    Returns (points, weights) with points of shape (Q, 3); weights sum to 1/6.
    """
    # Duffy map x=u, y=v(1-u), z=w(1-u)(1-v) has Jacobian (1-u)^2 (1-v), so a
    # total-degree-d integrand needs 1D exactness d+2; Gauss with k points is
    # exact to 2k-1.
    k = (degree + 4) // 2
    x1, w1 = gauss_01(k)
    u, v, w = np.meshgrid(x1, x1, x1, indexing="ij")
    wu, wv, ww = np.meshgrid(w1, w1, w1, indexing="ij")
    pts = np.stack(
        [u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)], axis=-1
    ).reshape(-1, 3)
    wts = (wu * wv * ww * (1.0 - u) ** 2 * (1.0 - v)).reshape(-1)
    return pts, wts


def tri_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Surface rule on the reference triangle, exact for total degree `degree`.

    Returns (points, weights) with points of shape (Q, 2); weights sum to 1/2.
    """
    k = (degree + 3) // 2
    x1, w1 = gauss_01(k)
    u, v = np.meshgrid(x1, x1, indexing="ij")
    wu, wv = np.meshgrid(w1, w1, indexing="ij")
    pts = np.stack([u, v * (1.0 - u)], axis=-1).reshape(-1, 2)
    wts = (wu * wv * (1.0 - u)).reshape(-1)
    return pts, wts


def _subdivide(tri):
    (a, b, c) = tri
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]


def tri_rule_subdivided(degree: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite triangle rule: `degree`-rule applied on 4**levels sub-triangles.

    Used for quadrature self-convergence studies of surface integrals.
    """
    base_pts, base_wts = tri_rule(degree)
    tris = [(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))]
    for _ in range(levels):
        tris = [child for tri in tris for child in _subdivide(tri)]
    pts, wts = [], []
    for (a, b, c) in tris:
        jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        pts.append(a + np.outer(base_pts[:, 0], b - a) + np.outer(base_pts[:, 1], c - a))
        wts.append(base_wts * jac)
    return np.concatenate(pts), np.concatenate(wts)
