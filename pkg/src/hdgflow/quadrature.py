"""Quadrature rules on segments, triangles, and star-shaped polygons.

Polygon rules come from a fan triangulation around the centroid, so every
cell handed to :func:`cell_quadrature` must be star-shaped with respect to
its centroid.  All rules have strictly positive weights and are exact (up to
roundoff) for polynomials of the requested total degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


class GeometryError(ValueError):
    """Raised for degenerate or non-star-shaped cell geometry."""


@dataclass(frozen=True)
class QuadRule:
    """Points and positive weights; 2D points on cells, 2D-embedded on faces."""

    points: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f) -> float:
        vals = f(self.points)
        return float(np.dot(self.weights, vals))


def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def triangle_rule(order: int):
    """Collapsed Gauss-Jacobi rule on the reference triangle (0,0),(1,0),(0,1).

    Exact for total degree <= order with ceil((order+1)/2)^2 points.
    Cached per order; treat the returned arrays as read-only.
    """
    n = max(1, math.ceil((order + 1) / 2))
    # Jacobi weight (1-x) absorbs the collapsed-coordinate Jacobian.
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xj + 1.0)
    wu = 0.25 * wj
    v, wv = gauss_legendre_01(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv)
    xi = uu.ravel()
    eta = (vv * (1.0 - uu)).ravel()
    return np.column_stack([xi, eta]), ww.ravel()


def map_to_triangle(ref_pts, ref_wts, v0, v1, v2):
    """Affine map of a reference-triangle rule to the triangle (v0, v1, v2)."""
    b = np.column_stack([v1 - v0, v2 - v0])
    det = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
    pts = v0[None, :] + ref_pts @ b.T
    return pts, ref_wts * abs(det)


def polygon_area_centroid(vertices: np.ndarray):
    """Signed shoelace area and area centroid of a simple polygon."""
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if abs(area) < 1e-300:
        raise GeometryError("polygon has zero area")
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return area, np.array([cx, cy])


def cell_quadrature(vertices: np.ndarray, order: int) -> QuadRule:
    """Quadrature on a star-shaped polygon via fan triangulation from the centroid.

    Parameters
    ----------
    vertices : (nv, 2) array, counter-clockwise
    order : requested polynomial exactness (total degree)
    """
    area, c = polygon_area_centroid(vertices)
    if area <= 0.0:
        raise GeometryError("polygon is not counter-clockwise oriented")
    ref_pts, ref_wts = triangle_rule(order)
    h = float(np.max(np.linalg.norm(vertices - c, axis=1)))
    pts_list, wts_list = [], []
    nv = len(vertices)
    for i in range(nv):
        v1, v2 = vertices[i], vertices[(i + 1) % nv]
        tri_area = 0.5 * ((v1[0] - c[0]) * (v2[1] - c[1]) - (v2[0] - c[0]) * (v1[1] - c[1]))
        if tri_area <= 1e-12 * h * h:
            raise GeometryError(
                f"degenerate or negatively oriented fan triangle at vertex {i}: "
                "cell is not star-shaped with respect to its centroid"
            )
        p, w = map_to_triangle(ref_pts, ref_wts, c, v1, v2)
        pts_list.append(p)
        wts_list.append(w)
    return QuadRule(np.vstack(pts_list), np.concatenate(wts_list), order)


def face_quadrature(a: np.ndarray, b: np.ndarray, order: int) -> QuadRule:
    """Gauss-Legendre rule along the segment from a to b."""
    n = max(1, math.ceil((order + 1) / 2))
    t, w = gauss_legendre_01(n)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    length = float(np.linalg.norm(b - a))
    return QuadRule(pts, w * length, order)
