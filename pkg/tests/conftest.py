import numpy as np
import pytest

from hdgflow.quadrature import face_quadrature


def polygon_monomial_integral(vertices, a, b):
    """Exact integral of x^a y^b over a simple polygon.

    Independent oracle: Green's theorem reduces the area integral to edge
    integrals of x^(a+1) y^b / (a+1) dy, each a 1D polynomial integrated
    exactly by Gauss-Legendre.  No fan triangulation involved.
    """
    verts = np.asarray(vertices, dtype=float)
    n = len(verts)
    total = 0.0
    npts = a + b + 2
    for i in range(n):
        p0, p1 = verts[i], verts[(i + 1) % n]
        rule = face_quadrature(p0, p1, 2 * npts)
        t = np.linspace(0.0, 1.0, 0)  # unused; parameterize through points
        x = rule.points[:, 0]
        y = rule.points[:, 1]
        dy_ds = (p1[1] - p0[1]) / np.linalg.norm(p1 - p0)
        total += float(rule.weights @ (x ** (a + 1) * y ** b * dy_ds)) / (a + 1)
    return total


def unit_square_vertices():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def regular_polygon(n_sides, radius=1.0):
    ang = np.linspace(0.0, 2.0 * np.pi, n_sides + 1)[:-1]
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
