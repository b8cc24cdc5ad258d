import math

import numpy as np
import pytest

from hdgflow.basis import (CellBasis, FaceBasis, SpaceSet, poly_space_dim,
                           project_cell, project_face, projection_eoc_diagnostic)
from hdgflow.mesh import build_family, generate_structured
from hdgflow.quadrature import cell_quadrature, face_quadrature

from conftest import regular_polygon, unit_square_vertices


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
@pytest.mark.parametrize("shape", ["square", "hexagon"])
def test_cell_basis_orthonormal(degree, shape):
    verts = unit_square_vertices() if shape == "square" else regular_polygon(6, 0.4)
    basis = CellBasis(verts, degree)
    rule = cell_quadrature(verts, 2 * degree + 4)
    phi = basis.eval(rule.points)
    gram = phi.T @ (rule.weights[:, None] * phi)
    assert np.abs(gram - np.eye(basis.dim)).max() <= 1e-10


def test_cell_basis_mode0_constant():
    basis = CellBasis(regular_polygon(5, 2.0), 3)
    pts = np.array([[0.1, 0.2], [-0.5, 1.0], [0.9, -0.3]])
    vals = basis.eval(pts)[:, 0]
    assert np.ptp(vals) == 0.0


def test_face_basis_orthonormal():
    a, b = np.array([0.2, -0.1]), np.array([1.4, 0.8])
    fb = FaceBasis(a, b, 3)
    rule = face_quadrature(a, b, 10)
    psi = fb.eval(rule.points)
    gram = psi.T @ (rule.weights[:, None] * psi)
    assert np.abs(gram - np.eye(4)).max() <= 1e-12


def test_gradients_match_finite_differences(rng):
    basis = CellBasis(regular_polygon(6, 1.1), 3)
    pts = rng.uniform(-0.3, 0.3, (12, 2))
    gx, gy = basis.grad(pts)
    eps = 1e-6
    fx = (basis.eval(pts + [eps, 0.0]) - basis.eval(pts - [eps, 0.0])) / (2 * eps)
    fy = (basis.eval(pts + [0.0, eps]) - basis.eval(pts - [0.0, eps])) / (2 * eps)
    scale = max(1.0, np.abs(gx).max(), np.abs(gy).max())
    assert np.abs(gx - fx).max() / scale <= 1e-6
    assert np.abs(gy - fy).max() / scale <= 1e-6


def test_project_constant_every_target():
    space = SpaceSet(generate_structured("hexdom", 2), 1)
    for ic in [0, 3]:
        cq = project_cell(space, ic, lambda p: np.full(len(p), 2.5), "Q")
        assert np.allclose(space.eval_pressure(ic, cq, space.elements[ic].pts), 2.5,
                           atol=1e-12)
        cv = project_cell(space, ic, lambda p: np.tile([1.5, -0.5], (len(p), 1)), "V")
        vals = space.eval_velocity(ic, cv, space.elements[ic].pts)
        assert np.allclose(vals, [1.5, -0.5], atol=1e-12)


def test_project_x_squared_matches_dense_normal_equations():
    # oracle: solve the 3x3 normal equations for P_1 on the unit square in
    # the monomial basis with exact integrals
    gram = np.array([[1.0, 0.5, 0.5], [0.5, 1.0 / 3.0, 0.25], [0.5, 0.25, 1.0 / 3.0]])
    moments = np.array([1.0 / 3.0, 0.25, 1.0 / 6.0])
    alpha = np.linalg.solve(gram, moments)   # projection = alpha . (1, x, y)

    space = SpaceSet(generate_structured("quad", 1), 1)
    coeffs = project_cell(space, 0, lambda p: p[:, 0] ** 2, "Q")
    pts = np.array([[0.1, 0.3], [0.7, 0.9], [0.5, 0.5], [0.25, 0.75]])
    got = space.eval_pressure(0, coeffs, pts)
    oracle = alpha[0] + alpha[1] * pts[:, 0] + alpha[2] * pts[:, 1]
    assert np.abs(got - oracle).max() <= 1e-10
    # the known closed form x - 1/6
    assert np.abs(got - (pts[:, 0] - 1.0 / 6.0)).max() <= 1e-10


def test_projection_residual_orthogonality(rng):
    space = SpaceSet(generate_structured("hexdom", 2), 2)
    ed = space.elements[1]
    coeff = rng.standard_normal(poly_space_dim(4))
    exps = [(a, d - a) for d in range(5) for a in range(d, -1, -1)]
    f = lambda p: sum(c * p[:, 0] ** a * p[:, 1] ** b
                      for c, (a, b) in zip(coeff, exps))
    proj = project_cell(space, 1, f, "Q")
    res = f(ed.pts) - space.eval_pressure(1, proj, ed.pts)
    moments = ed.phi_k.T @ (ed.wts * res)
    assert np.abs(moments).max() <= 1e-10


def test_projection_idempotent(rng):
    space = SpaceSet(generate_structured("tri", 2), 1)
    f = lambda p: np.column_stack([np.sin(p[:, 0]), np.cos(3 * p[:, 1])])
    first = project_cell(space, 0, f, "V")
    again = project_cell(space, 0,
                         lambda p: space.eval_velocity(0, first, p), "V")
    assert np.abs(first - again).max() <= 1e-12


def test_projection_reproduces_velocity_space():
    space = SpaceSet(generate_structured("quad", 2), 1)
    f = lambda p: np.column_stack([p[:, 0] ** 2 - p[:, 1], 1.0 + p[:, 0] * p[:, 1]])
    coeffs = project_cell(space, 2, f, "V")
    pts = np.array([[0.6, 0.1], [0.9, 0.4], [0.55, 0.3]])
    assert np.abs(space.eval_velocity(2, coeffs, pts) - f(pts)).max() <= 1e-12


def test_face_projection_mean_of_linear():
    space = SpaceSet(generate_structured("quad", 1), 0)
    fid = 0
    f = space.mesh.faces[fid]
    a = space.mesh.vertices[f.vertices[0]]
    d = space.mesh.vertices[f.vertices[1]] - a
    g = lambda p: np.column_stack([(p - a) @ d / (d @ d), np.zeros(len(p))])
    coeffs = project_face(space, fid, g)
    mid = (a + 0.5 * d)[None, :]
    val = space.eval_trace(fid, coeffs, mid)
    assert val[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert val[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_face_projection_s_squared_k1():
    # oracle: 2x2 normal equations for s^2 on [0, 1] against (1, s):
    # projection is s - 1/6
    space = SpaceSet(generate_structured("quad", 1), 1)
    fid = 0
    f = space.mesh.faces[fid]
    a = space.mesh.vertices[f.vertices[0]]
    d = space.mesh.vertices[f.vertices[1]] - a
    s_of = lambda p: (p - a) @ d / (d @ d)
    g = lambda p: np.column_stack([s_of(p) ** 2, np.zeros(len(p))])
    coeffs = project_face(space, fid, g)
    rule = face_quadrature(a, a + d, 8)
    got = space.eval_trace(fid, coeffs, rule.points)[:, 0]
    assert np.abs(got - (s_of(rule.points) - 1.0 / 6.0)).max() <= 1e-12


def test_projection_eoc_cell_rate_k1():
    fam = build_family("quad", 3, 4)
    diag = projection_eoc_diagnostic(
        fam, 1, scalar_field=lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1]))
    assert 1.8 <= diag["cell_l2_eoc"][-1] <= 2.2


def test_projection_eoc_in_space_is_exact():
    fam = build_family("quad", 2, 2)
    diag = projection_eoc_diagnostic(fam, 1, scalar_field=lambda p: 1.0 + 2.0 * p[:, 0])
    assert all(e <= 1e-13 for e in diag["cell_l2"])
    assert all(v is None for v in diag["cell_l2_eoc"])


def test_projection_eoc_face_rates_k0():
    fam = build_family("quad", 3, 4)
    vf = lambda p: np.column_stack([np.sin(np.pi * p[:, 0]) * p[:, 1], np.cos(p[:, 0])])
    diag = projection_eoc_diagnostic(fam, 0, vector_field=vf)
    # raw skeleton norm scales like h^(k+1/2); the h_K^(1/2) weight restores k+1
    assert 0.3 <= diag["face_l2_eoc"][-1] <= 0.7
    assert 0.8 <= diag["face_l2_weighted_eoc"][-1] <= 1.2


def test_space_set_dof_counts():
    space = SpaceSet(generate_structured("tri", 1), 2)
    assert space.n_Ldof == 4 * 6
    assert space.n_udof == 2 * 10
    assert space.n_pdof == 6
    assert space.n_fdof == 2 * 3
