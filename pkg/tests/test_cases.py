import numpy as np
import pytest

from hdgflow.cases import manufactured_case, polynomial_patch_case
from hdgflow.mesh import generate_structured
from hdgflow.quadrature import cell_quadrature


@pytest.mark.parametrize("name", ["bubble", "gyre"])
def test_divergence_free_at_random_points(name, rng):
    case = manufactured_case(name)
    pts = rng.uniform(0.0, 1.0, (50, 2))
    g = case.grad_u(pts)
    assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() <= 1e-10


@pytest.mark.parametrize("name", ["bubble", "gyre"])
def test_velocity_vanishes_on_boundary(name, rng):
    case = manufactured_case(name)
    s = rng.uniform(0.0, 1.0, 40)
    edges = np.vstack([
        np.column_stack([s, np.zeros_like(s)]),
        np.column_stack([s, np.ones_like(s)]),
        np.column_stack([np.zeros_like(s), s]),
        np.column_stack([np.ones_like(s), s]),
    ])
    assert np.abs(case.u(edges)).max() <= 1e-12


@pytest.mark.parametrize("name", ["bubble", "gyre"])
def test_pressure_mean_zero(name):
    case = manufactured_case(name)
    total = 0.0
    mesh = generate_structured("quad", 8)
    for ic in range(mesh.n_cells):
        rule = cell_quadrature(mesh.vertices[mesh.cells[ic]], 12)
        total += float(rule.weights @ case.p(rule.points))
    assert abs(total) <= 1e-8


def test_gradient_matches_finite_differences(rng):
    case = manufactured_case("gyre")
    pts = rng.uniform(0.1, 0.9, (20, 2))
    eps = 1e-6
    gx = (case.u(pts + [eps, 0.0]) - case.u(pts - [eps, 0.0])) / (2 * eps)
    gy = (case.u(pts + [0.0, eps]) - case.u(pts - [0.0, eps])) / (2 * eps)
    g = case.grad_u(pts)
    assert np.abs(g[:, :, 0] - gx).max() <= 1e-6
    assert np.abs(g[:, :, 1] - gy).max() <= 1e-6


def test_bubble_forcing_matches_finite_difference_oracle():
    # independent oracle: -nu lap(u) + (u . grad)u + grad p by central
    # differences; div(u x u) = (u . grad)u for the divergence-free field
    case = manufactured_case("bubble", nu=1.0)
    x0, y0 = 0.5, 0.5
    eps = 1e-5

    u_at = lambda x, y: case.u(np.array([[x, y]]))[0]
    p_at = lambda x, y: case.p(np.array([[x, y]]))[0]
    lap = (u_at(x0 + eps, y0) + u_at(x0 - eps, y0) + u_at(x0, y0 + eps)
           + u_at(x0, y0 - eps) - 4.0 * u_at(x0, y0)) / eps ** 2
    ux = (u_at(x0 + eps, y0) - u_at(x0 - eps, y0)) / (2 * eps)
    uy = (u_at(x0, y0 + eps) - u_at(x0, y0 - eps)) / (2 * eps)
    u0 = u_at(x0, y0)
    gp = np.array([(p_at(x0 + eps, y0) - p_at(x0 - eps, y0)) / (2 * eps),
                   (p_at(x0, y0 + eps) - p_at(x0, y0 - eps)) / (2 * eps)])
    oracle = -lap + (u0[0] * ux + u0[1] * uy) + gp
    got = case.f(np.array([[x0, y0]]))[0]
    assert np.abs(got - oracle).max() <= 1e-6


def test_stokes_forcing_drops_convection():
    case = manufactured_case("gyre", nu=2.0)
    pts = np.array([[0.3, 0.7], [0.6, 0.2]])
    g = case.grad_u(pts)
    u = case.u(pts)
    convective = np.einsum("nij,nj->ni", g, u)
    assert np.abs(case.f(pts) - case.f_stokes(pts) - convective).max() <= 1e-10


def test_scaled_forcing():
    case = manufactured_case("bubble")
    pts = np.array([[0.25, 0.75]])
    assert np.allclose(case.scaled_forcing(1e-2)(pts), 1e-2 * case.f(pts))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_patch_cases_divergence_free_and_mean_zero(k, rng):
    case = polynomial_patch_case(k)
    pts = rng.uniform(0.0, 1.0, (30, 2))
    g = case.grad_u(pts)
    assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() <= 1e-12
    mesh = generate_structured("quad", 4)
    total = sum(float(cell_quadrature(mesh.vertices[mesh.cells[ic]], 8).weights
                      @ case.p(cell_quadrature(mesh.vertices[mesh.cells[ic]], 8).points))
                for ic in range(mesh.n_cells))
    assert abs(total) <= 1e-12
