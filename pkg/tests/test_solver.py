import numpy as np
import pytest

from hdgflow.basis import SpaceSet, project_state
from hdgflow.cases import manufactured_case, polynomial_patch_case
from hdgflow.forms import CallableConvection, DiscreteConvection
from hdgflow.mesh import generate_structured
from hdgflow.norms import errors_against_exact, state_triple_1h
from hdgflow.solver import (HDGState, OseenOperator, SolverError, check_state,
                            condense, picard_solve, residual_norms, solve_oseen)


def zero_f(p):
    return np.zeros((len(p), 2))


def random_polynomial_forcing(rng):
    c = rng.standard_normal(8)

    def f(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([c[0] + c[1] * x + c[2] * y + c[3] * x * y,
                                c[4] + c[5] * y + c[6] * x + c[7] * x ** 2])
    return f


def test_monolithic_dimension_single_cell_k0():
    space = SpaceSet(generate_structured("quad", 1), 0)
    A, b, _ = __import__("hdgflow.solver", fromlist=["assemble_monolithic"]) \
        .assemble_monolithic(space, 1.0, None, zero_f)
    # G: 4, V: 2 * dim P_1 = 6, Q: 1, no interior traces, one multiplier
    assert A.shape == (12, 12)
    assert b.shape == (12,)


def test_condensed_dimension_2x2_quad_k1():
    space = SpaceSet(generate_structured("quad", 2), 1)
    system = condense(space, 1.0, None, zero_f)
    # 4 interior faces x 4 trace dofs + 4 mean pressures + 1 multiplier
    assert system.size == 21


def test_zero_forcing_gives_zero_state():
    space = SpaceSet(generate_structured("tri", 2), 1)
    for mode in ("monolithic", "condensed"):
        st = solve_oseen(space, 1.0, None, zero_f, mode=mode)
        for arr in (st.L, st.u, st.p, st.uhat):
            assert np.abs(arr).max() <= 1e-14


def test_single_cell_condensed_matches_monolithic(rng):
    space = SpaceSet(generate_structured("quad", 1), 0)
    f = random_polynomial_forcing(rng)
    st1 = solve_oseen(space, 1.0, None, f, mode="monolithic")
    st2 = solve_oseen(space, 1.0, None, f, mode="condensed")
    for a, b in ((st1.L, st2.L), (st1.u, st2.u), (st1.p, st2.p), (st1.uhat, st2.uhat)):
        assert np.abs(a - b).max() <= 1e-10 * max(1.0, np.abs(a).max())


@pytest.mark.parametrize("kind,n,k", [("tri", 2, 0), ("quad", 2, 1), ("hexdom", 3, 1)])
def test_oracle_equivalence_random_oseen(kind, n, k, rng):
    mesh = generate_structured(kind, n)
    space = SpaceSet(mesh, k)
    w = rng.standard_normal((mesh.n_cells, space.n_udof))
    what = rng.standard_normal((mesh.n_faces, space.n_fdof))
    conv = DiscreteConvection(space, w, what)
    f = random_polynomial_forcing(rng)
    st1 = solve_oseen(space, 1.0, conv, f, mode="monolithic")
    st2 = solve_oseen(space, 1.0, conv, f, mode="condensed")
    for a, b in ((st1.L, st2.L), (st1.u, st2.u), (st1.p, st2.p), (st1.uhat, st2.uhat)):
        assert np.abs(a - b).max() <= 1e-9 * max(1.0, np.abs(a).max())


@pytest.mark.parametrize("k", [1, 2])
def test_polynomial_patch_exactness(k):
    # Stokes limit with inhomogeneous Dirichlet lift reproduces any exactly
    # representable solution
    case = polynomial_patch_case(k, nu=0.8)
    space = SpaceSet(generate_structured("hexdom", 3), k)
    st = solve_oseen(space, 0.8, None, case.f_stokes, mode="condensed",
                     gD=case.boundary)
    errs = errors_against_exact(space, st, case)
    assert all(v <= 1e-9 for v in errs.values())


def test_oseen_with_analytic_divergence_free_convection():
    # manufactured Oseen: with conv = exact u (divergence-free, trace equal
    # to the restriction), the exact NS solution solves the Oseen problem
    case = polynomial_patch_case(2, nu=1.0)
    conv = CallableConvection(case.u, lambda p: np.zeros(len(p)))
    space = SpaceSet(generate_structured("quad", 2), 2)
    st = solve_oseen(space, 1.0, conv, case.f, mode="condensed", gD=case.boundary)
    errs = errors_against_exact(space, st, case)
    assert all(v <= 1e-9 for v in errs.values())


def test_residual_and_invariants_after_solve(rng):
    mesh = generate_structured("hexdom", 3)
    space = SpaceSet(mesh, 1)
    f = random_polynomial_forcing(rng)
    w = rng.standard_normal((mesh.n_cells, space.n_udof))
    what = rng.standard_normal((mesh.n_faces, space.n_fdof))
    conv = DiscreteConvection(space, w, what)
    st = solve_oseen(space, 0.5, conv, f, mode="condensed")
    inv = check_state(space, 0.5, conv, f, st)
    assert abs(inv["pressure_mean"]) <= 1e-10
    assert inv["max_trace_flux"] <= 1e-10
    assert inv["residual_rel"] <= 1e-9


def test_residual_nonzero_for_wrong_state(rng):
    space = SpaceSet(generate_structured("quad", 2), 1)
    f = random_polynomial_forcing(rng)
    st = solve_oseen(space, 1.0, None, f, mode="condensed")
    bad = st.copy()
    bad.u += 0.1
    r0, b0 = residual_norms(space, 1.0, None, f, st)
    r1, _ = residual_norms(space, 1.0, None, f, bad)
    assert r0 / b0 <= 1e-12
    assert r1 / b0 > 1e-3


def test_picard_zero_forcing_converges_first_iteration():
    space = SpaceSet(generate_structured("quad", 2), 1)
    st, trace = picard_solve(space, 1.0, zero_f, tol=1e-10, max_iter=5)
    assert trace.iterations == 1
    assert trace.converged
    assert np.abs(st.u).max() <= 1e-14


def test_picard_small_forcing_contracts():
    case = manufactured_case("bubble", nu=1.0)
    space = SpaceSet(generate_structured("quad", 4), 1)
    st, trace = picard_solve(space, 1.0, case.scaled_forcing(1e-2), tol=1e-10,
                             max_iter=10)
    assert trace.converged
    assert all(r < 1.0 for r in trace.ratios)
    conv = DiscreteConvection(space, st.u, st.uhat)
    inv = check_state(space, 1.0, conv, case.scaled_forcing(1e-2), st)
    assert inv["residual_rel"] <= 1e-9


def test_picard_nonconvergence_raises_with_trace():
    case = manufactured_case("bubble", nu=1.0)
    space = SpaceSet(generate_structured("quad", 2), 0)
    with pytest.raises(SolverError) as err:
        picard_solve(space, 1.0, case.f, tol=1e-14, max_iter=1)
    assert err.value.trace is not None
    assert err.value.trace.iterations == 1


def test_picard_monitor_bounded_by_stokes_value():
    case = manufactured_case("bubble", nu=1.0)
    space = SpaceSet(generate_structured("quad", 4), 1)
    st, trace = picard_solve(space, 1.0, case.f, tol=1e-10, max_iter=20)
    assert trace.converged
    first = trace.monitors[0]
    assert all(m <= 2.0 * first for m in trace.monitors)


def test_state_invariants_fields():
    space = SpaceSet(generate_structured("quad", 2), 1)
    case = manufactured_case("gyre", nu=1.0)
    st, _ = picard_solve(space, 1.0, case.f, tol=1e-9, max_iter=30)
    assert abs(st.pressure_integral()) <= 1e-10
    assert np.abs(st.cell_trace_fluxes()).max() <= 1e-10


def test_nonlinear_residual_of_converged_fixed_point():
    case = manufactured_case("gyre", nu=1.0)
    space = SpaceSet(generate_structured("tri", 3), 1)
    tol = 1e-10
    st, trace = picard_solve(space, 1.0, case.f, tol=tol, max_iter=30)
    conv = DiscreteConvection(space, st.u, st.uhat)
    r, b = residual_norms(space, 1.0, conv, case.f, st)
    assert r / b <= 10.0 * tol


def test_invalid_inputs():
    space = SpaceSet(generate_structured("quad", 1), 0)
    with pytest.raises(ValueError):
        OseenOperator(space, -1.0, zero_f)
    with pytest.raises(ValueError):
        picard_solve(space, 1.0, zero_f, tol=-1.0)
    with pytest.raises(ValueError):
        solve_oseen(space, 1.0, None, zero_f, mode="direct")
