"""Manufactured solutions with symbolically derived forcing.

Each case provides a divergence-free velocity (a stream-function curl), a
zero-mean pressure, the velocity gradient, and the body force obtained by
substituting the exact fields into the momentum balance

    f = -nu div(L) + div(u x u) + grad(p),      L = grad(u).

``f_stokes`` drops the convective part, which is what the linear Stokes
limit (frozen convection = 0) of the scheme balances; it drives the
polynomial patch tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    nu: float
    u: callable          # (n, 2) velocity
    grad_u: callable     # (n, 2, 2), entry (i, j) = d u_i / d x_j
    p: callable          # (n,) pressure, zero mean on the unit square
    f: callable          # (n, 2) Navier-Stokes forcing
    f_stokes: callable   # (n, 2) Stokes-limit forcing
    boundary: callable   # Dirichlet data = u restricted to the boundary

    def scaled_forcing(self, factor: float):
        return lambda pts: factor * self.f(pts)


def _vectorize_pair(fx, fy):
    def fun(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        vx = np.broadcast_to(np.asarray(fx(x, y), dtype=float), x.shape)
        vy = np.broadcast_to(np.asarray(fy(x, y), dtype=float), x.shape)
        return np.column_stack([vx, vy])
    return fun


def _vectorize_scalar(fs):
    def fun(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return np.broadcast_to(np.asarray(fs(x, y), dtype=float), x.shape).copy()
    return fun


def _vectorize_tensor(entries):
    def fun(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(x), 2, 2))
        for i in range(2):
            for j in range(2):
                out[:, i, j] = np.broadcast_to(
                    np.asarray(entries[i][j](x, y), dtype=float), x.shape)
        return out
    return fun


def case_from_symbolic(name: str, psi: sp.Expr, p_expr: sp.Expr,
                       nu: float = 1.0) -> ManufacturedCase:
    """Build a case from a stream function and a pressure expression."""
    x, y = sp.symbols("x y")
    u1 = sp.diff(psi, y)
    u2 = -sp.diff(psi, x)
    return case_from_fields(name, (u1, u2), p_expr, nu=nu)


def case_from_fields(name: str, u_exprs, p_expr, nu: float = 1.0) -> ManufacturedCase:
    x, y = sp.symbols("x y")
    u1, u2 = sp.sympify(u_exprs[0]), sp.sympify(u_exprs[1])
    p_expr = sp.sympify(p_expr)
    grad = [[sp.diff(u1, x), sp.diff(u1, y)],
            [sp.diff(u2, x), sp.diff(u2, y)]]
    lap = [sp.diff(u1, x, 2) + sp.diff(u1, y, 2),
           sp.diff(u2, x, 2) + sp.diff(u2, y, 2)]
    conv = [sp.diff(u1 * u1, x) + sp.diff(u1 * u2, y),
            sp.diff(u2 * u1, x) + sp.diff(u2 * u2, y)]
    gp = [sp.diff(p_expr, x), sp.diff(p_expr, y)]
    f_ns = [sp.simplify(-nu * lap[i] + conv[i] + gp[i]) for i in range(2)]
    f_st = [sp.simplify(-nu * lap[i] + gp[i]) for i in range(2)]

    lam = lambda e: sp.lambdify((x, y), e, modules="numpy")
    u_fun = _vectorize_pair(lam(u1), lam(u2))
    case = ManufacturedCase(
        name=name, nu=nu,
        u=u_fun,
        grad_u=_vectorize_tensor([[lam(grad[i][j]) for j in range(2)] for i in range(2)]),
        p=_vectorize_scalar(lam(p_expr)),
        f=_vectorize_pair(lam(f_ns[0]), lam(f_ns[1])),
        f_stokes=_vectorize_pair(lam(f_st[0]), lam(f_st[1])),
        boundary=u_fun,
    )
    return case


def manufactured_case(name: str, nu: float = 1.0) -> ManufacturedCase:
    """Catalog of homogeneous-Dirichlet cases on the unit square.

    bubble: stream function x^2 (1-x)^2 y^2 (1-y)^2 with pressure
    sin(2 pi x) sin(2 pi y); gyre: stream function sin^2(pi x) sin^2(pi y)
    with pressure cos(pi x) cos(pi y).  Both velocities vanish on the
    boundary and both pressures integrate to zero.
    """
    x, y = sp.symbols("x y")
    if name == "bubble":
        psi = x ** 2 * (1 - x) ** 2 * y ** 2 * (1 - y) ** 2
        pr = sp.sin(2 * sp.pi * x) * sp.sin(2 * sp.pi * y)
    elif name == "gyre":
        psi = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
        pr = sp.cos(sp.pi * x) * sp.cos(sp.pi * y)
    else:
        raise ValueError(f"unknown manufactured case {name!r}")
    return case_from_symbolic(name, psi, pr, nu=nu)


def polynomial_patch_case(k: int, nu: float = 1.0) -> ManufacturedCase:
    """Divergence-free u in P_k (componentwise), zero-mean p in P_k.

    Exactly representable in the degree-k spaces, so the Stokes limit of the
    scheme reproduces it to solver precision (with the Dirichlet lift).
    """
    x, y = sp.symbols("x y")
    if k == 0:
        u = (sp.Integer(1), sp.Integer(-2))
        p = sp.Integer(0)
    elif k == 1:
        u = (y, x)
        p = x + y - 1
    elif k == 2:
        u = (x ** 2 - 2 * x * y, y ** 2 - 2 * x * y)
        p = x ** 2 + y ** 2 - x * y - sp.Rational(5, 12)
    else:
        raise ValueError("polynomial patch cases are provided for k in {0, 1, 2}")
    return case_from_fields(f"patch_p{k}", u, p, nu=nu)
