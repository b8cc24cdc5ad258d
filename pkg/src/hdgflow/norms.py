"""Discrete norms for (cell field, face field) pairs and error measurement.

The triple norm |||(v, mu)|||_{1,h} is the broken gradient norm plus the
h_K^{-1/2}-weighted trace mismatch summed over all cell boundaries (interior
faces therefore contribute from both sides, each with its own cell's h_K).
``discrete_H1`` is the same norm with mu set to the face average of v, with
the convention that the average on a boundary face equals the one-sided
trace, so boundary faces contribute no jump.
"""

from __future__ import annotations

import math

import numpy as np

from .basis import SpaceSet
from .quadrature import cell_quadrature, face_quadrature


# ---------------------------------------------------------------------------
# algebraic norms of discrete coefficient fields


def state_triple_1h(space: SpaceSet, u_coeffs, uhat_coeffs) -> float:
    """|||(u, uhat)|||_{1,h} for coefficient arrays (vector cell/face fields)."""
    total = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        c = u_coeffs[ic].reshape(2, space.mk1)
        total += float(np.einsum("cm,mn,cn->", c, ed.stiff_k1, c))
        for fd in ed.faces:
            hc = uhat_coeffs[fd.fid].reshape(2, space.k + 1)
            tr = fd.phi_k1 @ c.T
            mism = tr - fd.psi @ hc.T
            total += float(fd.wts @ np.sum(mism ** 2, axis=1)) / ed.h
    return math.sqrt(total)


def state_triple_0h(space: SpaceSet, u_coeffs, uhat_coeffs) -> float:
    """|||(u, uhat)|||_{0,h}: L2 plus h_K^{1/2}-weighted trace terms."""
    total = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        c = u_coeffs[ic].reshape(2, space.mk1)
        total += float(np.einsum("cm,mn,cn->", c, ed.mass_k1, c))
        for fd in ed.faces:
            hc = uhat_coeffs[fd.fid].reshape(2, space.k + 1)
            tr = fd.phi_k1 @ c.T
            mu = fd.psi @ hc.T
            total += ed.h * float(fd.wts @ np.sum(mu ** 2, axis=1))
            total += ed.h * float(fd.wts @ np.sum((tr - mu) ** 2, axis=1))
    return math.sqrt(total)


def state_discrete_H1(space: SpaceSet, u_coeffs) -> float:
    """Standard discrete H1-seminorm of a V_h field (face-average trace)."""
    total = 0.0
    mesh = space.mesh
    for ic in range(mesh.n_cells):
        ed = space.elements[ic]
        c = u_coeffs[ic].reshape(2, space.mk1)
        total += float(np.einsum("cm,mn,cn->", c, ed.stiff_k1, c))
    # v - {{v}} = +/- [v]/2 on interior faces, 0 on boundary faces
    for fid, f in enumerate(mesh.faces):
        if f.right < 0:
            continue
        fd_l = next(fd for fd in space.elements[f.left].faces if fd.fid == fid)
        fd_r = next(fd for fd in space.elements[f.right].faces if fd.fid == fid)
        cl = u_coeffs[f.left].reshape(2, space.mk1)
        cr = u_coeffs[f.right].reshape(2, space.mk1)
        jump = fd_l.phi_k1 @ cl.T - fd_r.phi_k1 @ cr.T
        j2 = float(fd_l.wts @ np.sum(jump ** 2, axis=1))
        total += 0.25 * j2 * (1.0 / mesh.h_cell[f.left] + 1.0 / mesh.h_cell[f.right])
    return math.sqrt(total)


def state_linf(space: SpaceSet, u_coeffs, uhat_coeffs) -> float:
    """|||.|||_{inf,h} sampled at quadrature points and cell vertices."""
    vmax = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        c = u_coeffs[ic].reshape(2, space.mk1)
        pts = np.vstack([ed.pts, space.mesh.vertices[space.mesh.cells[ic]]])
        vals = space.basis_k1[ic].eval(pts) @ c.T
        vmax = max(vmax, float(np.abs(vals).max()))
    mmax = 0.0
    for fid in range(space.mesh.n_faces):
        fd = next(fd for fd in space.elements[space.mesh.faces[fid].left].faces
                  if fd.fid == fid)
        hc = uhat_coeffs[fid].reshape(2, space.k + 1)
        mmax = max(mmax, float(np.abs(fd.psi @ hc.T).max()))
    return vmax + mmax


# ---------------------------------------------------------------------------
# norms of pointwise-evaluable field pairs


def triple_norm_1h(mesh, v, grad_v, mu, order: int = 8) -> float:
    """|||(v, mu)|||_{1,h} for callables.

    v(pts) -> (n, 2), grad_v(pts) -> (n, 2, 2) [entry (i, j) = d v_i / d x_j],
    mu(pts) -> (n, 2) single-valued on faces.  Pass ``v=None`` (with
    ``grad_v=None``) for a zero cell field.
    """
    total = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        if grad_v is not None:
            rule = cell_quadrature(verts, order)
            g = np.asarray(grad_v(rule.points), dtype=float)
            total += float(rule.weights @ np.sum(g ** 2, axis=(1, 2)))
        for fid, _sign in mesh.cell_faces[ic]:
            f = mesh.faces[fid]
            a, b = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
            fr = face_quadrature(a, b, order)
            vv = np.asarray(v(fr.points), dtype=float) if v is not None else 0.0
            mm = np.asarray(mu(fr.points), dtype=float)
            mism = vv - mm
            total += float(fr.weights @ np.sum(mism ** 2, axis=1)) / mesh.h_cell[ic]
    return math.sqrt(total)


def triple_norm_0h(mesh, v, mu, order: int = 8) -> float:
    total = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, order)
        vv = np.asarray(v(rule.points), dtype=float)
        total += float(rule.weights @ np.sum(vv ** 2, axis=1))
        for fid, _sign in mesh.cell_faces[ic]:
            f = mesh.faces[fid]
            a, b = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
            fr = face_quadrature(a, b, order)
            vf = np.asarray(v(fr.points), dtype=float)
            mm = np.asarray(mu(fr.points), dtype=float)
            total += mesh.h_cell[ic] * float(fr.weights @ np.sum(mm ** 2, axis=1))
            total += mesh.h_cell[ic] * float(fr.weights @ np.sum((vf - mm) ** 2, axis=1))
    return math.sqrt(total)


def triple_norm_infh(mesh, v, mu, order: int = 8) -> float:
    """L-infinity pair norm approximated by sampling at quadrature points and
    vertices (documented approximation, tolerance ~1e-3 on smooth fields)."""
    vmax = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, order)
        pts = np.vstack([rule.points, verts])
        vmax = max(vmax, float(np.abs(np.asarray(v(pts))).max()))
    mmax = 0.0
    for f in mesh.faces:
        a, b = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
        fr = face_quadrature(a, b, order)
        pts = np.vstack([fr.points, a[None, :], b[None, :]])
        mmax = max(mmax, float(np.abs(np.asarray(mu(pts))).max()))
    return vmax + mmax


def discrete_H1(mesh, v, grad_v, order: int = 8) -> float:
    """Discrete H1-seminorm of a globally defined (possibly continuous) field:
    jump terms vanish, leaving the broken gradient norm."""
    total = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, order)
        g = np.asarray(grad_v(rule.points), dtype=float)
        total += float(rule.weights @ np.sum(g ** 2, axis=(1, 2)))
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# errors against an exact solution


def errors_against_exact(space: SpaceSet, state, case) -> dict:
    """The four error norms of the a priori theory plus the trace variant.

    Keys: err_L, err_u, err_u_1h (discrete H1 with face averages), err_p,
    err_u_triple (|||(u - u_h, u|_F - uhat_h)|||_{1,h}).  Volume integrals
    use a rule two orders above the solution space so the measured orders
    reflect discretization, not integration.
    """
    mesh = space.mesh
    order = 2 * (space.k + 2) + 2
    e_L2 = e_u2 = e_p2 = grad2 = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, order)
        w = rule.weights

        Lex = np.asarray(case.grad_u(rule.points), dtype=float)
        Lh = space.eval_gradient_field(ic, state.L[ic], rule.points)
        e_L2 += float(w @ np.sum((Lex - Lh) ** 2, axis=(1, 2)))

        uex = np.asarray(case.u(rule.points), dtype=float)
        uh = space.eval_velocity(ic, state.u[ic], rule.points)
        e_u2 += float(w @ np.sum((uex - uh) ** 2, axis=1))

        pex = np.asarray(case.p(rule.points), dtype=float)
        ph = space.eval_pressure(ic, state.p[ic], rule.points)
        e_p2 += float(w @ (pex - ph) ** 2)

        gex = np.asarray(case.grad_u(rule.points), dtype=float)
        gh = space.eval_velocity_grad(ic, state.u[ic], rule.points)
        grad2 += float(w @ np.sum((gex - gh) ** 2, axis=(1, 2)))

    # jump part of the discrete H1 error: the exact field cancels in v - {{v}}
    jump2 = 0.0
    for fid, f in enumerate(mesh.faces):
        if f.right < 0:
            continue
        fd_l = next(fd for fd in space.elements[f.left].faces if fd.fid == fid)
        fd_r = next(fd for fd in space.elements[f.right].faces if fd.fid == fid)
        cl = state.u[f.left].reshape(2, space.mk1)
        cr = state.u[f.right].reshape(2, space.mk1)
        jump = fd_l.phi_k1 @ cl.T - fd_r.phi_k1 @ cr.T
        j2 = float(fd_l.wts @ np.sum(jump ** 2, axis=1))
        jump2 += 0.25 * j2 * (1.0 / mesh.h_cell[f.left] + 1.0 / mesh.h_cell[f.right])

    # trace-variant mismatch: (u - u_h) - (u - uhat_h) = uhat_h - u_h on each side
    mism2 = 0.0
    for ic in range(mesh.n_cells):
        ed = space.elements[ic]
        c = state.u[ic].reshape(2, space.mk1)
        for fd in ed.faces:
            hc = state.uhat[fd.fid].reshape(2, space.k + 1)
            mism = fd.phi_k1 @ c.T - fd.psi @ hc.T
            mism2 += float(fd.wts @ np.sum(mism ** 2, axis=1)) / ed.h

    return {
        "err_L": math.sqrt(e_L2),
        "err_u": math.sqrt(e_u2),
        "err_u_1h": math.sqrt(grad2 + jump2),
        "err_p": math.sqrt(e_p2),
        "err_u_triple": math.sqrt(grad2 + mism2),
    }


def field_norm_l2(mesh, f, order: int = 10, vector: bool | None = None) -> float:
    """Global L2 norm of an analytic field (scalar or vector) by quadrature."""
    total = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, order)
        vals = np.asarray(f(rule.points), dtype=float)
        if vals.ndim == 1:
            total += float(rule.weights @ vals ** 2)
        else:
            total += float(rule.weights @ np.sum(vals ** 2, axis=tuple(range(1, vals.ndim))))
    return math.sqrt(total)


def stabilization_seminorm(space: SpaceSet, state, nu: float = 1.0) -> tuple[float, float]:
    """(||L_h||, h^{-1/2}-weighted ||Pi_M u_h - uhat_h|| over cell boundaries)."""
    L2 = 0.0
    s2 = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        Lc = state.L[ic].reshape(4, space.mk)
        L2 += float(np.einsum("em,mn,en->", Lc, ed.mass_k, Lc))
        c = state.u[ic].reshape(2, space.mk1)
        for fd in ed.faces:
            hc = state.uhat[fd.fid].reshape(2, space.k + 1)
            mism = c @ fd.E_k1.T - hc
            s2 += float(np.sum(mism ** 2)) / ed.h
    return math.sqrt(L2), math.sqrt(s2)


def gradient_bound_ratio(space: SpaceSet, state) -> float:
    """|||(u_h, uhat_h)|||_{1,h} / (||L_h|| + h^{-1/2}||Pi_M u_h - uhat_h||).

    Meaningful when the state satisfies the discrete gradient equation, in
    which case the ratio is bounded uniformly in h.
    """
    num = state_triple_1h(space, state.u, state.uhat)
    l_norm, s_norm = stabilization_seminorm(space, state)
    den = l_norm + s_norm
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den
