"""Element-local bilinear form, convective operator, and load assembly.

The steady scheme reads: find (L, u, p, uhat) such that for all test tuples
(G, v, q, mu) with mu vanishing on the boundary,

    S((L, u, p, uhat), (G, v, q, mu)) + O((u, uhat); (u, uhat), (v, mu)) = (f, v).

S collects the viscous, pressure, and projected-jump stabilization pairings;
O collects the five convective terms, linear in its second and third slots
for a frozen convection pair (w, what).  Both are assembled here cell by
cell into one dense matrix over the cell's [L | u | p | trace] dofs, with
row index = test dof and column index = trial dof in the same ordering, so
transposed pairings cancel exactly in the energy identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SpaceSet


def tau_c(w_dot_n):
    """Convective stabilization max(w.n, 0); works on scalars and arrays."""
    return np.maximum(w_dot_n, 0.0)


# ---------------------------------------------------------------------------
# convection fields


class ConvectionField:
    """Pair (w, what): cell velocity and single-valued face trace."""

    trace_is_restriction = False

    def volume(self, space: SpaceSet, cell: int, pts):
        """Values (nq, 2) and divergence (nq,) of w inside the cell."""
        raise NotImplementedError

    def cell_trace(self, space: SpaceSet, cell: int, fd, pts):
        """Trace of w on a face, taken from the given cell's side."""
        raise NotImplementedError

    def face_trace(self, space: SpaceSet, fid: int, pts):
        """Single-valued face field what."""
        raise NotImplementedError


class ZeroConvection(ConvectionField):
    trace_is_restriction = True

    def volume(self, space, cell, pts):
        n = len(pts)
        return np.zeros((n, 2)), np.zeros(n)

    def cell_trace(self, space, cell, fd, pts):
        return np.zeros((len(pts), 2))

    def face_trace(self, space, fid, pts):
        return np.zeros((len(pts), 2))


class CallableConvection(ConvectionField):
    """Analytic convection; the trace defaults to the restriction of w."""

    def __init__(self, w, div_w, w_hat=None):
        self.w = w
        self.div_w = div_w
        self.w_hat = w_hat
        self.trace_is_restriction = w_hat is None

    def volume(self, space, cell, pts):
        return np.asarray(self.w(pts), dtype=float), np.asarray(self.div_w(pts), dtype=float)

    def cell_trace(self, space, cell, fd, pts):
        return np.asarray(self.w(pts), dtype=float)

    def face_trace(self, space, fid, pts):
        g = self.w if self.w_hat is None else self.w_hat
        return np.asarray(g(pts), dtype=float)


class DiscreteConvection(ConvectionField):
    """Convection frozen at a discrete (u, uhat) pair, e.g. a Picard iterate."""

    def __init__(self, space: SpaceSet, u_coeffs: np.ndarray, uhat_coeffs: np.ndarray):
        self.space = space
        self.u = u_coeffs
        self.uhat = uhat_coeffs

    def volume(self, space, cell, pts):
        ed = space.elements[cell]
        c = self.u[cell].reshape(2, space.mk1)
        if pts is ed.pts:
            vals = ed.phi_k1 @ c.T
            gx, gy = ed.gphi_k1
        else:
            vals = space.basis_k1[cell].eval(pts) @ c.T
            gx, gy = space.basis_k1[cell].grad(pts)
        div = gx @ c[0] + gy @ c[1]
        return vals, div

    def cell_trace(self, space, cell, fd, pts):
        c = self.u[cell].reshape(2, space.mk1)
        if fd is not None and pts is fd.pts:
            return fd.phi_k1 @ c.T
        return space.basis_k1[cell].eval(pts) @ c.T

    def face_trace(self, space, fid, pts):
        c = self.uhat[fid].reshape(2, space.k + 1)
        return space.face_basis[fid].eval(pts) @ c.T


# ---------------------------------------------------------------------------
# local blocks


@dataclass
class LocalBlocks:
    """Dense cell-local operator over [L | u | p | traces], plus the layout.

    ``matrix`` holds every S pairing restricted to the cell; named views
    expose the individual pairings.  Rows are test dofs (G, v, q, mu in the
    same ordering as the trial dofs), so the full scheme matrix is obtained
    by scatter-adding ``matrix`` over cells.
    """

    cell: int
    n_L: int
    n_u: int
    n_p: int
    face_slices: list[slice]
    matrix: np.ndarray

    @property
    def sl_L(self):
        return slice(0, self.n_L)

    @property
    def sl_u(self):
        return slice(self.n_L, self.n_L + self.n_u)

    @property
    def sl_p(self):
        return slice(self.n_L + self.n_u, self.n_L + self.n_u + self.n_p)

    @property
    def mass_LG(self):
        return self.matrix[self.sl_L, self.sl_L]

    @property
    def div_uG(self):
        return self.matrix[self.sl_L, self.sl_u]

    @property
    def visc_vL(self):
        return self.matrix[self.sl_u, self.sl_L]

    @property
    def pres_vp(self):
        return self.matrix[self.sl_u, self.sl_p]

    @property
    def incomp_qu(self):
        return self.matrix[self.sl_p, self.sl_u]

    def trace_block(self, local_face: int):
        return self.matrix[:, self.face_slices[local_face]]


def _layout(space: SpaceSet, cell: int):
    nL, nu, npr = space.n_Ldof, space.n_udof, space.n_pdof
    nfd = space.n_fdof
    nf = len(space.elements[cell].faces)
    n_all = nL + nu + npr + nf * nfd
    face_slices = [
        slice(nL + nu + npr + i * nfd, nL + nu + npr + (i + 1) * nfd) for i in range(nf)
    ]
    return n_all, face_slices


def local_S_blocks(space: SpaceSet, cell: int, nu: float) -> LocalBlocks:
    """All pairings of the compact bilinear form S restricted to one cell.

    The stabilization couples only the face-P_k moments of u (its trace is
    projected onto the face space) and is weighted by nu / h_K of the owning
    cell.
    """
    ed = space.elements[cell]
    mk, mk1, kp1 = space.mk, space.mk1, space.k + 1
    nL, nu_dof, npr = space.n_Ldof, space.n_udof, space.n_pdof
    n_all, face_slices = _layout(space, cell)
    M = np.zeros((n_all, n_all))

    sl_L = slice(0, nL)
    sl_u = slice(nL, nL + nu_dof)
    sl_p = slice(nL + nu_dof, nL + nu_dof + npr)

    def Lb(e):
        return slice(e * mk, (e + 1) * mk)

    def ub(c):
        return slice(nL + c * mk1, nL + (c + 1) * mk1)

    # (L, G) mass
    for e in range(4):
        M[Lb(e), Lb(e)] += ed.mass_k

    # (u, div G) and its viscous adjoint -(v, div nu L)
    for i in range(2):
        for j in range(2):
            e = 2 * i + j
            M[Lb(e), ub(i)] += ed.D[j].T
            M[ub(i), Lb(e)] -= nu * ed.D[j]

    # pressure couplings: -(u, grad q), +(v, grad p)
    for c in range(2):
        M[sl_p, ub(c)] -= ed.D[c].T
        M[ub(c), sl_p] += ed.D[c]

    for i_f, fd in enumerate(ed.faces):
        sl_f = face_slices[i_f]
        nvec = fd.normal
        stab = nu / ed.h

        def fb(c):
            return slice(sl_f.start + c * kp1, sl_f.start + (c + 1) * kp1)

        # -<uhat, G n> and +<mu, nu L n>
        for i in range(2):
            for j in range(2):
                e = 2 * i + j
                M[Lb(e), fb(i)] -= nvec[j] * fd.E_k.T
                M[fb(i), Lb(e)] += nu * nvec[j] * fd.E_k

        # +<uhat . n, q> and -<mu . n, p>
        for c in range(2):
            M[sl_p, fb(c)] += nvec[c] * fd.E_k.T
            M[fb(c), sl_p] -= nvec[c] * fd.E_k

        # projected-jump stabilization <(nu/h_K)(Pi_M u - uhat), v - mu>
        EtE = fd.E_k1.T @ fd.E_k1
        for c in range(2):
            M[ub(c), ub(c)] += stab * EtE
            M[ub(c), fb(c)] -= stab * fd.E_k1.T
            M[fb(c), ub(c)] -= stab * fd.E_k1
            M[fb(c), fb(c)] += stab * np.eye(kp1)

    return LocalBlocks(cell, nL, nu_dof, npr, face_slices, M)


def local_O_blocks(space: SpaceSet, cell: int, conv: ConvectionField) -> np.ndarray:
    """Convective operator of one cell for a frozen convection pair.

    Returns a dense matrix in the same [L | u | p | traces] layout as
    ``local_S_blocks`` (rows test v/mu, columns trial u/uhat; the L and p
    blocks stay zero).  The five terms are the volume transport term, the
    half-divergence term, the trace-mismatch term (vanishing identically when
    the convection trace is the restriction of w), the max(what.n, 0)
    stabilization, and the trace transport term.
    """
    ed = space.elements[cell]
    mk1, kp1 = space.mk1, space.k + 1
    nL = space.n_Ldof
    n_all, face_slices = _layout(space, cell)
    M = np.zeros((n_all, n_all))

    def ub(c):
        return slice(nL + c * mk1, nL + (c + 1) * mk1)

    w_vals, div_w = conv.volume(space, cell, ed.pts)
    gx, gy = ed.gphi_k1
    adv = w_vals[:, 0:1] * gx + w_vals[:, 1:2] * gy        # (w . grad) phi_m
    W1 = adv.T @ (ed.wts[:, None] * ed.phi_k1)             # [m, n]
    W2 = ed.phi_k1.T @ ((0.5 * ed.wts * div_w)[:, None] * ed.phi_k1)
    for c in range(2):
        M[ub(c), ub(c)] -= W1 + W2

    for i_f, fd in enumerate(ed.faces):
        sl_f = face_slices[i_f]

        def fb(c):
            return slice(sl_f.start + c * kp1, sl_f.start + (c + 1) * kp1)

        what = conv.face_trace(space, fd.fid, fd.pts)
        s_hat = what @ fd.normal
        tau = tau_c(s_hat)
        w = fd.wts

        if not conv.trace_is_restriction:
            w_side = conv.cell_trace(space, cell, fd, fd.pts)
            s3 = 0.5 * ((w_side - what) @ fd.normal)
            T3 = fd.phi_k1.T @ ((w * s3)[:, None] * fd.phi_k1)
        else:
            T3 = None

        Fuu = fd.phi_k1.T @ ((w * tau)[:, None] * fd.phi_k1)
        Fur = fd.phi_k1.T @ ((w * tau)[:, None] * fd.psi)
        Frr = fd.psi.T @ ((w * tau)[:, None] * fd.psi)
        Gur = fd.phi_k1.T @ ((w * s_hat)[:, None] * fd.psi)
        Grr = fd.psi.T @ ((w * s_hat)[:, None] * fd.psi)

        for c in range(2):
            if T3 is not None:
                M[ub(c), ub(c)] += T3
            M[ub(c), ub(c)] += Fuu
            M[ub(c), fb(c)] += -Fur + Gur
            M[fb(c), ub(c)] -= Fur.T
            M[fb(c), fb(c)] += Frr - Grr
    return M


def local_load(space: SpaceSet, cell: int, f) -> np.ndarray:
    """Moments of the body force against the velocity test modes, (2*mk1,)."""
    ed = space.elements[cell]
    vals = np.asarray(f(ed.pts), dtype=float)
    w = ed.wts
    return np.concatenate([ed.phi_k1.T @ (w * vals[:, c]) for c in (0, 1)])


# ---------------------------------------------------------------------------
# diagnostics used by tests and the acceptance suite


def gather_local_state(space: SpaceSet, cell: int, L, u, p, uhat) -> np.ndarray:
    """Stack a state's coefficients in the cell-local [L | u | p | traces] order."""
    parts = [L[cell], u[cell], p[cell]]
    for fd in space.elements[cell].faces:
        parts.append(uhat[fd.fid])
    return np.concatenate(parts)


def energy_collapse(space: SpaceSet, nu: float, L, u, p, uhat):
    """Both sides of the S energy identity for a full state.

    Testing S at (nu L, u, p, uhat) collapses every pairing except the
    gradient mass and the stabilization; returns (bilinear value, collapsed
    value) whose difference should vanish to roundoff.
    """
    total = 0.0
    collapsed = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        blocks = local_S_blocks(space, ic, nu)
        x = gather_local_state(space, ic, L, u, p, uhat)
        test = x.copy()
        test[blocks.sl_L] = nu * x[blocks.sl_L]
        total += float(test @ (blocks.matrix @ x))

        Lc = L[ic].reshape(4, space.mk)
        collapsed += nu * float(np.einsum("em,mn,en->", Lc, ed.mass_k, Lc))
        for fd in ed.faces:
            uc = u[ic].reshape(2, space.mk1)
            hc = uhat[fd.fid].reshape(2, space.k + 1)
            mism = uc @ fd.E_k1.T - hc
            collapsed += nu / ed.h * float(np.sum(mism ** 2))
    return total, collapsed


def convective_quadratic_form(space: SpaceSet, conv: ConvectionField, u, uhat):
    """O evaluated at ((u, uhat), (u, uhat)) by cell-wise matrix action."""
    total = 0.0
    for ic in range(space.mesh.n_cells):
        O = local_O_blocks(space, ic, conv)
        x = gather_local_state(
            space, ic, np.zeros((space.mesh.n_cells, space.n_Ldof)), u,
            np.zeros((space.mesh.n_cells, space.n_pdof)), uhat)
        total += float(x @ (O @ x))
    return total


def convective_boundary_expression(space: SpaceSet, conv: ConvectionField, u, uhat):
    """<(tau_C(what) - what.n / 2)(u - uhat), u - uhat> summed over cell boundaries."""
    total = 0.0
    for ic in range(space.mesh.n_cells):
        ed = space.elements[ic]
        uc = u[ic].reshape(2, space.mk1)
        for fd in ed.faces:
            what = conv.face_trace(space, fd.fid, fd.pts)
            s_hat = what @ fd.normal
            weight = tau_c(s_hat) - 0.5 * s_hat
            hc = uhat[fd.fid].reshape(2, space.k + 1)
            mism = fd.phi_k1 @ uc.T - fd.psi @ hc.T
            total += float(fd.wts @ (weight * np.sum(mism ** 2, axis=1)))
    return total
