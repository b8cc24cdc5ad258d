"""Global assembly, static condensation, Oseen solves, and the Picard driver.

Monolithic systems couple [per-cell (L, u, p) | interior traces | one
multiplier]; boundary trace dofs are pinned to the projected Dirichlet data
and eliminated, and boundary trace test rows are dropped (the test space has
zero boundary values).  The multiplier row enforces the zero pressure mean;
its column enters each cell's constant-pressure-mode equation, keeping the
system square and nonsingular.

Static condensation eliminates (L, u, pressure fluctuation) cell-locally by
dense factorization.  The globally coupled unknowns are the interior trace
dofs, one mean-pressure dof per cell, and the multiplier; dense recovery
operators map the condensed solution back to the full state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import SpaceSet, project_face
from .forms import (ConvectionField, DiscreteConvection, ZeroConvection,
                    local_load, local_O_blocks, local_S_blocks)
from .norms import field_norm_l2, state_triple_1h


class SolverError(Exception):
    """Linear-solver breakdown or fixed-point non-convergence."""

    def __init__(self, message, cell=None, trace=None):
        super().__init__(message)
        self.cell = cell
        self.trace = trace


@dataclass
class HDGState:
    """Discrete solution tuple: per-cell (L, u, p) and per-face trace coefficients.

    Boundary trace rows hold the pinned Dirichlet data.
    """

    space: SpaceSet
    L: np.ndarray
    u: np.ndarray
    p: np.ndarray
    uhat: np.ndarray

    @classmethod
    def zero(cls, space: SpaceSet):
        mesh = space.mesh
        return cls(space,
                   np.zeros((mesh.n_cells, space.n_Ldof)),
                   np.zeros((mesh.n_cells, space.n_udof)),
                   np.zeros((mesh.n_cells, space.n_pdof)),
                   np.zeros((mesh.n_faces, space.n_fdof)))

    def copy(self):
        return HDGState(self.space, self.L.copy(), self.u.copy(),
                        self.p.copy(), self.uhat.copy())

    def pressure_integral(self) -> float:
        areas = self.space.mesh.cell_areas
        return float(np.sqrt(areas) @ self.p[:, 0])

    def cell_trace_fluxes(self) -> np.ndarray:
        """Per-cell boundary flux of the trace field, a solution invariant."""
        space, mesh = self.space, self.space.mesh
        kp1 = space.k + 1
        out = np.zeros(mesh.n_cells)
        for ic in range(mesh.n_cells):
            total = 0.0
            for fd in space.elements[ic].faces:
                c0 = self.uhat[fd.fid, 0::kp1][:2]
                total += (fd.normal @ c0) * math.sqrt(fd.h)
            out[ic] = total
        return out


@dataclass
class PicardTrace:
    """Iteration log: increment norms, contraction ratios, stability monitor."""

    increments: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    f_norm: float = 0.0
    iterations: int = 0
    converged: bool = False


class DofLayout:
    """Index maps for the monolithic and condensed unknown orderings."""

    def __init__(self, space: SpaceSet):
        mesh = space.mesh
        self.space = space
        self.cell_block = space.n_Ldof + space.n_udof + space.n_pdof
        self.nfd = space.n_fdof
        interior = [fid for fid, f in enumerate(mesh.faces) if f.right >= 0]
        self.interior_faces = interior
        self.face_pos = {fid: i for i, fid in enumerate(interior)}
        nc = mesh.n_cells
        self.n_mono = nc * self.cell_block + len(interior) * self.nfd + 1
        self.n_cond = len(interior) * self.nfd + nc + 1

        self.cell_ids_mono = []
        self.cell_face_ids_mono = []   # per cell: face-dof global ids, -1 pinned
        self.cell_face_ids_cond = []
        trace_base_mono = nc * self.cell_block
        for ic in range(nc):
            own = ic * self.cell_block + np.arange(self.cell_block)
            self.cell_ids_mono.append(own)
            fm, fc = [], []
            for fd in space.elements[ic].faces:
                if fd.fid in self.face_pos:
                    pos = self.face_pos[fd.fid]
                    fm.append(trace_base_mono + pos * self.nfd + np.arange(self.nfd))
                    fc.append(pos * self.nfd + np.arange(self.nfd))
                else:
                    fm.append(np.full(self.nfd, -1))
                    fc.append(np.full(self.nfd, -1))
            self.cell_face_ids_mono.append(fm)
            self.cell_face_ids_cond.append(fc)

    def mono_ids(self, ic: int) -> np.ndarray:
        return np.concatenate([self.cell_ids_mono[ic]] + self.cell_face_ids_mono[ic])

    def cond_pbar(self, ic: int) -> int:
        return len(self.interior_faces) * self.nfd + ic

    def mono_p0(self, ic: int) -> int:
        return ic * self.cell_block + self.space.n_Ldof + self.space.n_udof

    def mono_u_ids(self, ic: int) -> np.ndarray:
        start = ic * self.cell_block + self.space.n_Ldof
        return start + np.arange(self.space.n_udof)


class OseenOperator:
    """Cached per-cell pieces for one (space, nu, f, gD) Oseen problem.

    The viscous/pressure blocks and loads are fixed across Picard iterations;
    only the convective blocks are rebuilt when the convection changes.
    """

    def __init__(self, space: SpaceSet, nu: float, f, gD=None):
        if nu <= 0.0:
            raise ValueError("viscosity nu must be positive")
        self.space = space
        self.nu = nu
        self.layout = DofLayout(space)
        cache = space._s_cache.setdefault(nu, None)
        if cache is None:
            cache = [local_S_blocks(space, ic, nu).matrix
                     for ic in range(space.mesh.n_cells)]
            space._s_cache[nu] = cache
        self.s_mats = cache
        self.loads = [local_load(space, ic, f) for ic in range(space.mesh.n_cells)]
        self.pinned = np.zeros((space.mesh.n_faces, space.n_fdof))
        if gD is not None:
            for fid in space.mesh.boundary_faces:
                self.pinned[fid] = project_face(space, fid, gD)

        mk = space.mk
        nL, nu_dof = space.n_Ldof, space.n_udof
        self._sl_u = slice(nL, nL + nu_dof)
        # condensation masks: local = (L, u, pressure fluctuations)
        self._loc_masks = []
        self._glob_masks = []
        for ic in range(space.mesh.n_cells):
            n_all = self.s_mats[ic].shape[0]
            loc = np.zeros(n_all, dtype=bool)
            loc[:nL + nu_dof] = True
            loc[nL + nu_dof + 1: nL + nu_dof + mk] = True
            glob = ~loc
            self._loc_masks.append(np.flatnonzero(loc))
            self._glob_masks.append(np.flatnonzero(glob))

    def local_matrix(self, ic: int, conv: ConvectionField | None) -> np.ndarray:
        if conv is None:
            return self.s_mats[ic]
        return self.s_mats[ic] + local_O_blocks(self.space, ic, conv)

    def _gather_pinned(self, ic: int) -> tuple[np.ndarray, np.ndarray]:
        """Pinned trace values aligned with the cell's local trace columns."""
        vals = [np.zeros(self.layout.cell_block)]
        for fd in self.space.elements[ic].faces:
            vals.append(self.pinned[fd.fid])
        return np.concatenate(vals)

    # -- monolithic --------------------------------------------------------

    def assemble_monolithic(self, conv: ConvectionField | None):
        space, lay = self.space, self.layout
        n = lay.n_mono
        rows, cols, vals = [], [], []
        rhs = np.zeros(n)
        for ic in range(space.mesh.n_cells):
            M = self.local_matrix(ic, conv)
            ids = lay.mono_ids(ic)
            valid = ids >= 0
            iv = ids[valid]
            blk = M[np.ix_(valid, valid)]
            rows.append(np.repeat(iv, len(iv)))
            cols.append(np.tile(iv, len(iv)))
            vals.append(blk.ravel())
            if not valid.all():
                gvals = self._gather_pinned(ic)[~valid]
                if np.any(gvals):
                    rhs[iv] -= M[np.ix_(valid, ~valid)] @ gvals
            rhs[lay.mono_u_ids(ic)] += self.loads[ic]
            w = math.sqrt(space.elements[ic].area)
            p0 = lay.mono_p0(ic)
            rows.append(np.array([n - 1, p0]))
            cols.append(np.array([p0, n - 1]))
            vals.append(np.array([w, w]))
        A = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
        return A, rhs

    def state_from_monolithic(self, x: np.ndarray) -> HDGState:
        space, lay = self.space, self.layout
        st = HDGState.zero(space)
        nL, nu_dof, npr = space.n_Ldof, space.n_udof, space.n_pdof
        for ic in range(space.mesh.n_cells):
            own = x[ic * lay.cell_block:(ic + 1) * lay.cell_block]
            st.L[ic] = own[:nL]
            st.u[ic] = own[nL:nL + nu_dof]
            st.p[ic] = own[nL + nu_dof:nL + nu_dof + npr]
        base = space.mesh.n_cells * lay.cell_block
        for fid, pos in lay.face_pos.items():
            st.uhat[fid] = x[base + pos * lay.nfd: base + (pos + 1) * lay.nfd]
        for fid in space.mesh.boundary_faces:
            st.uhat[fid] = self.pinned[fid]
        return st

    # -- condensed ---------------------------------------------------------

    def condense(self, conv: ConvectionField | None) -> "CondensedSystem":
        space, lay = self.space, self.layout
        n = lay.n_cond
        rows, cols, vals = [], [], []
        rhs = np.zeros(n)
        recovery = []
        nL, nu_dof = space.n_Ldof, space.n_udof
        for ic in range(space.mesh.n_cells):
            M = self.local_matrix(ic, conv)
            loc, glob = self._loc_masks[ic], self._glob_masks[ic]
            A = M[np.ix_(loc, loc)]
            B = M[np.ix_(loc, glob)]
            C = M[np.ix_(glob, loc)]
            D = M[np.ix_(glob, glob)]
            try:
                lu = sla.lu_factor(A, check_finite=False)
            except Exception as exc:
                raise SolverError(f"singular local block on cell {ic}: {exc}",
                                  cell=ic) from exc
            if np.abs(np.diag(lu[0])).min() < 1e-300:
                raise SolverError(f"singular local block on cell {ic}", cell=ic)
            b_loc = np.zeros(len(loc))
            b_loc[(loc >= nL) & (loc < nL + nu_dof)] = self.loads[ic]
            AinvB = sla.lu_solve(lu, B, check_finite=False)
            Ainvb = sla.lu_solve(lu, b_loc, check_finite=False)
            S = D - C @ AinvB
            g = -C @ Ainvb

            # glob mask order: the mean-pressure dof precedes the trace dofs
            gids = np.concatenate(
                [np.array([lay.cond_pbar(ic)])] + lay.cell_face_ids_cond[ic])
            pvals = np.concatenate(
                [np.zeros(1)]
                + [self.pinned[fd.fid] for fd in space.elements[ic].faces])
            free = gids >= 0
            iv = gids[free]
            blk = S[np.ix_(free, free)]
            rows.append(np.repeat(iv, len(iv)))
            cols.append(np.tile(iv, len(iv)))
            vals.append(blk.ravel())
            rbump = g[free]
            if not free.all() and np.any(pvals[~free]):
                rbump = rbump - S[np.ix_(free, ~free)] @ pvals[~free]
            rhs[iv] += rbump
            w = math.sqrt(space.elements[ic].area)
            pbar = lay.cond_pbar(ic)
            rows.append(np.array([n - 1, pbar]))
            cols.append(np.array([pbar, n - 1]))
            vals.append(np.array([w, w]))
            recovery.append((gids, pvals, AinvB, Ainvb))
        A = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
        return CondensedSystem(self, A, rhs, recovery)


@dataclass
class CondensedSystem:
    """Sparse operator over [interior traces | cell mean pressures | multiplier]
    with per-cell dense recovery of the eliminated unknowns."""

    op: OseenOperator
    matrix: sp.csr_matrix
    rhs: np.ndarray
    recovery: list

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self) -> np.ndarray:
        return spla.spsolve(self.matrix.tocsc(), self.rhs)

    def recover(self, y: np.ndarray) -> HDGState:
        space = self.op.space
        lay = self.op.layout
        st = HDGState.zero(space)
        nL, nu_dof, mk = space.n_Ldof, space.n_udof, space.mk
        for ic in range(space.mesh.n_cells):
            gids, pvals, AinvB, Ainvb = self.recovery[ic]
            yk = pvals.copy()
            free = gids >= 0
            yk[free] = y[gids[free]]
            x = Ainvb - AinvB @ yk
            st.L[ic] = x[:nL]
            st.u[ic] = x[nL:nL + nu_dof]
            st.p[ic, 0] = yk[0]
            st.p[ic, 1:] = x[nL + nu_dof:nL + nu_dof + mk - 1]
        base = 0
        for fid, pos in lay.face_pos.items():
            st.uhat[fid] = y[pos * lay.nfd:(pos + 1) * lay.nfd]
        for fid in space.mesh.boundary_faces:
            st.uhat[fid] = self.op.pinned[fid]
        return st


# ---------------------------------------------------------------------------
# public solve entry points


def assemble_monolithic(space: SpaceSet, nu: float, conv, f, gD=None):
    """Sparse system over all dofs plus the mean-zero multiplier row."""
    op = OseenOperator(space, nu, f, gD)
    A, b = op.assemble_monolithic(conv)
    return A, b, op


def condense(space: SpaceSet, nu: float, conv, f, gD=None) -> CondensedSystem:
    op = OseenOperator(space, nu, f, gD)
    return op.condense(conv)


def solve_oseen(space: SpaceSet, nu: float, conv, f, mode: str = "condensed",
                gD=None, op: OseenOperator | None = None) -> HDGState:
    """Solve the linearized (Oseen) scheme with frozen convection ``conv``.

    ``conv=None`` solves the Stokes limit.  ``mode`` selects the monolithic
    or statically condensed path; both produce the same state up to linear
    solver precision.
    """
    if op is None:
        op = OseenOperator(space, nu, f, gD)
    if mode == "monolithic":
        A, b = op.assemble_monolithic(conv)
        x = spla.spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(x)):
            raise SolverError("monolithic solve produced non-finite values")
        return op.state_from_monolithic(x)
    if mode == "condensed":
        system = op.condense(conv)
        y = system.solve()
        if not np.all(np.isfinite(y)):
            raise SolverError("condensed solve produced non-finite values")
        return system.recover(y)
    raise ValueError(f"unknown solve mode {mode!r}")


def picard_solve(space: SpaceSet, nu: float, f, tol: float = 1e-10,
                 max_iter: int = 50, mode: str = "condensed", gD=None):
    """Fixed-point iteration on the Oseen map, starting from the zero state.

    The first iterate is the Stokes solution; each subsequent step freezes
    the convection at the previous iterate (used directly, without
    postprocessing).  Stops when the triple-norm increment drops below
    ``tol``; raises :class:`SolverError` carrying the iteration trace
    otherwise (the large-data regime outside the contraction theory).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    op = OseenOperator(space, nu, f, gD)
    trace = PicardTrace(f_norm=field_norm_l2(space.mesh, f, order=space.quad_order))
    prev = HDGState.zero(space)
    for fid in space.mesh.boundary_faces:
        prev.uhat[fid] = op.pinned[fid]
    state = prev
    for it in range(1, max_iter + 1):
        conv = None if it == 1 else DiscreteConvection(space, state.u, state.uhat)
        new_state = solve_oseen(space, nu, conv, f, mode=mode, gD=gD, op=op)
        inc = state_triple_1h(space, new_state.u - state.u,
                              new_state.uhat - state.uhat)
        trace.increments.append(inc)
        if len(trace.increments) >= 2 and trace.increments[-2] > 0:
            trace.ratios.append(inc / trace.increments[-2])
        if trace.f_norm > 0:
            trace.monitors.append(
                nu * state_triple_1h(space, new_state.u, new_state.uhat) / trace.f_norm)
        else:
            trace.monitors.append(0.0)
        trace.iterations = it
        state = new_state
        if inc <= tol:
            trace.converged = True
            return state, trace
    raise SolverError(
        f"Picard iteration did not converge in {max_iter} iterations "
        f"(last increment {trace.increments[-1]:.3e})", trace=trace)


# ---------------------------------------------------------------------------
# residuals and invariants


def residual_norms(space: SpaceSet, nu: float, conv, f, state: HDGState,
                   gD=None, op: OseenOperator | None = None):
    """(residual norm, load norm) of the scheme tested against every basis
    function with admissible (zero-boundary) trace tests."""
    if op is None:
        op = OseenOperator(space, nu, f, gD)
    lay = op.layout
    n = lay.n_mono - 1  # no multiplier row in the scheme itself
    r = np.zeros(n)
    b = np.zeros(n)
    for ic in range(space.mesh.n_cells):
        M = op.local_matrix(ic, conv)
        parts = [state.L[ic], state.u[ic], state.p[ic]]
        for fd in space.elements[ic].faces:
            parts.append(state.uhat[fd.fid])
        x = np.concatenate(parts)
        rloc = M @ x
        ids = lay.mono_ids(ic)
        valid = ids >= 0
        np.add.at(r, ids[valid], rloc[valid])
        b[lay.mono_u_ids(ic)] += op.loads[ic]
    r -= b
    return float(np.linalg.norm(r)), float(np.linalg.norm(b))


def check_state(space: SpaceSet, nu: float, conv, f, state: HDGState,
                gD=None, op: OseenOperator | None = None) -> dict:
    """Structural invariants of a computed state.

    Returns the pressure integral, the largest per-cell trace flux, and the
    Galerkin residual relative to the load norm.
    """
    rnorm, bnorm = residual_norms(space, nu, conv, f, state, gD=gD, op=op)
    return {
        "pressure_mean": state.pressure_integral(),
        "max_trace_flux": float(np.abs(state.cell_trace_fluxes()).max()),
        "residual_rel": rnorm / max(bnorm, 1e-300),
    }
