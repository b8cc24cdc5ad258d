"""Polynomial bases on cells and faces, the discrete space set, and L2 projections.

Cell bases are centroid-shifted, diameter-scaled monomials orthonormalized
against the cell's quadrature inner product (Cholesky of the Gram matrix, the
matrix form of modified Gram-Schmidt).  Mode 0 is always the constant mode.
Face bases are arc-length-parameterized Legendre polynomials normalized on
the face, so their Gram matrix is the identity analytically.

A :class:`SpaceSet` bundles, for a fixed trace degree k, the per-cell bases
of the gradient space (tensor P_k), velocity space (vector P_{k+1}) and
pressure space (scalar P_k), the per-face trace bases (vector P_k), and the
precomputed element matrices used by the bilinear forms and norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import legvander

from .mesh import PolyMesh
from .quadrature import QuadRule, cell_quadrature, face_quadrature


def poly_space_dim(degree: int) -> int:
    """dim P_degree in 2D."""
    return (degree + 1) * (degree + 2) // 2


def monomial_exponents(degree: int) -> np.ndarray:
    """(a, b) exponent pairs of total degree <= degree, degree-major order."""
    exps = [(a, d - a) for d in range(degree + 1) for a in range(d, -1, -1)]
    return np.array(exps, dtype=int)


class CellBasis:
    """Orthonormal scalar modes on one polygonal cell.

    Modes are linear combinations of scaled monomials ((x-c)/h)^a ((y-c)/h)^b;
    the combination matrix comes from a Cholesky factorization of the Gram
    matrix under the cell quadrature, so the Gram matrix of the modes is the
    identity and mode 0 is constant.
    """

    def __init__(self, vertices: np.ndarray, degree: int, rule: QuadRule | None = None):
        self.degree = degree
        self.dim = poly_space_dim(degree)
        self.exps = monomial_exponents(degree)
        if rule is None:
            rule = cell_quadrature(vertices, 2 * degree + 2)
        pts = np.asarray(vertices, dtype=float)
        diff = pts[:, None, :] - pts[None, :, :]
        self.h = float(np.sqrt((diff ** 2).sum(-1)).max())
        self.center = rule.weights @ rule.points / rule.weights.sum()
        vand = self._monomials(rule.points)
        gram = vand.T @ (rule.weights[:, None] * vand)
        try:
            low = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"monomial Gram matrix not SPD at degree {degree}: {exc}"
            ) from exc
        # modes = monomials @ coeff with coeff upper triangular
        self.coeff = np.linalg.inv(low).T

    def _monomials(self, pts):
        x = (pts[:, 0] - self.center[0]) / self.h
        y = (pts[:, 1] - self.center[1]) / self.h
        a, b = self.exps[:, 0], self.exps[:, 1]
        return x[:, None] ** a[None, :] * y[:, None] ** b[None, :]

    def _monomial_grads(self, pts):
        x = (pts[:, 0] - self.center[0]) / self.h
        y = (pts[:, 1] - self.center[1]) / self.h
        a, b = self.exps[:, 0], self.exps[:, 1]
        xa1 = np.where(a[None, :] >= 1, x[:, None] ** np.maximum(a - 1, 0)[None, :], 0.0)
        yb1 = np.where(b[None, :] >= 1, y[:, None] ** np.maximum(b - 1, 0)[None, :], 0.0)
        gx = (a[None, :] / self.h) * xa1 * y[:, None] ** b[None, :]
        gy = (b[None, :] / self.h) * x[:, None] ** a[None, :] * yb1
        return gx, gy

    def eval(self, pts) -> np.ndarray:
        """Mode values, shape (npts, dim)."""
        return self._monomials(np.atleast_2d(pts)) @ self.coeff

    def grad(self, pts):
        """Mode gradients, two (npts, dim) arrays (d/dx, d/dy)."""
        gx, gy = self._monomial_grads(np.atleast_2d(pts))
        return gx @ self.coeff, gy @ self.coeff


class FaceBasis:
    """Orthonormal Legendre modes on a straight face, arc-length parameterized."""

    def __init__(self, a: np.ndarray, b: np.ndarray, k: int):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.k = k
        self.dim = k + 1
        self.length = float(np.linalg.norm(self.b - self.a))
        self._scale = np.sqrt((2 * np.arange(k + 1) + 1) / self.length)

    def param(self, pts) -> np.ndarray:
        d = self.b - self.a
        return (np.atleast_2d(pts) - self.a) @ d / (self.length ** 2)

    def eval(self, pts) -> np.ndarray:
        t = self.param(pts)
        return legvander(2.0 * t - 1.0, self.k) * self._scale[None, :]


# ---------------------------------------------------------------------------
# element-level precomputed data


@dataclass
class FaceData:
    """Per (cell, face) quantities; quadrature points are shared face-wide."""

    fid: int
    sign: int                 # +1 if the cell is the face's left cell
    normal: np.ndarray        # outward for this cell
    h: float
    pts: np.ndarray
    wts: np.ndarray
    psi: np.ndarray           # (nq, k+1) trace modes
    phi_k: np.ndarray         # (nq, mk) cell P_k modes on the face
    phi_k1: np.ndarray        # (nq, mk1) cell P_{k+1} modes on the face
    E_k: np.ndarray = field(init=False)    # <psi, phi_k>
    E_k1: np.ndarray = field(init=False)   # <psi, phi_k1>, the Pi_M trace map
    Mf_k1: np.ndarray = field(init=False)  # face mass of P_{k+1} modes

    def __post_init__(self):
        w = self.wts[:, None]
        self.E_k = self.psi.T @ (w * self.phi_k)
        self.E_k1 = self.psi.T @ (w * self.phi_k1)
        self.Mf_k1 = self.phi_k1.T @ (w * self.phi_k1)


@dataclass
class ElementData:
    cell: int
    h: float
    area: float
    pts: np.ndarray
    wts: np.ndarray
    phi_k: np.ndarray
    phi_k1: np.ndarray
    gphi_k: tuple[np.ndarray, np.ndarray]
    gphi_k1: tuple[np.ndarray, np.ndarray]
    mass_k: np.ndarray
    mass_k1: np.ndarray
    stiff_k1: np.ndarray
    D: tuple[np.ndarray, np.ndarray]   # D[a][m, n] = (phi_k1_m, d_a phi_k_n)
    faces: list[FaceData]


class SpaceSet:
    """Degree-k HDG space family on a mesh, with cached element matrices.

    Per-cell dof counts: gradient 4*dim(P_k), velocity 2*dim(P_{k+1}),
    pressure dim(P_k); per-face trace 2*(k+1).  The pressure zero-mean
    constraint is metadata here and enforced at solve time through a single
    multiplier row.  Quadrature uses one rule per cell/face at order
    max(2(k+1)+2, 3(k+1)+1), covering both the linear and the trilinear
    (convective) pairings.
    """

    def __init__(self, mesh: PolyMesh, k: int):
        if k < 0:
            raise ValueError("polynomial degree k must be >= 0")
        self.mesh = mesh
        self.k = k
        self.mk = poly_space_dim(k)
        self.mk1 = poly_space_dim(k + 1)
        self.n_Ldof = 4 * self.mk
        self.n_udof = 2 * self.mk1
        self.n_pdof = self.mk
        self.n_fdof = 2 * (k + 1)
        self.quad_order = max(2 * (k + 1) + 2, 3 * (k + 1) + 1)
        self._build()

    def _build(self):
        mesh, k = self.mesh, self.k
        self.face_basis = [
            FaceBasis(mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]], k)
            for f in mesh.faces
        ]
        face_rules = [
            face_quadrature(mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]],
                            self.quad_order)
            for f in mesh.faces
        ]
        face_psi = [self.face_basis[i].eval(r.points) for i, r in enumerate(face_rules)]

        self.basis_k: list[CellBasis] = []
        self.basis_k1: list[CellBasis] = []
        self.elements: list[ElementData] = []
        for ic in range(mesh.n_cells):
            verts = mesh.vertices[mesh.cells[ic]]
            rule = cell_quadrature(verts, self.quad_order)
            bk = CellBasis(verts, k, rule)
            bk1 = CellBasis(verts, k + 1, rule)
            self.basis_k.append(bk)
            self.basis_k1.append(bk1)

            w = rule.weights[:, None]
            phi_k = bk.eval(rule.points)
            phi_k1 = bk1.eval(rule.points)
            gkx, gky = bk.grad(rule.points)
            g1x, g1y = bk1.grad(rule.points)
            mass_k = phi_k.T @ (w * phi_k)
            mass_k1 = phi_k1.T @ (w * phi_k1)
            stiff = g1x.T @ (w * g1x) + g1y.T @ (w * g1y)
            Dx = phi_k1.T @ (w * gkx)
            Dy = phi_k1.T @ (w * gky)

            fdata = []
            for fid, sign in mesh.cell_faces[ic]:
                f = mesh.faces[fid]
                r = face_rules[fid]
                fdata.append(FaceData(
                    fid=fid, sign=sign, normal=sign * f.normal, h=f.length,
                    pts=r.points, wts=r.weights, psi=face_psi[fid],
                    phi_k=bk.eval(r.points), phi_k1=bk1.eval(r.points),
                ))
            self.elements.append(ElementData(
                cell=ic, h=mesh.h_cell[ic], area=mesh.cell_areas[ic],
                pts=rule.points, wts=rule.weights,
                phi_k=phi_k, phi_k1=phi_k1,
                gphi_k=(gkx, gky), gphi_k1=(g1x, g1y),
                mass_k=mass_k, mass_k1=mass_k1, stiff_k1=stiff,
                D=(Dx, Dy), faces=fdata,
            ))
        self._s_cache: dict[float, list] = {}

    # -- field evaluation -----------------------------------------------

    def eval_velocity(self, cell: int, coeffs: np.ndarray, pts) -> np.ndarray:
        """(npts, 2) values of a V_h field from component-major coefficients."""
        phi = self.basis_k1[cell].eval(pts)
        c = coeffs.reshape(2, self.mk1)
        return phi @ c.T

    def eval_velocity_grad(self, cell: int, coeffs: np.ndarray, pts) -> np.ndarray:
        """(npts, 2, 2) Jacobians, entry [q, i, j] = d u_i / d x_j."""
        gx, gy = self.basis_k1[cell].grad(pts)
        c = coeffs.reshape(2, self.mk1)
        out = np.empty((len(np.atleast_2d(pts)), 2, 2))
        out[:, :, 0] = gx @ c.T
        out[:, :, 1] = gy @ c.T
        return out

    def eval_pressure(self, cell: int, coeffs: np.ndarray, pts) -> np.ndarray:
        return self.basis_k[cell].eval(pts) @ coeffs

    def eval_gradient_field(self, cell: int, coeffs: np.ndarray, pts) -> np.ndarray:
        """(npts, 2, 2) values of a G_h field; entry order row-major (i, j)."""
        phi = self.basis_k[cell].eval(pts)
        c = coeffs.reshape(4, self.mk)
        return (phi @ c.T).reshape(-1, 2, 2)

    def eval_trace(self, fid: int, coeffs: np.ndarray, pts) -> np.ndarray:
        psi = self.face_basis[fid].eval(pts)
        c = coeffs.reshape(2, self.k + 1)
        return psi @ c.T


# ---------------------------------------------------------------------------
# L2 projections


def project_cell(space: SpaceSet, cell: int, f, target: str) -> np.ndarray:
    """L2 projection of a pointwise-evaluable field onto G_h, V_h, or Q_h.

    target 'Q': scalar f -> (mk,) coefficients; 'V': vector f with values
    (nq, 2) -> (2*mk1,) component-major; 'G': tensor f with values
    (nq, 2, 2) -> (4*mk) row-major entries.  Orthonormal modes make the
    normal equations diagonal: coefficients are quadrature moments.
    """
    ed = space.elements[cell]
    w = ed.wts
    vals = np.asarray(f(ed.pts), dtype=float)
    if target == "Q":
        return ed.phi_k.T @ (w * vals)
    if target == "V":
        return np.concatenate([ed.phi_k1.T @ (w * vals[:, c]) for c in (0, 1)])
    if target == "G":
        flat = vals.reshape(len(w), 4)
        return np.concatenate([ed.phi_k.T @ (w * flat[:, e]) for e in range(4)])
    raise ValueError(f"unknown projection target {target!r}")


def project_face(space: SpaceSet, fid: int, g) -> np.ndarray:
    """L2 projection of a vector field onto the face trace space M_h."""
    fb = space.face_basis[fid]
    mesh = space.mesh
    f = mesh.faces[fid]
    rule = face_quadrature(mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]],
                           space.quad_order)
    psi = fb.eval(rule.points)
    vals = np.asarray(g(rule.points), dtype=float)
    return np.concatenate([psi.T @ (rule.weights * vals[:, c]) for c in (0, 1)])


def project_state(space: SpaceSet, u, grad_u, p):
    """Projections (Pi_G grad_u, Pi_V u, Pi_Q p, Pi_M u) as coefficient arrays."""
    nc, nf = space.mesh.n_cells, space.mesh.n_faces
    L = np.vstack([project_cell(space, ic, grad_u, "G") for ic in range(nc)])
    U = np.vstack([project_cell(space, ic, u, "V") for ic in range(nc)])
    P = np.vstack([project_cell(space, ic, p, "Q") for ic in range(nc)])
    H = np.vstack([project_face(space, fid, u) for fid in range(nf)])
    return L, U, P, H


# ---------------------------------------------------------------------------
# projection convergence diagnostics (operate on raw meshes, no SpaceSet)


def cell_projection_error(mesh: PolyMesh, f, degree: int) -> float:
    """Global L2 norm of f - Pi_degree f, one scalar field."""
    err2 = 0.0
    for ic in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[ic]]
        rule = cell_quadrature(verts, 2 * (degree + 1) + 2)
        basis = CellBasis(verts, degree, rule)
        phi = basis.eval(rule.points)
        vals = np.asarray(f(rule.points), dtype=float)
        coeffs = phi.T @ (rule.weights * vals)
        res = vals - phi @ coeffs
        err2 += float(rule.weights @ res ** 2)
    return math.sqrt(err2)


def face_projection_error(mesh: PolyMesh, g, k: int):
    """Skeleton L2 norms of g - Pi_M g: unweighted and h_K^{1/2}-weighted."""
    err2 = 0.0
    werr2 = 0.0
    for fid, f in enumerate(mesh.faces):
        a, b = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
        rule = face_quadrature(a, b, 2 * (k + 1) + 2)
        fb = FaceBasis(a, b, k)
        psi = fb.eval(rule.points)
        vals = np.asarray(g(rule.points), dtype=float)
        res2 = 0.0
        for c in (0, 1):
            coeffs = psi.T @ (rule.weights * vals[:, c])
            res = vals[:, c] - psi @ coeffs
            res2 += float(rule.weights @ res ** 2)
        err2 += res2
        werr2 += mesh.h_cell[f.left] * res2
    return math.sqrt(err2), math.sqrt(werr2)


def eoc(errors, hs):
    """Experimental orders between consecutive levels; None where error is
    at machine zero (below 1e-13)."""
    out = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 <= 1e-13 or e1 <= 1e-13:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


def projection_eoc_diagnostic(family, k: int, scalar_field=None, vector_field=None):
    """Measured projection convergence rates across a mesh family.

    Returns a dict with per-level max h and, when the corresponding field is
    given, cell-projection errors onto P_k with their orders (expected k+1)
    and face-projection errors onto the trace space (expected k+1/2 raw,
    k+1 with the h_K^{1/2} weight).
    """
    hs = [m.max_h for m in family]
    report = {"h": hs}
    if scalar_field is not None:
        errs = [cell_projection_error(m, scalar_field, k) for m in family]
        report["cell_l2"] = errs
        report["cell_l2_eoc"] = eoc(errs, hs)
    if vector_field is not None:
        pairs = [face_projection_error(m, vector_field, k) for m in family]
        report["face_l2"] = [p[0] for p in pairs]
        report["face_l2_eoc"] = eoc(report["face_l2"], hs)
        report["face_l2_weighted"] = [p[1] for p in pairs]
        report["face_l2_weighted_eoc"] = eoc(report["face_l2_weighted"], hs)
    return report
