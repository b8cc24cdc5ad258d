"""Conforming polygonal meshes: generators, file reader, refinement families.

A :class:`PolyMesh` stores counter-clockwise cell loops and an oriented face
table.  Faces carry the unit normal of their left cell (outward for the left
cell, inward for the right one), so per-cell outward normals are recovered by
a sign.  Meshes are immutable after construction and validated against the
closed-polygon and conformity invariants on creation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import GeometryError, polygon_area_centroid


class MeshError(Exception):
    """Base class for mesh construction failures."""


class MeshParseError(MeshError):
    """Malformed mesh file content."""


class TopologyError(MeshError):
    """Non-conforming or geometrically invalid mesh topology."""


@dataclass(frozen=True)
class Face:
    vertices: tuple[int, int]
    left: int
    right: int          # -1 on the boundary
    normal: np.ndarray  # unit, oriented left -> right
    length: float


class PolyMesh:
    """Immutable conforming polygonal mesh of a 2D domain.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : list of int arrays, CCW vertex loops
    faces : list of Face
    cell_faces : per cell, list of (face id, +1 if cell is the left cell)
    h_cell : max pairwise vertex distance per cell
    h_face : face lengths
    cell_areas, cell_centroids : shoelace area and centroid per cell
    boundary_faces : sorted array of boundary face ids
    """

    dim = 2

    def __init__(self, vertices, cells, validate: bool = True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = [np.asarray(c, dtype=int) for c in cells]
        self.n_cells = len(self.cells)
        self._build_faces()
        self._build_metrics()
        if validate:
            self.validate()

    def _build_faces(self):
        edge_map: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for ic, loop in enumerate(self.cells):
            nv = len(loop)
            if nv < 3:
                raise TopologyError(f"cell {ic} has fewer than 3 vertices")
            for j in range(nv):
                a, b = int(loop[j]), int(loop[(j + 1) % nv])
                if a == b:
                    raise TopologyError(f"cell {ic} repeats vertex {a} on an edge")
                edge_map.setdefault((min(a, b), max(a, b)), []).append((ic, a, b))

        faces: list[Face] = []
        cell_faces: list[list[tuple[int, int]]] = [[] for _ in range(self.n_cells)]
        for key in sorted(edge_map):
            incidences = edge_map[key]
            if len(incidences) > 2:
                raise TopologyError(
                    f"edge {key} is shared by {len(incidences)} cells (non-conforming mesh)"
                )
            # Left cell is the one traversing the edge in stored (a, b) order.
            ic, a, b = incidences[0]
            left, right = ic, -1
            if len(incidences) == 2:
                jc, a2, _ = incidences[1]
                if a2 == a:
                    raise TopologyError(
                        f"edge {key} traversed in the same direction by cells {ic} and {jc}"
                    )
                right = jc
            t = self.vertices[b] - self.vertices[a]
            length = float(np.linalg.norm(t))
            if length <= 0.0:
                raise TopologyError(f"zero-length edge {key}")
            t /= length
            normal = np.array([t[1], -t[0]])  # right of a->b: outward for the left cell
            fid = len(faces)
            faces.append(Face((a, b), left, right, normal, length))
            cell_faces[left].append((fid, +1))
            if right >= 0:
                cell_faces[right].append((fid, -1))
        self.faces = faces
        self.n_faces = len(faces)
        self.cell_faces = cell_faces
        self.boundary_faces = np.array(
            [i for i, f in enumerate(faces) if f.right < 0], dtype=int
        )
        self.h_face = np.array([f.length for f in faces])

    def _build_metrics(self):
        areas, cents, diams = [], [], []
        for ic, loop in enumerate(self.cells):
            pts = self.vertices[loop]
            try:
                area, c = polygon_area_centroid(pts)
            except GeometryError as exc:
                raise TopologyError(f"cell {ic}: {exc}") from exc
            if area <= 0.0:
                raise TopologyError(f"cell {ic} is not counter-clockwise oriented")
            diff = pts[:, None, :] - pts[None, :, :]
            diams.append(float(np.sqrt((diff ** 2).sum(-1)).max()))
            areas.append(area)
            cents.append(c)
        self.cell_areas = np.array(areas)
        self.cell_centroids = np.array(cents)
        self.h_cell = np.array(diams)

    def validate(self):
        """Check conformity, star-shapedness, and the closed-polygon identity."""
        for ic in range(self.n_cells):
            loop = self.cells[ic]
            pts = self.vertices[loop]
            c = self.cell_centroids[ic]
            h2 = self.h_cell[ic] ** 2
            nv = len(loop)
            for j in range(nv):
                v1, v2 = pts[j], pts[(j + 1) % nv]
                tri2 = (v1[0] - c[0]) * (v2[1] - c[1]) - (v2[0] - c[0]) * (v1[1] - c[1])
                if tri2 <= 1e-12 * h2:
                    raise TopologyError(
                        f"cell {ic} is not star-shaped with respect to its centroid"
                    )
            resultant = np.zeros(2)
            for fid, sign in self.cell_faces[ic]:
                f = self.faces[fid]
                resultant += sign * f.length * f.normal
            if np.linalg.norm(resultant) > 1e-12 * max(1.0, self.h_cell[ic]):
                raise TopologyError(f"cell {ic} violates the closed-polygon identity")
        for f in self.faces:
            if abs(np.linalg.norm(f.normal) - 1.0) > 1e-12:
                raise TopologyError("face normal is not unit length")

    def outward_normal(self, cell: int, fid: int) -> np.ndarray:
        for f, sign in self.cell_faces[cell]:
            if f == fid:
                return sign * self.faces[fid].normal
        raise KeyError(f"face {fid} is not incident to cell {cell}")

    @property
    def max_h(self) -> float:
        return float(self.h_cell.max())

    def total_area(self) -> float:
        return float(self.cell_areas.sum())

    def shape_regularity(self):
        """Per-cell chunkiness diagnostic: min fan-triangle quality in (0, 1].

        Quality of a fan triangle is 4*sqrt(3)*area / (sum of squared edges),
        which is 1 for an equilateral triangle.  Reported only; no threshold
        is enforced.
        """
        out = np.empty(self.n_cells)
        for ic, loop in enumerate(self.cells):
            pts = self.vertices[loop]
            c = self.cell_centroids[ic]
            q = np.inf
            nv = len(loop)
            for j in range(nv):
                v1, v2 = pts[j], pts[(j + 1) % nv]
                area = 0.5 * abs((v1[0] - c[0]) * (v2[1] - c[1]) - (v2[0] - c[0]) * (v1[1] - c[1]))
                ssq = ((v1 - c) ** 2).sum() + ((v2 - c) ** 2).sum() + ((v2 - v1) ** 2).sum()
                q = min(q, 4.0 * np.sqrt(3.0) * area / ssq)
            out[ic] = q
        return out


# ---------------------------------------------------------------------------
# structured generators

def _grid_points(n, domain):
    (x0, y0), (x1, y1) = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    return xs, ys


def generate_quad(n: int, domain=((0.0, 0.0), (1.0, 1.0))) -> PolyMesh:
    xs, ys = _grid_points(n, domain)
    verts = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * (n + 1) + i
    cells = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    return PolyMesh(verts, cells)


def generate_tri(n: int, domain=((0.0, 0.0), (1.0, 1.0))) -> PolyMesh:
    xs, ys = _grid_points(n, domain)
    verts = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * (n + 1) + i
    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
            cells.append([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolyMesh(verts, cells)


HEXDOM_CUT_FRACTION = 0.3  # junction offset as a fraction of the s/2 face length


def generate_hexdom(n: int, domain=((0.0, 0.0), (1.0, 1.0))) -> PolyMesh:
    """Hex-dominant mesh from a staggered n-row grid with cut corners.

    Rows of height s = side/n are staggered by s/2 (running-bond pattern) and
    every interior row junction is displaced vertically by the cut fraction
    of the s/2 face length, so interior cells become genuine hexagons and
    cells along the top/bottom boundary become pentagons.  Any fraction in
    (0, 0.5) keeps the cells star-shaped; 0.3 keeps them shape-regular.
    """
    (x0, y0), (x1, y1) = domain
    sx = (x1 - x0) / n
    sy = (y1 - y0) / n
    c = HEXDOM_CUT_FRACTION * 0.5 * sy

    # Column breakpoints per row: offset rows shifted by sx/2 with half cells
    # at the domain sides.
    row_breaks = []
    for j in range(n):
        if j % 2 == 0:
            bx = [x0 + i * sx for i in range(n + 1)]
        else:
            bx = [x0] + [x0 + (i + 0.5) * sx for i in range(n)] + [x1]
        row_breaks.append(bx)

    vert_index: dict[tuple[float, float], int] = {}
    verts: list[tuple[float, float]] = []

    def vtx(x, y):
        key = (round(x, 12), round(y, 12))
        if key not in vert_index:
            vert_index[key] = len(verts)
            verts.append((x, y))
        return vert_index[key]

    def junction_y(x, j):
        """y-coordinate of the row interface at height index j, column x."""
        y = y0 + j * sy
        if j == 0 or j == n:
            return y
        lower, upper = row_breaks[j - 1], row_breaks[j]
        on_lower = any(abs(x - b) < 1e-12 * sx for b in lower[1:-1])
        on_upper = any(abs(x - b) < 1e-12 * sx for b in upper[1:-1])
        if x <= x0 + 1e-12 * sx or x >= x1 - 1e-12 * sx:
            return y
        if on_lower and not on_upper:
            return y + c   # top of a lower-row wall pushes up
        if on_upper and not on_lower:
            return y - c   # bottom of an upper-row wall dips down
        return y

    cells = []
    for j in range(n):
        bx = row_breaks[j]
        yb, yt = y0 + j * sy, y0 + (j + 1) * sy
        for i in range(len(bx) - 1):
            xl, xr = bx[i], bx[i + 1]
            # Interior breakpoints of the adjacent rows that fall inside (xl, xr)
            # become extra boundary vertices of this cell.
            below = [] if j == 0 else [b for b in row_breaks[j - 1][1:-1] if xl + 1e-12 * sx < b < xr - 1e-12 * sx]
            above = [] if j == n - 1 else [b for b in row_breaks[j + 1][1:-1] if xl + 1e-12 * sx < b < xr - 1e-12 * sx]
            loop = [vtx(xl, junction_y(xl, j))]
            for b in below:
                loop.append(vtx(b, junction_y(b, j)))
            loop.append(vtx(xr, junction_y(xr, j)))
            loop.append(vtx(xr, junction_y(xr, j + 1)))
            for b in reversed(above):
                loop.append(vtx(b, junction_y(b, j + 1)))
            loop.append(vtx(xl, junction_y(xl, j + 1)))
            cells.append(loop)
    return PolyMesh(np.array(verts), cells)


_GENERATORS = {"tri": generate_tri, "quad": generate_quad, "hexdom": generate_hexdom}


def generate_structured(kind: str, n: int, domain=((0.0, 0.0), (1.0, 1.0))) -> PolyMesh:
    """Structured mesh of an axis-aligned rectangle: 2n^2 triangles, n^2
    squares, or a hex-dominant polygonal mesh."""
    if kind not in _GENERATORS:
        raise ValueError(f"unknown mesh kind {kind!r}; expected tri, quad, or hexdom")
    if n < 1:
        raise ValueError("n must be >= 1")
    return _GENERATORS[kind](n, domain)


# ---------------------------------------------------------------------------
# plain-text mesh format: "poly2d <nv> <nc>", nv lines "x y",
# nc lines "m i1 ... im" with 0-based CCW indices.

def read_mesh(text: str) -> PolyMesh:
    lines = text.splitlines()
    if not lines:
        raise MeshParseError("line 1: empty mesh file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "poly2d":
        raise MeshParseError("line 1: expected header 'poly2d <nv> <nc>'")
    try:
        nv, nc = int(head[1]), int(head[2])
    except ValueError as exc:
        raise MeshParseError(f"line 1: {exc}") from exc
    if len(lines) < 1 + nv + nc:
        raise MeshParseError(f"expected {1 + nv + nc} lines, found {len(lines)}")

    verts = np.empty((nv, 2))
    for i in range(nv):
        parts = lines[1 + i].split()
        if len(parts) != 2:
            raise MeshParseError(f"line {2 + i}: expected 'x y'")
        try:
            verts[i] = [float(parts[0]), float(parts[1])]
        except ValueError as exc:
            raise MeshParseError(f"line {2 + i}: {exc}") from exc

    cells = []
    for i in range(nc):
        lineno = 2 + nv + i
        parts = lines[1 + nv + i].split()
        if not parts:
            raise MeshParseError(f"line {lineno}: empty cell record")
        try:
            m = int(parts[0])
            idx = [int(p) for p in parts[1:]]
        except ValueError as exc:
            raise MeshParseError(f"line {lineno}: {exc}") from exc
        if len(idx) != m:
            raise MeshParseError(f"line {lineno}: cell declares {m} vertices, lists {len(idx)}")
        if any(v < 0 or v >= nv for v in idx):
            raise MeshParseError(f"line {lineno}: vertex index out of range")
        cells.append(idx)
    return PolyMesh(verts, cells)


def read_mesh_file(path) -> PolyMesh:
    with open(path, "r", encoding="ascii") as fh:
        return read_mesh(fh.read())


def write_mesh(mesh: PolyMesh) -> str:
    lines = [f"poly2d {len(mesh.vertices)} {mesh.n_cells}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for loop in mesh.cells:
        lines.append(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# refinement families

class MeshFamily:
    """Sequence of meshes with near-halving max cell diameter."""

    def __init__(self, kind: str, levels: list[PolyMesh]):
        if len(levels) < 2:
            raise ValueError("a mesh family needs at least 2 levels")
        self.kind = kind
        self.levels = levels
        hs = [m.max_h for m in levels]
        for h0, h1 in zip(hs, hs[1:]):
            ratio = h1 / h0
            if not (0.4 <= ratio <= 0.6):
                raise ValueError(f"consecutive max-h ratio {ratio:.3f} outside [0.4, 0.6]")
        self.max_h = hs

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


def build_family(kind: str, levels: int, n0: int,
                 domain=((0.0, 0.0), (1.0, 1.0))) -> MeshFamily:
    """Family with level j generated at resolution n0 * 2^j."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    meshes = [generate_structured(kind, n0 * 2 ** j, domain) for j in range(levels)]
    return MeshFamily(kind, meshes)
