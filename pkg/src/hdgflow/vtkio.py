"""Legacy ASCII VTK export of meshes and discrete solutions.

Cells are fan-triangulated around their centroid for visualization, with
per-cell point copies so discontinuous fields render faithfully.  Point data
carries the velocity vectors and pressure, cell data the Frobenius norm of
the gradient variable evaluated at each fan triangle's barycenter.
"""

from __future__ import annotations

import numpy as np


def export_vtk(state, mesh, path) -> None:
    """Write an unstructured-grid VTK file; ``state=None`` exports zeros."""
    points = []
    triangles = []
    velocity = []
    pressure = []
    l_frob = []
    space = state.space if state is not None else None
    for ic in range(mesh.n_cells):
        loop = mesh.cells[ic]
        verts = mesh.vertices[loop]
        c = mesh.cell_centroids[ic]
        base = len(points)
        pts = np.vstack([verts, c[None, :]])
        points.extend(pts.tolist())
        nv = len(verts)
        centroid_idx = base + nv
        for j in range(nv):
            triangles.append((base + j, base + (j + 1) % nv, centroid_idx))

        if state is None:
            velocity.extend([(0.0, 0.0)] * (nv + 1))
            pressure.extend([0.0] * (nv + 1))
            l_frob.extend([0.0] * nv)
        else:
            vel = space.eval_velocity(ic, state.u[ic], pts)
            velocity.extend(vel.tolist())
            pressure.extend(space.eval_pressure(ic, state.p[ic], pts).tolist())
            for j in range(nv):
                bary = (verts[j] + verts[(j + 1) % nv] + c) / 3.0
                L = space.eval_gradient_field(ic, state.L[ic], bary[None, :])[0]
                l_frob.append(float(np.sqrt(np.sum(L ** 2))))

    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write("hdgflow solution\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for x, y in points:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"\nCELLS {len(triangles)} {4 * len(triangles)}\n")
        for a, b, c3 in triangles:
            fh.write(f"3 {a} {b} {c3}\n")
        fh.write(f"\nCELL_TYPES {len(triangles)}\n")
        fh.write("\n".join(["5"] * len(triangles)) + "\n")
        fh.write(f"\nPOINT_DATA {len(points)}\n")
        fh.write("VECTORS velocity double\n")
        for vx, vy in velocity:
            fh.write(f"{vx:.17g} {vy:.17g} 0\n")
        fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for pv in pressure:
            fh.write(f"{pv:.17g}\n")
        fh.write(f"\nCELL_DATA {len(triangles)}\n")
        fh.write("SCALARS gradient_frobenius double 1\nLOOKUP_TABLE default\n")
        for lv in l_frob:
            fh.write(f"{lv:.17g}\n")
