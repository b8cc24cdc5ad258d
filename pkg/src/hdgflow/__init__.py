"""hdgflow: superconvergent HDG solver for steady incompressible Navier-Stokes
on general polygonal meshes.

The scheme approximates velocity with vector P_{k+1}, velocity gradient with
tensor P_k, pressure with zero-mean P_k, and the globally coupled velocity
trace with vector P_k per face, stabilized by the projected trace jump
(nu/h)(Pi_M u - uhat) and the convective weight max(uhat.n, 0).
"""

from .basis import (CellBasis, FaceBasis, SpaceSet, project_cell, project_face,
                    project_state, projection_eoc_diagnostic)
from .cases import ManufacturedCase, manufactured_case, polynomial_patch_case
from .convergence import (ConvergenceReport, check_rates, monitor_band,
                          run_convergence_study)
from .forms import (CallableConvection, ConvectionField, DiscreteConvection,
                    LocalBlocks, ZeroConvection, local_load, local_O_blocks,
                    local_S_blocks, tau_c)
from .mesh import (MeshError, MeshFamily, MeshParseError, PolyMesh,
                   TopologyError, build_family, generate_structured,
                   read_mesh, read_mesh_file, write_mesh)
from .norms import (discrete_H1, errors_against_exact, gradient_bound_ratio,
                    state_discrete_H1, state_triple_0h, state_triple_1h,
                    triple_norm_0h, triple_norm_1h, triple_norm_infh)
from .quadrature import GeometryError, QuadRule, cell_quadrature, face_quadrature
from .solver import (CondensedSystem, HDGState, OseenOperator, PicardTrace,
                     SolverError, assemble_monolithic, check_state, condense,
                     picard_solve, residual_norms, solve_oseen)
from .vtkio import export_vtk

__version__ = "0.1.0"
