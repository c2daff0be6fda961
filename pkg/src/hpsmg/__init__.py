"""Hierarchical Poincare-Steklov solver for 2D Helmholtz problems.

Spectral-element impedance-to-impedance discretization, nested-dissection
direct solve, and the same merge hierarchy used as a multigrid
preconditioner for flexible GMRES.
"""

from .spectral import gll_rule, scale_to_element, kron_apply
from .element import build_element, build_index_sets, local_solve
from .skeleton import Mesh, assemble_skeleton, build_elements, build_face_graph, partition_level
from .dissection import build_hierarchy, direct_solve, eliminate_level, merge_pair
from .krylov import KrylovConfig, SolveReport, fgmres, gmres
from .multigrid import MGConfig, MGPreconditioner, build_preconditioner, mg_apply
from .problems import (
    bump_problem,
    discrete_error,
    discretize,
    dump_field,
    planewave_problem,
    read_field,
    recover_solution,
    wavenumber_from_ppw,
)

__version__ = "0.1.0"
