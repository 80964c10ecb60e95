"""Unfitted H(div)-conforming mixed finite elements for Darcy interface flow.

A background triangulation is cut by a level-set interface; velocity/pressure
pairs (RT0/P0, BDM1/P0, RT1/P1) live on overlapping active meshes.  Ghost
penalty stabilization comes in a standard variant and a divergence-compatible
variant that keeps div u_h = g down to rounding, optionally restricted to
macro-element interiors.
"""

from __future__ import annotations

from .bench import (
    CaseConfig,
    ErrorReport,
    ProblemSpec,
    default_shift,
    eoc,
    interface_sweep,
    lane_benchmark,
    ls_slope,
    make_problem,
    refinement_study,
    run_case,
    sweep_shifts,
    sweep_summary,
)
from .errors import (
    CutDarcyError,
    InvalidArgumentError,
    InvalidPreconditionerError,
    ResolveInterfaceError,
    SingularSystemError,
    TooLargeError,
    UnreachableElementError,
)
from .forms import Params, SystemBlocks, compose_system
from .geometry import ActiveMeshes, Circle, HalfPlane, build_active_meshes
from .kernels import active_lane, get_kernels
from .linalg import (
    condition_number,
    diag_preconditioner,
    preconditioned_condition,
    solve,
    spectral_condition_number,
)
from .macro import MacroPartition, build_macro_partition
from .mesh import BackgroundMesh, build_structured_mesh, element_geometry
from .spaces import PAIRS, DofMap, ElementPair, build_dofmap, interpolate, project_pressure

__version__ = "0.1.0"

__all__ = [
    "ActiveMeshes",
    "BackgroundMesh",
    "CaseConfig",
    "Circle",
    "DofMap",
    "ElementPair",
    "ErrorReport",
    "HalfPlane",
    "MacroPartition",
    "PAIRS",
    "Params",
    "ProblemSpec",
    "SystemBlocks",
    "active_lane",
    "build_active_meshes",
    "build_dofmap",
    "build_macro_partition",
    "build_structured_mesh",
    "compose_system",
    "condition_number",
    "default_shift",
    "diag_preconditioner",
    "element_geometry",
    "eoc",
    "get_kernels",
    "interface_sweep",
    "interpolate",
    "lane_benchmark",
    "ls_slope",
    "make_problem",
    "preconditioned_condition",
    "project_pressure",
    "refinement_study",
    "run_case",
    "solve",
    "spectral_condition_number",
    "sweep_shifts",
    "sweep_summary",
    "CutDarcyError",
    "InvalidArgumentError",
    "InvalidPreconditionerError",
    "ResolveInterfaceError",
    "SingularSystemError",
    "TooLargeError",
    "UnreachableElementError",
    "__version__",
]
