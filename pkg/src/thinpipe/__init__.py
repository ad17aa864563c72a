"""Reduced-order steady Stokes flow through thin curved pipes.

The pipeline: build a pipe geometry (centerline + frame + radius law),
solve the weighted cross-section problem for the Prandtl-type function and
its rigidity profile G(s), solve the 1D pressure equation driven by the
prescribed flux, optionally add the transverse mass-restoring correction,
and assemble/export the composite velocity and pressure fields.
"""

from .config import RunConfig, build_geometry, load_config
from .cross_section import SectionMesh, build_mesh
from .errors import ConfigError, GeometryError, SolverError, ThinPipeError
from .fields import (
    FlowField,
    NormReport,
    assemble,
    cutoff_profile,
    norms,
    read_field_csv,
    write_field_csv,
    write_field_vtk,
)
from .geometry import (
    Centerline,
    FrameField,
    GeometryReport,
    PipeGeometry,
    RadiusLaw,
    transport_frame,
)
from .perturbation import (
    PerturbationReport,
    PerturbationSolution,
    compare_full_vs_perturbative,
    perturbation_profile,
    solve_psi0,
    solve_psi1,
    solve_q01,
)
from .prandtl import (
    PrandtlSolution,
    RigidityProfile,
    rigidity_profile,
    solve_prandtl,
)
from .reynolds import (
    PressureProfile,
    solve_reynolds,
    solve_reynolds_fd,
)
from .transverse import (
    TransverseSolution,
    check_claim_identity,
    check_compatibility,
    solve_transverse,
    transverse_profile,
)

__version__ = "0.1.0"

__all__ = [
    "Centerline",
    "ConfigError",
    "FlowField",
    "FrameField",
    "GeometryError",
    "GeometryReport",
    "NormReport",
    "PerturbationReport",
    "PerturbationSolution",
    "PipeGeometry",
    "PrandtlSolution",
    "PressureProfile",
    "RadiusLaw",
    "RigidityProfile",
    "RunConfig",
    "SectionMesh",
    "SolverError",
    "ThinPipeError",
    "TransverseSolution",
    "assemble",
    "build_geometry",
    "build_mesh",
    "check_claim_identity",
    "check_compatibility",
    "compare_full_vs_perturbative",
    "cutoff_profile",
    "load_config",
    "norms",
    "perturbation_profile",
    "read_field_csv",
    "rigidity_profile",
    "solve_prandtl",
    "solve_psi0",
    "solve_psi1",
    "solve_q01",
    "solve_reynolds",
    "solve_reynolds_fd",
    "solve_transverse",
    "transport_frame",
    "transverse_profile",
    "write_field_csv",
    "write_field_vtk",
    "__version__",
]
