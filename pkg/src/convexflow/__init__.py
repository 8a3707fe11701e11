"""Convex graphs moving by powers of the mean curvature: simulation and checks."""

from .geometry import (
    GeometryFields,
    GridFunction,
    GridSpec,
    derivatives,
    divergence_form_speed,
    geometry_fields,
    tangent_plane_distance,
)
from .exact import (
    BarrierSpec,
    SphereSolution,
    SphereVanished,
    scenario,
    solve_barrier,
    sphere_cap_graph,
    sphere_radius,
)
from .solver import (
    ConvexityLost,
    FlowParams,
    StiffnessFailure,
    Trajectory,
    comparison_run,
    nested_domain_study,
    run,
    step,
)
from .diagnostics import (
    DirectionNotAttained,
    Patch,
    PatchInvalid,
    c2_monitor,
    dual_concavity_check,
    evolution_identity_check,
    harnack_check,
    normal_image_disjointness,
    nu_preservation_check,
    nu_profile,
    velocity_floor_check,
)

__version__ = "0.1.0"

__all__ = [
    "GeometryFields",
    "GridFunction",
    "GridSpec",
    "derivatives",
    "divergence_form_speed",
    "geometry_fields",
    "tangent_plane_distance",
    "BarrierSpec",
    "SphereSolution",
    "SphereVanished",
    "scenario",
    "solve_barrier",
    "sphere_cap_graph",
    "sphere_radius",
    "ConvexityLost",
    "FlowParams",
    "StiffnessFailure",
    "Trajectory",
    "comparison_run",
    "nested_domain_study",
    "run",
    "step",
    "DirectionNotAttained",
    "Patch",
    "PatchInvalid",
    "c2_monitor",
    "dual_concavity_check",
    "evolution_identity_check",
    "harnack_check",
    "normal_image_disjointness",
    "nu_preservation_check",
    "nu_profile",
    "velocity_floor_check",
    "__version__",
]
