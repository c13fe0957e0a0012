from .bundle import BundleError, ReferenceBundle, generate_reference_set, load_bundle
from .solvers import (
    InstabilityError,
    ReferenceConfig,
    darcy_boundary_trace,
    darcy_operator,
    solve_reference,
)
from .stability import dt_max_advective, dt_max_diffusion, reaction_exact_step, reaction_naive_step

__all__ = [
    "BundleError",
    "InstabilityError",
    "ReferenceBundle",
    "ReferenceConfig",
    "darcy_boundary_trace",
    "darcy_operator",
    "dt_max_advective",
    "dt_max_diffusion",
    "generate_reference_set",
    "load_bundle",
    "reaction_exact_step",
    "reaction_naive_step",
    "solve_reference",
]
