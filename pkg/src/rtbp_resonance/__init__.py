"""Stability of resonant periodic orbits in the planar restricted three-body problem.

The package evaluates the stability coefficient C(e, p, q) of the p:q
resonant families three independent ways — spectral quadrature over the
resonant track, closed-form leading series coefficients, and monodromy of
the full mu > 0 problem — and provides the Levi-Civita action-angle
machinery valid through collision for nonzero angular momentum.
"""

from .coefficient import (
    CoefficientResult,
    SweepRow,
    compute_C,
    compute_C_via_omega_gg,
    compute_C_via_omega_ll,
    sweep_e,
)
from .errors import (
    CollisionError,
    ConvergenceError,
    DegenerateCaseError,
    RtbpError,
    ValidationError,
)
from .kepler import (
    DelaunayState,
    OrbitalElements,
    PolarState,
    RtbpState,
    cartesian_to_delaunay,
    cartesian_to_polar_rotating,
    delaunay_to_cartesian,
    delaunay_to_polar,
    polar_to_cartesian_rotating,
    polar_to_delaunay,
    solve_kepler,
    true_anomaly,
    unperturbed_flow,
)
from .levi_civita import (
    ActionAngle,
    RegularizedState,
    action_angle_from_state,
    angle_consistency_check,
    integrate_k_flow,
    k_value,
    lc_map,
    state_from_action_angle,
)
from .perturbation import ResonantFamily, canonical_families, omega_polar, resonant_track
from .series import LeadingCoefficient, bessel_j, laplace_b, leading_coefficient
from .verifier import (
    ExtrapolationResult,
    MonodromyReport,
    PeriodicOrbit,
    extrapolate_C,
    monodromy,
    refine_periodic_orbit,
    rtbp_derivatives,
    rtbp_hamiltonian,
)

__version__ = "1.0.0"

__all__ = [
    "ActionAngle",
    "CoefficientResult",
    "CollisionError",
    "ConvergenceError",
    "DegenerateCaseError",
    "DelaunayState",
    "ExtrapolationResult",
    "LeadingCoefficient",
    "MonodromyReport",
    "OrbitalElements",
    "PeriodicOrbit",
    "PolarState",
    "RegularizedState",
    "ResonantFamily",
    "RtbpError",
    "RtbpState",
    "SweepRow",
    "ValidationError",
    "action_angle_from_state",
    "angle_consistency_check",
    "bessel_j",
    "canonical_families",
    "cartesian_to_delaunay",
    "cartesian_to_polar_rotating",
    "compute_C",
    "compute_C_via_omega_gg",
    "compute_C_via_omega_ll",
    "delaunay_to_cartesian",
    "delaunay_to_polar",
    "extrapolate_C",
    "integrate_k_flow",
    "k_value",
    "laplace_b",
    "lc_map",
    "leading_coefficient",
    "monodromy",
    "omega_polar",
    "polar_to_cartesian_rotating",
    "polar_to_delaunay",
    "refine_periodic_orbit",
    "resonant_track",
    "rtbp_derivatives",
    "rtbp_hamiltonian",
    "solve_kepler",
    "state_from_action_angle",
    "sweep_e",
    "true_anomaly",
    "unperturbed_flow",
    "__version__",
]
