"""Remote charging of a bosonic quantum battery through a chiral-by-interference
waveguide network.

Two modes (charger, battery) couple to a common waveguide at several points.
Tuning the propagation and local coupling phases cancels the backward coupling,
so energy pumped into the charger flows one way into the battery. The package
builds the cascaded network, extracts master-equation coefficients by two
independent routes, propagates the Gaussian moment dynamics exactly, evaluates
the transient and steady closed forms, scores the battery (energy, ergotropy,
extractable fraction, charging contrast), and validates everything against a
truncated density-matrix integration.
"""

from .configs import (
    CouplingRates,
    DirectionalCouplings,
    PhaseSet,
    SetupKind,
    at_resonance,
    build_network,
    closed_form_coefficients,
    closed_form_trig,
    directional_couplings,
    is_nonreciprocal,
    network_coefficients,
    nonreciprocal_point,
)
from .dynamics import (
    DriftSystem,
    DriveKind,
    DriveSide,
    DriveSpec,
    MomentState,
    StabilityReport,
    analytic_steady_energies,
    closed_form_linear,
    closed_form_quadratic_nr,
    evolve,
    first_moment_system,
    instability_threshold,
    linear_closed_form_is_singular,
    quadratic_closed_form_is_degenerate,
    second_moment_system,
    stability,
    states_from_trajectory,
    steady_energies,
    steady_moments,
    steady_state,
    vacuum_state,
)
from .errors import (
    ConfigError,
    CutoffConvergenceError,
    DriveGuardError,
    ModelError,
    SingularPointError,
    UndefinedRatioError,
    UnphysicalStateError,
    UnstableSystemError,
    UnsupportedNetworkError,
)
from .metrics import (
    BatteryMetrics,
    TransferMetrics,
    analytic_eta_threepoint,
    analytic_r_threepoint,
    battery_metrics,
    battery_trajectory_metrics,
    ergotropy_zero_mean,
    gaussian_d_parameter,
    nonreciprocal_ratio,
    steady_r_from_couplings,
    storage_ratio,
    transfer_metrics,
)
from .oracle import (
    DensityMatrix,
    LindbladGenerator,
    OracleResult,
    converged_moments,
    evolve_density,
    lindblad_generator,
    moments_from_density,
    vacuum_density,
)
from .slh import (
    MasterEqCoefficients,
    SLHTriplet,
    chain,
    concatenate,
    coupling_point,
    extract_coefficients,
    identity_element,
    phase_element,
    series,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # network composition
    "SLHTriplet", "MasterEqCoefficients", "identity_element", "phase_element",
    "coupling_point", "series", "chain", "concatenate", "extract_coefficients",
    # geometries
    "SetupKind", "PhaseSet", "CouplingRates", "DirectionalCouplings",
    "build_network", "closed_form_trig", "closed_form_coefficients",
    "network_coefficients", "at_resonance", "directional_couplings",
    "nonreciprocal_point", "is_nonreciprocal",
    # dynamics
    "DriveKind", "DriveSide", "DriveSpec", "MomentState", "DriftSystem",
    "StabilityReport", "first_moment_system", "second_moment_system",
    "vacuum_state", "evolve", "states_from_trajectory", "stability",
    "instability_threshold", "steady_state", "steady_moments",
    "steady_energies", "closed_form_linear", "closed_form_quadratic_nr",
    "linear_closed_form_is_singular",
    "quadratic_closed_form_is_degenerate", "analytic_steady_energies",
    # metrics
    "BatteryMetrics", "TransferMetrics", "gaussian_d_parameter",
    "battery_metrics", "ergotropy_zero_mean", "nonreciprocal_ratio",
    "storage_ratio", "transfer_metrics", "steady_r_from_couplings",
    "analytic_r_threepoint", "analytic_eta_threepoint",
    "battery_trajectory_metrics",
    # oracle
    "DensityMatrix", "LindbladGenerator", "OracleResult", "vacuum_density",
    "lindblad_generator", "evolve_density", "moments_from_density",
    "converged_moments",
    # errors
    "ModelError", "UnsupportedNetworkError", "UnstableSystemError",
    "UnphysicalStateError", "UndefinedRatioError", "SingularPointError",
    "CutoffConvergenceError", "DriveGuardError", "ConfigError",
]
