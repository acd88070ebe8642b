"""Quantum-noise modeling for a detuned dual-recycled low-frequency detector.

The package covers the full chain from two-photon field algebra to
astrophysical reach: filter-cavity synthesis for frequency-dependent
squeezing, the coupled-cavity equivalent of a two-cavity filter chain,
EPR-style conditional squeezing with a full loss budget, and the
binary-inspiral horizon the resulting sensitivity buys.
"""

__version__ = "0.1.0"

from .errors import (
    SqueezekitError,
    ConfigError,
    NoSolutionError,
    NumericalError,
)
from .ifo import IfoConfig, load_config, parse_config, config_text
from .filters import (
    FilterCavity,
    FilterSolution,
    default_grid,
    required_rotation_angle,
    synthesize_filters,
    verify_rotation,
)
from .coupled import (
    CoupledCavitySpec,
    EquivalenceReport,
    two_to_coupled_params,
    coupled_from_solution,
    inverse_coupled_params,
    fit_coupled_params,
    equivalence_report,
    src_arm_feasibility,
)
from .epr import (
    EprParams,
    NoiseCurve,
    solve_epr_params,
    select_epr_params,
    sensitivity_curve,
    detected_squeezing,
    squeeze_factor,
    SCHEMES,
    BUDGET_CHANNELS,
)
from .horizon import HorizonCurve, horizon_reach, network_snr

__all__ = [
    "SqueezekitError",
    "ConfigError",
    "NoSolutionError",
    "NumericalError",
    "IfoConfig",
    "load_config",
    "parse_config",
    "config_text",
    "FilterCavity",
    "FilterSolution",
    "default_grid",
    "required_rotation_angle",
    "synthesize_filters",
    "verify_rotation",
    "CoupledCavitySpec",
    "EquivalenceReport",
    "two_to_coupled_params",
    "coupled_from_solution",
    "inverse_coupled_params",
    "fit_coupled_params",
    "equivalence_report",
    "src_arm_feasibility",
    "EprParams",
    "NoiseCurve",
    "solve_epr_params",
    "select_epr_params",
    "sensitivity_curve",
    "detected_squeezing",
    "squeeze_factor",
    "SCHEMES",
    "BUDGET_CHANNELS",
    "HorizonCurve",
    "horizon_reach",
    "network_snr",
]
