"""Non-perturbative Gaussian simulation of oscillator detectors coupled to cavity fields."""

from .cavity import (
    Boundary,
    CavityConfig,
    ConfigurationError,
    CustomTrajectory,
    DetectorConfig,
    DetectorSystem,
    GaussianSwitching,
    Inertial,
    Picture,
    SharpSwitching,
    UniformAcceleration,
    coupling_matrices,
    mode_frequency,
    mode_function,
    redshift,
    single_detector,
    worldline_eval,
)
from .config import ScenarioConfig, load_default, parse_config
from .evolver import (
    IntegratorConfig,
    SymplecticDriftError,
    check_symplectic,
    evolve,
    evolve_rows,
    evolve_static,
    infinity_norm,
    resymplectify,
    symplectic_drift,
)
from .gaussian import (
    UnphysicalStateError,
    excitation_probability,
    ground_probability,
    log_negativity,
    purity,
    reduce_state,
    squeezed_vacuum,
    symplectic_eigenvalues,
    symplectic_form,
    temperature,
    thermal_spectrum,
    thermality_gap,
    vacuum,
)
from .oracle import OracleBreakdownError, cross_validate, evolve_cd
from .scenarios import RUNNERS, ScenarioResult

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "CavityConfig",
    "ConfigurationError",
    "CustomTrajectory",
    "DetectorConfig",
    "DetectorSystem",
    "GaussianSwitching",
    "Inertial",
    "Picture",
    "SharpSwitching",
    "UniformAcceleration",
    "coupling_matrices",
    "mode_frequency",
    "mode_function",
    "redshift",
    "single_detector",
    "worldline_eval",
    "ScenarioConfig",
    "load_default",
    "parse_config",
    "IntegratorConfig",
    "SymplecticDriftError",
    "check_symplectic",
    "evolve",
    "evolve_rows",
    "evolve_static",
    "infinity_norm",
    "resymplectify",
    "symplectic_drift",
    "UnphysicalStateError",
    "excitation_probability",
    "ground_probability",
    "log_negativity",
    "purity",
    "reduce_state",
    "squeezed_vacuum",
    "symplectic_eigenvalues",
    "symplectic_form",
    "temperature",
    "thermal_spectrum",
    "thermality_gap",
    "vacuum",
    "OracleBreakdownError",
    "cross_validate",
    "evolve_cd",
    "RUNNERS",
    "ScenarioResult",
]
