"""Geometrically exact nonlinear stiff string, integrated by a
linearly-implicit energy-quadratised scheme with a mixed
finite-difference/modal spatial discretisation."""

from .config_io import ExperimentSpec, parse_config, parse_config_text
from .energy import (EnergyBreakdown, discrete_energy, energy_error_series,
                     power_balance_residual)
from .experiments import (ResolvedScheme, RunOutput, resolve_scheme,
                          run_experiment, sample_initial_condition,
                          write_outputs)
from .operators import SpatialOperators, build_fd_operators, build_modal_basis
from .params import (AUTO, InitialCondition, SimConfig, SourceParams,
                     StringParams, validate_and_derive)
from .stepper import (SimState, Simulation, UpdateSystem, assemble_update,
                      build_J, compute_g, exact_psi, force_sample, init_state,
                      read_output, step)

__all__ = [
    "AUTO", "EnergyBreakdown", "ExperimentSpec", "InitialCondition",
    "ResolvedScheme", "RunOutput", "SimConfig", "SimState", "Simulation",
    "SourceParams", "SpatialOperators", "StringParams", "UpdateSystem",
    "assemble_update", "build_J", "build_fd_operators", "build_modal_basis",
    "compute_g", "discrete_energy", "energy_error_series", "exact_psi",
    "force_sample", "init_state", "parse_config", "parse_config_text",
    "power_balance_residual", "read_output", "resolve_scheme",
    "run_experiment", "sample_initial_condition", "step",
    "validate_and_derive", "write_outputs",
]

__version__ = "0.1.0"
