"""Kinetic trait-structured population model and its macroscopic limit.

Simulates the spatially structured infinitesimal model (SIM) and the
Kirkpatrick-Barton system (KBM) on the periodic interval, and measures how
fast the kinetic moments and trait profiles approach the macroscopic model
as the reproduction rate grows.
"""

from .grids import TorusGrid, TraitGrid, make_torus_grid, make_trait_grid
from .measures import (
    GridMeasure,
    MomentSummary,
    gaussian_on_grid,
    moments,
    quantile,
    wasserstein,
    wasserstein_oracle,
)
from .infinitesimal import (
    ReproductionKernel,
    apply_T_fast,
    apply_T_oracle,
    contraction_ratio,
)
from .environment import Environment
from .sim_solver import (
    KineticState,
    SimParams,
    SimulationError,
    gaussian_initial_state,
    init_state,
    kinetic_moments,
    run_sim,
    sim_step,
)
from .kbm_solver import MacroState, homogeneous_reference, kbm_step, run_kbm
from .diagnostics import (
    DeviationRecord,
    SweepReport,
    fit_power_law,
    gaussian_deviation,
    holder_quotient,
    kbm_residuals,
)
from .config import ConfigError, RunConfig, parse_config

__all__ = [
    "TorusGrid",
    "TraitGrid",
    "make_torus_grid",
    "make_trait_grid",
    "GridMeasure",
    "MomentSummary",
    "gaussian_on_grid",
    "moments",
    "quantile",
    "wasserstein",
    "wasserstein_oracle",
    "ReproductionKernel",
    "apply_T_fast",
    "apply_T_oracle",
    "contraction_ratio",
    "Environment",
    "KineticState",
    "SimParams",
    "SimulationError",
    "gaussian_initial_state",
    "init_state",
    "kinetic_moments",
    "run_sim",
    "sim_step",
    "MacroState",
    "homogeneous_reference",
    "kbm_step",
    "run_kbm",
    "DeviationRecord",
    "SweepReport",
    "fit_power_law",
    "gaussian_deviation",
    "holder_quotient",
    "kbm_residuals",
    "ConfigError",
    "RunConfig",
    "parse_config",
]
