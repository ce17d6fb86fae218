"""Depth-averaged models of thin non-Newtonian fluid films."""

from .analysis import (
    equilibrium_velocity,
    equilibrium_velocity_general,
    growth_rates,
    lubrication_velocity,
)
from .discretization import FilmModel, FilmState, Grid, assemble_rhs, flux_divergence, gradient
from .kernels import (
    ModelParams,
    PointState,
    invert_mean_velocity,
    mean_velocity,
    power_law_coeffs,
    reduction_residual,
    rhs_eta_E,
    rhs_general,
    rhs_power_law,
)
from .rheology import Newtonian, PowerLaw, Tabulated, evaluate_at_state, viscosity
from .scenarios import build_initial_state, load_config, parse_config, read_records, write_records
from .stepping import StepControl, integrate, rk4_step, stable_dt

__version__ = "0.1.0"
