"""chemostat-kit: mass-structured stochastic chemostat simulation toolkit."""

__version__ = "0.1.0"

from .params import ChemostatParams
from .ensemble import EnsembleSpec, EnsembleStats, mass_histogram, run_ensemble, washout_kde
from .ibm import EventLog, IbmEvent, IbmState, Trajectory, integrate_flow, run_ibm
from .ide import DensityGrid, IdeResult, MassGrid, ide_cfl, ide_solve, ide_step
from .odefit import ClassicState, MonodFit, classic_solve, fit_monod
from .model import (
    DivisionLaw,
    GompertzGrowth,
    InitialMassDensity,
    LinearGrowth,
    division_rate,
    growth_speed,
    growth_speed_dx,
    initial_density_eval,
    kernel_beta_norm,
    kernel_density,
    kernel_sample,
    monod_rate,
    sample_initial_population,
)

__all__ = [
    "__version__",
    "ClassicState",
    "DensityGrid",
    "EnsembleSpec",
    "EnsembleStats",
    "EventLog",
    "IbmEvent",
    "IbmState",
    "IdeResult",
    "MassGrid",
    "MonodFit",
    "Trajectory",
    "classic_solve",
    "fit_monod",
    "ide_cfl",
    "ide_solve",
    "ide_step",
    "integrate_flow",
    "mass_histogram",
    "run_ensemble",
    "run_ibm",
    "washout_kde",
    "ChemostatParams",
    "DivisionLaw",
    "GompertzGrowth",
    "InitialMassDensity",
    "LinearGrowth",
    "division_rate",
    "growth_speed",
    "growth_speed_dx",
    "initial_density_eval",
    "kernel_beta_norm",
    "kernel_density",
    "kernel_sample",
    "monod_rate",
    "sample_initial_population",
]
