"""Stochastic patch-selection models: invasion analysis, simulation and ESS solving."""

from .analytic import (
    GammaStationary,
    InvasionReport,
    Outcome,
    classify_outcome,
    competitive_effects,
    invasion_rate,
    stationary_gamma,
    stochastic_growth_rate,
)
from .ess import EssKind, EssOptions, EssResult, solve_ess, verify_ess
from .landscape import DispersalMatrix, Landscape, Strategy, build_landscape, dispersal_stationary, kappa_inner
from .sde_sim import SimConfig, Trajectory, simulate_dimorphic, simulate_monomorphic

__version__ = "0.1.0"

__all__ = [
    "DispersalMatrix",
    "EssKind",
    "EssOptions",
    "EssResult",
    "GammaStationary",
    "InvasionReport",
    "Landscape",
    "Outcome",
    "SimConfig",
    "Strategy",
    "Trajectory",
    "build_landscape",
    "classify_outcome",
    "competitive_effects",
    "dispersal_stationary",
    "invasion_rate",
    "kappa_inner",
    "simulate_dimorphic",
    "simulate_monomorphic",
    "solve_ess",
    "stationary_gamma",
    "stochastic_growth_rate",
    "verify_ess",
]
