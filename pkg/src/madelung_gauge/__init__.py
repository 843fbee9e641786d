"""Madelung hydrodynamics and gauge-phase diagnostics for sampled wavefunctions."""

__version__ = "0.1.0"

from .bohm import equivariance_check, integrate_trajectories, velocity_field
from .diagnostics import (
    continuity_residual,
    current_from_phase,
    energy_decomposition,
    hje_from_evolution,
    hje_residual,
    probability_current,
    probability_density,
    quantum_potential,
)
from .grid import Grid, divergence, gradient, laplacian
from .propagator import (
    CrankNicolson,
    PhysicalConstants,
    Potential,
    analytic_state,
    crank_nicolson_step,
    evolve,
    ground_state,
)
from .runner import DiagnosticsReport, convergence_study, run_scenario
from .scenario import Scenario, parse_scenario, serialize_scenario
from .spin_gauge import (
    SpinConfig,
    compton_speed,
    gauge_phase_from_amplitude,
    log_gauge_phase,
    spin_vector_field,
    spin_velocity_field,
    verify_gauge_condition,
)
from .wavefield import PolarDecomposition, polar_compose, polar_decompose

__all__ = [
    "CrankNicolson", "DiagnosticsReport", "Grid", "PhysicalConstants", "PolarDecomposition",
    "Potential", "Scenario", "SpinConfig", "analytic_state", "compton_speed",
    "continuity_residual", "convergence_study", "crank_nicolson_step", "current_from_phase",
    "divergence", "energy_decomposition", "equivariance_check", "evolve",
    "gauge_phase_from_amplitude", "gradient", "ground_state", "hje_from_evolution",
    "hje_residual", "integrate_trajectories", "laplacian", "log_gauge_phase",
    "parse_scenario", "polar_compose", "polar_decompose", "probability_current",
    "probability_density", "quantum_potential", "run_scenario", "serialize_scenario",
    "spin_vector_field", "spin_velocity_field", "velocity_field", "verify_gauge_condition",
]
