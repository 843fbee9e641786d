"""Hydrodynamic observables and equation residuals for sampled wavefunctions.

Everything here is evaluated on the numerical fields: density, current, the
continuity residual, the amplitude-based quantum potential, the
Hamilton-Jacobi residual with and without that potential, and the
classical/quantum split of a stationary state's energy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSnapshots, NonStationaryWarning
from .grid import Grid, divergence, gradient, l2_norm, laplacian, max_norm, phase_gradient
from .propagator import EvolutionResult, PhysicalConstants, Potential
from .wavefield import DEFAULT_NODE_EPSILON, PolarDecomposition, polar_decompose

DEFAULT_DENSITY_FLOOR = 1e-8
BOUNDARY_MARGIN = 2
STATIONARY_SPREAD = 1e-6


def probability_density(psi) -> np.ndarray:
    return np.abs(np.asarray(psi)) ** 2


def probability_current(grid: Grid, psi, consts: PhysicalConstants = PhysicalConstants()):
    """J = (hbar / 2mi) (psi* grad psi - psi grad psi*)."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = gradient(grid, psi)
    conj_term = np.conj(psi) * dpsi
    j = consts.hbar / (2j * consts.mass) * (conj_term - np.conj(conj_term))
    scale = max(float(np.max(np.abs(j))), 1.0)
    assert np.max(np.abs(j.imag)) < 1e-13 * scale, "current has an imaginary part"
    return j.real


def current_from_phase(decomp: PolarDecomposition, consts: PhysicalConstants = PhysicalConstants()):
    """J = (A^2 / m) grad(S~) with S~ = hbar * phase (the gauge-transformed action)."""
    grad_phase = phase_gradient(decomp.grid, decomp.phase)
    return decomp.amplitude**2 / consts.mass * consts.hbar * grad_phase


def node_mask(psi, epsilon_node: float | None = None) -> np.ndarray:
    amp = np.abs(psi)
    eps = DEFAULT_NODE_EPSILON * float(np.max(amp)) if epsilon_node is None else epsilon_node
    return amp < eps


def reliable_region(grid: Grid, rho, mask, density_floor: float = DEFAULT_DENSITY_FLOOR,
                    margin: int = BOUNDARY_MARGIN) -> np.ndarray:
    """Interior, unmasked points whose density is above ``density_floor * max(rho)``."""
    region = grid.interior(margin) & ~np.asarray(mask, dtype=bool)
    if density_floor:
        region &= rho >= density_floor * float(np.max(rho))
    return region


@dataclass
class ContinuityReport:
    """d(rho)/dt + div J at the interior snapshots of a run."""

    times: np.ndarray
    residual: np.ndarray
    region: np.ndarray
    l2: float
    max: float
    masked_count: int
    per_snapshot_l2: np.ndarray


def continuity_residual(evolution: EvolutionResult, consts: PhysicalConstants | None = None,
                        epsilon_node: float | None = None,
                        margin: int = BOUNDARY_MARGIN) -> ContinuityReport:
    """Continuity residual with centered time differences between snapshots.

    ``l2`` is the root mean square over snapshots of the spatial L2 norm;
    ``max`` is the largest pointwise magnitude. Both skip masked nodes and the
    ``margin`` outermost points per wall.
    """
    if len(evolution) < 3:
        raise InsufficientSnapshots(f"need at least 3 snapshots, got {len(evolution)}")
    consts = consts or evolution.consts
    grid = evolution.grid
    residuals, regions, sq = [], [], []
    masked = 0
    for i in range(1, len(evolution) - 1):
        psi = evolution.snapshots[i]
        mask = node_mask(psi, epsilon_node)
        region = grid.interior(margin) & ~mask
        masked += int(mask.sum())
        res = evolution.density_rate(i) + divergence(grid, probability_current(grid, psi, consts))
        residuals.append(res)
        regions.append(region)
        sq.append(l2_norm(grid, res, region) ** 2)
    residuals = np.array(residuals)
    regions = np.array(regions)
    report = ContinuityReport(
        times=evolution.times[1:-1],
        residual=residuals,
        region=regions,
        l2=float(np.sqrt(np.mean(sq))),
        max=max_norm(residuals, regions),
        masked_count=masked,
        per_snapshot_l2=np.sqrt(np.array(sq)),
    )
    return report


def quantum_potential(grid: Grid, amplitude, mask=None,
                      consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Q = -(hbar^2 / 2m) lap(A) / A; NaN at masked points."""
    amplitude = np.asarray(amplitude, dtype=float)
    if np.any(amplitude < 0):
        raise ValueError("amplitude must be non-negative")
    if mask is None:
        mask = amplitude <= 0
    lap = laplacian(grid, amplitude)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = -(consts.hbar**2) / (2.0 * consts.mass) * lap / amplitude
    return np.where(mask, np.nan, q)


@dataclass
class HJEReport:
    """Pointwise terms of the Hamilton-Jacobi equation for S~ = hbar * phase.

    ``residual = kinetic + potential + quantum + action_rate`` (quantum form);
    ``classical_residual`` drops the quantum potential. ``action_rate`` is
    dS~/dt, so ``-action_rate`` is the local energy.
    """

    grid: Grid
    kinetic: np.ndarray
    potential: np.ndarray
    quantum: np.ndarray
    action_rate: np.ndarray
    residual: np.ndarray
    classical_residual: np.ndarray
    region: np.ndarray
    l2: float
    max: float
    classical_l2: float
    classical_max: float


def hje_residual(decomp: PolarDecomposition, phase_rate, potential: Potential,
                 consts: PhysicalConstants = PhysicalConstants(),
                 density_floor: float = DEFAULT_DENSITY_FLOOR,
                 margin: int = BOUNDARY_MARGIN) -> HJEReport:
    """Hamilton-Jacobi residual with and without the quantum potential.

    ``phase_rate`` is d(phase)/dt in radians per unit time, normally
    :meth:`EvolutionResult.phase_rate`. Norms are taken over the interior,
    unmasked points with density above ``density_floor * max(rho)``: the
    ratio lap(A)/A turns absolute round-off in the far tails into O(1/(A dx^2))
    noise, so those points carry no information.
    """
    grid = decomp.grid
    grad_phase = phase_gradient(grid, decomp.phase)
    kinetic = consts.hbar**2 * np.sum(grad_phase**2, axis=0) / (2.0 * consts.mass)
    v = np.asarray(potential.values, dtype=float)
    q = quantum_potential(grid, decomp.amplitude, decomp.node_mask, consts)
    action_rate = consts.hbar * np.asarray(phase_rate, dtype=float)
    classical = kinetic + v + action_rate
    residual = classical + q
    rho = decomp.amplitude**2
    region = reliable_region(grid, rho, decomp.node_mask, density_floor, margin)
    return HJEReport(
        grid=grid, kinetic=kinetic, potential=v, quantum=q, action_rate=action_rate,
        residual=residual, classical_residual=classical, region=region,
        l2=l2_norm(grid, residual, region), max=max_norm(residual, region),
        classical_l2=l2_norm(grid, classical, region), classical_max=max_norm(classical, region),
    )


def hje_from_evolution(evolution: EvolutionResult, index: int | None = None,
                       epsilon_node: float | None = None,
                       density_floor: float = DEFAULT_DENSITY_FLOOR) -> HJEReport:
    """HJE report at an interior snapshot (the middle one by default)."""
    if len(evolution) < 3:
        raise InsufficientSnapshots("the HJE residual needs at least 3 snapshots")
    if index is None:
        index = len(evolution) // 2
        index = min(max(index, 1), len(evolution) - 2)
    decomp = polar_decompose(evolution.grid, evolution.snapshots[index], epsilon_node)
    return hje_residual(decomp, evolution.phase_rate(index), evolution.potential,
                        evolution.consts, density_floor)


@dataclass(frozen=True)
class EnergyDecomposition:
    total: float
    classical: float
    quantum: float
    spread: float
    stationary: bool


def energy_decomposition(report: HJEReport, rho) -> EnergyDecomposition:
    """Density-weighted split of a stationary state's energy, E = Ecl + <Q>.

    E is the mean of -dS~/dt and <Q> the mean quantum potential, both weighted
    by ``rho`` over the report's evaluation region. Emits
    :class:`NonStationaryWarning` when -dS~/dt varies by more than 1e-6.
    """
    rho = np.asarray(rho, dtype=float)
    region = report.region & np.isfinite(report.quantum)
    w = report.grid.weights * rho * region
    total_w = np.sum(w)
    if not total_w > 0:
        raise ValueError("no density inside the evaluation region")
    local_energy = -report.action_rate
    energy = float(np.sum(w * local_energy) / total_w)
    mean_q = float(np.sum(w * np.where(region, report.quantum, 0.0)) / total_w)
    spread = float(np.ptp(local_energy[region]))
    stationary = spread <= STATIONARY_SPREAD
    if not stationary:
        warnings.warn(f"-dS/dt varies by {spread:.3e} across the grid; state is not stationary",
                      NonStationaryWarning, stacklevel=2)
    return EnergyDecomposition(total=energy, classical=energy - mean_q, quantum=mean_q,
                               spread=spread, stationary=stationary)
