"""Bohmian trajectories guided by v = grad(S~)/m = J/rho."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .diagnostics import DEFAULT_DENSITY_FLOOR, probability_current
from .errors import StartInNode
from .grid import Grid, phase_gradient
from .propagator import EvolutionResult, PhysicalConstants
from .wavefield import polar_decompose

METHODS = ("from_current", "from_phase_gradient")


def velocity_field(grid: Grid, psi, consts: PhysicalConstants = PhysicalConstants(),
                   method: str = "from_current",
                   density_floor: float = DEFAULT_DENSITY_FLOOR) -> np.ndarray:
    """Guidance velocity, NaN where rho < density_floor * max(rho)."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.abs(psi) ** 2
    low = rho < density_floor * float(np.max(rho))
    if method == "from_current":
        with np.errstate(divide="ignore", invalid="ignore"):
            v = probability_current(grid, psi, consts) / rho
    elif method == "from_phase_gradient":
        decomp = polar_decompose(grid, psi)
        v = consts.hbar / consts.mass * phase_gradient(grid, decomp.phase)
    else:
        raise ValueError(f"method must be one of {METHODS}")
    return np.where(low, np.nan, v)


@dataclass
class TrajectorySet:
    starts: np.ndarray
    times: np.ndarray
    positions: np.ndarray  # (len(times), len(starts))
    frozen: np.ndarray
    method: str


class _SnapshotVelocity:
    """Cubic spline of v in x for one snapshot, plus a validity lookup."""

    def __init__(self, grid: Grid, v: np.ndarray):
        x = grid.axes[0]
        self.grid = grid
        self.lo = grid.lo[0]
        self.h = grid.spacing[0]
        self.ok = np.isfinite(v)
        filled = np.where(self.ok, v, 0.0)
        if grid.periodic:
            period = grid.hi[0] - grid.lo[0]
            self.period = period
            self.spline = CubicSpline(np.append(x, x[0] + period), np.append(filled, filled[0]),
                                      bc_type="periodic")
        else:
            self.period = None
            self.spline = CubicSpline(x, filled)

    def __call__(self, pos: np.ndarray):
        n = self.grid.n[0]
        if self.period is not None:
            pos = self.lo + np.mod(pos - self.lo, self.period)
            cell = np.floor((pos - self.lo) / self.h).astype(int)
            support = [(cell + k) % n for k in (-1, 0, 1, 2)]
            inside = np.ones(pos.shape, dtype=bool)
        else:
            cell = np.floor((pos - self.lo) / self.h).astype(int)
            inside = (pos >= self.lo) & (pos <= self.grid.hi[0]) & (cell >= 1) & (cell <= n - 3)
            support = [np.clip(cell + k, 0, n - 1) for k in (-1, 0, 1, 2)]
        ok = inside.copy()
        for idx in support:
            ok &= self.ok[idx]
        return self.spline(pos), ok


def integrate_trajectories(evolution: EvolutionResult, starts,
                           consts: PhysicalConstants | None = None,
                           method: str = "from_current", substeps: int = 4,
                           density_floor: float = DEFAULT_DENSITY_FLOOR) -> TrajectorySet:
    """Integrate dx/dt = v(x, t) with classical RK4.

    v is a cubic spline in x on each snapshot and linear in t between
    snapshots; each snapshot interval is covered by ``substeps`` RK4 steps.
    A particle whose spline support touches a low-density point or a wall is
    frozen in place for the rest of the run.
    """
    consts = consts or evolution.consts
    grid = evolution.grid
    if grid.dimension != 1:
        raise ValueError("trajectories are integrated on 1D grids only")
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    fields = [
        _SnapshotVelocity(grid, velocity_field(grid, psi, consts, method, density_floor)[0])
        for psi in evolution.snapshots
    ]
    _, ok0 = fields[0](starts)
    if not np.all(ok0):
        bad = starts[~ok0]
        raise StartInNode(f"starts {bad.tolist()} lie where the initial density is below threshold")

    pos = starts.copy()
    frozen = np.zeros(starts.shape, dtype=bool)
    history = [pos.copy()]
    h = evolution.snapshot_interval / substeps

    for i in range(len(evolution) - 1):
        f0, f1 = fields[i], fields[i + 1]

        def rate(tau, p):
            a, oka = f0(p)
            b, okb = f1(p)
            return (1.0 - tau) * a + tau * b, oka & okb

        for k in range(substeps):
            tau = k / substeps
            dtau = 1.0 / substeps
            k1, ok1 = rate(tau, pos)
            k2, ok2 = rate(tau + 0.5 * dtau, pos + 0.5 * h * k1)
            k3, ok3 = rate(tau + 0.5 * dtau, pos + 0.5 * h * k2)
            k4, ok4 = rate(tau + dtau, pos + h * k3)
            ok = ok1 & ok2 & ok3 & ok4 & ~frozen
            step = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            pos = np.where(ok, pos + step, pos)
            frozen |= ~ok
        history.append(pos.copy())

    return TrajectorySet(starts=starts, times=evolution.times.copy(),
                         positions=np.array(history), frozen=frozen, method=method)


@dataclass(frozen=True)
class EquivarianceCheck:
    chi2: float
    dof: int
    p_value: float
    frozen: int


def sample_density(grid: Grid, rho, count: int, rng: np.random.Generator,
                   density_floor: float = DEFAULT_DENSITY_FLOOR) -> np.ndarray:
    """Draw positions distributed as ``rho`` (restricted to rho above the floor)."""
    x = grid.axes[0]
    rho = np.where(rho >= density_floor * np.max(rho), rho, 0.0)
    idx = np.flatnonzero(rho)
    xs, ps = x[idx[0]:idx[-1] + 1], rho[idx[0]:idx[-1] + 1]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (ps[1:] + ps[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    # stay one cell away from the support edges so every start is valid
    u = rng.uniform(cdf[1], cdf[-2], size=count)
    return np.interp(u, cdf, xs)


def equivariance_check(evolution: EvolutionResult, count: int = 10_000, bins: int = 32,
                       seed: int = 0, consts: PhysicalConstants | None = None) -> EquivarianceCheck:
    """Chi-square comparison of transported samples with the final density.

    Starts are drawn from rho(0); the final positions are binned into
    ``bins`` cells of equal probability under rho(t_final).
    """
    from scipy.stats import chi2 as chi2_dist

    grid = evolution.grid
    rng = np.random.default_rng(seed)
    starts = sample_density(grid, np.abs(evolution.snapshots[0]) ** 2, count, rng)
    traj = integrate_trajectories(evolution, starts, consts)
    final = traj.positions[-1]
    x = grid.axes[0]
    rho = np.abs(evolution.snapshots[-1]) ** 2
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    inner = np.interp(np.arange(1, bins) / bins, cdf, x)
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    observed, _ = np.histogram(final, bins=edges)
    expected = count / bins
    stat = float(np.sum((observed - expected) ** 2 / expected))
    dof = bins - 1
    return EquivarianceCheck(chi2=stat, dof=dof, p_value=float(chi2_dist.sf(stat, dof)),
                             frozen=int(traj.frozen.sum()))
