"""Crank-Nicolson propagation of the 1D TDSE and closed-form reference states."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from .errors import BoundaryDensityWarning, SingularSystem, UnknownKind
from .grid import Grid
from .wavefield import normalize

BOUNDARY_DENSITY_LIMIT = 1e-12


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0
    light_speed: float = 137.035999

    def __post_init__(self):
        for name in ("hbar", "mass", "light_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Potential:
    """Potential energy sampled on a grid."""

    kind: str
    values: np.ndarray
    omega: float | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential must be finite everywhere")

    @classmethod
    def free(cls, grid: Grid) -> "Potential":
        return cls("free", np.zeros(grid.shape))

    @classmethod
    def harmonic(cls, grid: Grid, omega: float, consts: PhysicalConstants = PhysicalConstants(),
                 center: float = 0.0) -> "Potential":
        r2 = sum((c - center) ** 2 for c in grid.coords)
        return cls("harmonic", 0.5 * consts.mass * omega**2 * r2, omega=omega)

    @classmethod
    def from_table(cls, grid: Grid, x_table, v_table) -> "Potential":
        if grid.dimension != 1:
            raise ValueError("tabulated potentials are 1D only")
        x_table = np.asarray(x_table, dtype=float)
        order = np.argsort(x_table)
        values = np.interp(grid.axes[0], x_table[order], np.asarray(v_table, float)[order])
        return cls("custom_table", values)


def hamiltonian(grid: Grid, potential: Potential, consts: PhysicalConstants) -> sp.csc_matrix:
    """Sparse H = -hbar^2/2m d^2/dx^2 + V with psi = 0 outside a dirichlet box."""
    if grid.dimension != 1:
        raise ValueError("propagation is implemented for 1D grids only")
    n = grid.n[0]
    h = grid.spacing[0]
    kin = consts.hbar**2 / (2.0 * consts.mass * h * h)
    main = 2.0 * kin + potential.values
    off = -kin * np.ones(n - 1)
    H = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.periodic:
        H[0, n - 1] = -kin
        H[n - 1, 0] = -kin
    return H.tocsc()


class CrankNicolson:
    """Prefactored Crank-Nicolson stepper for a fixed (grid, V, dt).

    Solves ``(I + i dt H / 2 hbar) psi' = (I - i dt H / 2 hbar) psi``. A
    negative ``dt`` steps backwards in time.
    """

    def __init__(self, grid: Grid, potential: Potential, dt: float,
                 consts: PhysicalConstants = PhysicalConstants()):
        if dt == 0 or not np.isfinite(dt):
            raise ValueError("dt must be finite and nonzero")
        self.grid = grid
        self.dt = float(dt)
        H = hamiltonian(grid, potential, consts)
        a = 0.5j * dt / consts.hbar
        eye = sp.identity(grid.n[0], dtype=complex, format="csc")
        self._explicit = (eye - a * H).tocsr()
        implicit = (eye + a * H).tocsc()
        try:
            self._lu = splu(implicit)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc

    def step(self, psi: np.ndarray) -> np.ndarray:
        rhs = self._explicit @ psi
        out = self._lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SingularSystem("non-finite values after the linear solve")
        return out


def crank_nicolson_step(grid: Grid, psi, potential: Potential, dt: float,
                        consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if not np.all(np.isfinite(psi)):
        raise SingularSystem("input wavefunction is not finite")
    return CrankNicolson(grid, potential, dt, consts).step(psi)


@dataclass
class EvolutionResult:
    """Snapshots of a Crank-Nicolson run.

    ``snapshots[i]`` is the state at ``times[i]``; ``norms[k]`` is the L2 norm
    after ``k`` steps (``norms[0]`` is the initial norm).
    """

    grid: Grid
    potential: Potential
    consts: PhysicalConstants
    dt: float
    stride: int
    times: np.ndarray
    snapshots: np.ndarray
    norms: np.ndarray
    boundary_density: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def snapshot_interval(self) -> float:
        return self.dt * self.stride

    def __len__(self):
        return len(self.times)

    def time_derivative(self, i: int) -> np.ndarray:
        """Centered d(psi)/dt at interior snapshot ``i``."""
        self._check_interior(i)
        return (self.snapshots[i + 1] - self.snapshots[i - 1]) / (2.0 * self.snapshot_interval)

    def density_rate(self, i: int) -> np.ndarray:
        """Centered d(rho)/dt at interior snapshot ``i``."""
        self._check_interior(i)
        rho_next = np.abs(self.snapshots[i + 1]) ** 2
        rho_prev = np.abs(self.snapshots[i - 1]) ** 2
        return (rho_next - rho_prev) / (2.0 * self.snapshot_interval)

    def phase_rate(self, i: int) -> np.ndarray:
        """Centered d(phase)/dt at interior snapshot ``i`` (phase in radians).

        Uses the angle of ``psi(t+) conj(psi(t-))``, so no unwrapping in time is
        needed as long as the phase moves less than pi per two intervals.
        """
        self._check_interior(i)
        ratio = self.snapshots[i + 1] * np.conj(self.snapshots[i - 1])
        return np.angle(ratio) / (2.0 * self.snapshot_interval)

    def _check_interior(self, i):
        if not 0 < i < len(self.times) - 1:
            raise IndexError(f"snapshot {i} has no neighbours on both sides")


def evolve(grid: Grid, psi0, potential: Potential, dt: float, steps: int, stride: int = 1,
           consts: PhysicalConstants = PhysicalConstants()) -> EvolutionResult:
    """Run ``steps`` CN steps, keeping every ``stride``-th state (and the first)."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    psi = np.asarray(psi0, dtype=complex).copy()
    snapshots = [psi.copy()]
    times = [0.0]
    norms = np.empty(steps + 1)
    norms[0] = np.sqrt(grid.integrate(np.abs(psi) ** 2))
    edge = _edge_mask(grid)
    boundary = float(np.max(np.abs(psi[edge]) ** 2)) if edge.any() else 0.0
    if steps > 0:
        if not dt > 0:
            raise ValueError("dt must be positive when steps > 0")
        stepper = CrankNicolson(grid, potential, dt, consts)
        for k in range(1, steps + 1):
            psi = stepper.step(psi)
            rho = np.abs(psi) ** 2
            norms[k] = np.sqrt(grid.integrate(rho))
            if edge.any():
                boundary = max(boundary, float(np.max(rho[edge])))
            if k % stride == 0:
                snapshots.append(psi.copy())
                times.append(k * dt)
    notes = []
    if boundary > BOUNDARY_DENSITY_LIMIT:
        msg = f"density at the box walls reached {boundary:.3e} (> {BOUNDARY_DENSITY_LIMIT:g})"
        warnings.warn(msg, BoundaryDensityWarning, stacklevel=2)
        notes.append(msg)
    return EvolutionResult(
        grid=grid, potential=potential, consts=consts, dt=float(dt), stride=stride,
        times=np.array(times), snapshots=np.array(snapshots), norms=norms,
        boundary_density=boundary, warnings=notes,
    )


def _edge_mask(grid: Grid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    if grid.periodic:
        return mask
    mask[0] = mask[-1] = True
    return mask


# --- closed-form reference states -------------------------------------------

def _plane_wave(grid, t, consts, k=1.0):
    x = grid.x
    omega = consts.hbar * k * k / (2.0 * consts.mass)
    return np.exp(1j * (k * x - omega * t))


def _free_gaussian(grid, t, consts, sigma0=1.0, x0=0.0, k0=0.0):
    # sigma0 is the standard deviation of |psi|^2 at t = 0
    x = grid.x
    hb, m = consts.hbar, consts.mass
    c = 1.0 + 1j * hb * t / (2.0 * m * sigma0**2)
    v = hb * k0 / m
    envelope = np.exp(-((x - x0 - v * t) ** 2) / (4.0 * sigma0**2 * c))
    phase = np.exp(1j * (k0 * (x - x0) - hb * k0**2 * t / (2.0 * m)))
    return (2.0 * np.pi * sigma0**2) ** -0.25 / np.sqrt(c) * envelope * phase


def _ho_ground(grid, t, consts, omega=1.0, center=0.0):
    hb, m = consts.hbar, consts.mass
    r2 = sum((c - center) ** 2 for c in grid.coords)
    norm = (m * omega / (np.pi * hb)) ** (0.25 * grid.dimension)
    return norm * np.exp(-m * omega * r2 / (2.0 * hb)) * np.exp(-0.5j * grid.dimension * omega * t)


def _power_law_radial(grid, t, consts, alpha=0.5, r0=1.0, center=None):
    center = np.zeros(grid.dimension) if center is None else np.atleast_1d(center)
    r = np.sqrt(sum((c - c0) ** 2 for c, c0 in zip(grid.coords, center)))
    return ((r / r0) ** alpha).astype(complex)


def _exponential(grid, t, consts, kappa=1.0):
    return np.exp(kappa * grid.x).astype(complex)


ANALYTIC_KINDS = {
    "plane_wave": (_plane_wave, ("k",)),
    "free_gaussian": (_free_gaussian, ("sigma0", "x0", "k0")),
    "ho_ground": (_ho_ground, ("omega", "center")),
    "power_law_radial": (_power_law_radial, ("alpha", "r0", "center")),
    "exponential": (_exponential, ("kappa",)),
}
ONE_D_KINDS = {"plane_wave", "free_gaussian", "exponential"}


def analytic_state(kind: str, params: dict | None = None, grid: Grid | None = None,
                   t: float = 0.0, consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Closed-form state samples at time ``t``.

    plane_wave and free_gaussian carry their exact free time dependence;
    ho_ground carries ``exp(-i omega t / 2)``. power_law_radial ``(r/r0)^alpha``
    and exponential ``exp(kappa x)`` are static real amplitudes.
    """
    if kind not in ANALYTIC_KINDS:
        raise UnknownKind(f"unknown analytic state {kind!r}; known: {sorted(ANALYTIC_KINDS)}")
    func, allowed = ANALYTIC_KINDS[kind]
    params = dict(params or {})
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"{kind} does not take parameters {sorted(extra)}")
    if kind in ONE_D_KINDS and grid.dimension != 1:
        raise ValueError(f"{kind} is defined on 1D grids only")
    return func(grid, t, consts, **params)


def ground_state(grid: Grid, potential: Potential,
                 consts: PhysicalConstants = PhysicalConstants()) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the discrete Hamiltonian used by the propagator.

    Returns the energy and the normalized, real, positive ground state. This is
    the exactly stationary state of the discretized TDSE, unlike the
    continuum formula, which differs from it at O(dx^2).
    """
    if grid.dimension != 1 or grid.periodic:
        raise ValueError("discrete ground states need a 1D dirichlet grid")
    h = grid.spacing[0]
    kin = consts.hbar**2 / (2.0 * consts.mass * h * h)
    main = 2.0 * kin + potential.values
    off = -kin * np.ones(grid.n[0] - 1)
    w, v = eigh_tridiagonal(main, off, select="i", select_range=(0, 0))
    vec = v[:, 0]
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    return float(w[0]), normalize(grid, vec)
