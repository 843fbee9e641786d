"""Gauge phase, spin velocity field and semiclassical spin vector.

The gauge phase theta is the part of the total phase carried by the complex
amplitude R = A exp(i theta). In 1D it is recovered from A alone by
integrating sqrt(lap(A)/A); in 2D the cylindrically symmetric solution
theta = alpha ln(r/r0) is used in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ReferenceInvalid, SpinNotOrthogonal
from .grid import Grid, gradient, l2_norm, laplacian, max_norm
from .propagator import PhysicalConstants
from .wavefield import PolarDecomposition

SIGNS = {"plus": 1.0, "minus": -1.0}
ORTHOGONALITY_TOL = 1e-9


@dataclass(frozen=True)
class GaugePhase:
    """theta(x) on the valid segment around ``reference``; NaN elsewhere.

    ``valid`` marks points where lap(A)/A >= 0; ``region`` is the connected
    valid segment that contains the reference point and on which ``theta``
    is defined.
    """

    grid: Grid
    theta: np.ndarray
    sign: str
    valid: np.ndarray
    region: np.ndarray
    reference: float
    integrand: np.ndarray


def _connected_run(valid: np.ndarray, index: int) -> np.ndarray:
    lo = index
    while lo > 0 and valid[lo - 1]:
        lo -= 1
    hi = index
    while hi < valid.size - 1 and valid[hi + 1]:
        hi += 1
    run = np.zeros_like(valid)
    run[lo:hi + 1] = True
    return run


def gauge_phase_from_amplitude(grid: Grid, amplitude, sign: str = "plus",
                               reference: float = 0.0) -> GaugePhase:
    """theta = +/- integral of sqrt(lap(A)/A) dx, zero at ``reference``.

    Integration uses the trapezoid rule and stays inside the connected
    stretch where lap(A)/A >= 0 that contains the reference point; points
    where the ratio is negative are masked rather than given complex values.
    """
    if grid.dimension != 1:
        raise ValueError("the amplitude integral is only defined along one axis")
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {sorted(SIGNS)}")
    a = np.asarray(amplitude, dtype=float)
    if np.any(a < 0):
        raise ValueError("amplitude must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = laplacian(grid, a) / a
    valid = np.isfinite(ratio) & (ratio >= 0) & (a > 0)
    (iref,) = grid.nearest_index(reference)
    x = grid.axes[0]
    if not valid[iref]:
        raise ReferenceInvalid(
            f"lap(A)/A = {ratio[iref]:.3g} < 0 at the reference point x = {x[iref]:.6g}")
    region = _connected_run(valid, iref)
    integrand = np.where(valid, np.sqrt(np.where(valid, ratio, 0.0)), np.nan)
    idx = np.flatnonzero(region)
    running = cumulative_trapezoid(integrand[idx], x[idx], initial=0.0)
    running = running - running[iref - idx[0]]
    theta = np.full(grid.shape, np.nan)
    theta[idx] = SIGNS[sign] * running
    return GaugePhase(grid=grid, theta=theta, sign=sign, valid=valid, region=region,
                      reference=float(x[iref]), integrand=integrand)


@dataclass(frozen=True)
class GaugeConditionResidual:
    """lap(A) - |grad theta|^2 A and its norms over finite interior points."""

    residual: np.ndarray
    region: np.ndarray
    l2: float
    max: float


def verify_gauge_condition(grid: Grid, amplitude, theta, region=None, margin: int = 2) -> GaugeConditionResidual:
    a = np.asarray(amplitude, dtype=float)
    grad_theta = gradient(grid, theta)
    residual = laplacian(grid, a) - np.sum(grad_theta**2, axis=0) * a
    mask = grid.interior(margin) & np.isfinite(residual)
    if region is not None:
        mask &= np.asarray(region, dtype=bool)
    return GaugeConditionResidual(residual=residual, region=mask,
                        l2=l2_norm(grid, np.where(mask, residual, 0.0), mask),
                        max=max_norm(residual, mask))


@dataclass(frozen=True)
class ActionSplit:
    """S~ = hbar * total phase and the classical part S = S~ - hbar * theta."""

    S: np.ndarray
    S_tilde: np.ndarray
    orthogonality: float


def gauge_transform_action(decomp: PolarDecomposition, gauge: GaugePhase,
                           consts: PhysicalConstants = PhysicalConstants(),
                           rho=None, margin: int = 2) -> ActionSplit:
    """Split the total action into classical and gauge parts.

    ``orthogonality`` is the density-weighted mean of grad(theta) . grad(S)
    over the interior of the gauge region; it vanishes when the classical
    flow is orthogonal to the phase gradient.
    """
    grid = decomp.grid
    s_tilde = consts.hbar * decomp.total_phase
    s = np.where(gauge.region, s_tilde - consts.hbar * gauge.theta, np.nan)
    if rho is None:
        rho = decomp.amplitude**2
    dot = np.sum(gradient(grid, gauge.theta) * gradient(grid, s), axis=0)
    region = grid.interior(margin) & np.isfinite(dot)
    w = grid.weights * np.where(region, rho, 0.0)
    orth = float(np.sum(w * np.where(region, dot, 0.0)) / np.sum(w)) if np.sum(w) > 0 else 0.0
    return ActionSplit(S=s, S_tilde=s_tilde, orthogonality=orth)


@dataclass(frozen=True)
class SpinConfig:
    alpha: float = 0.5
    r0: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("spin direction must be a unit 3-vector")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "direction", tuple(float(c) for c in d))


@dataclass
class SpinFieldSet:
    """Log-phase construction on a 2D grid.

    ``mask`` flags the center disk where the r^-1 fields are not resolved.
    ``velocity`` and ``spin_vector`` are filled in by the later stages.
    """

    grid: Grid
    radius: np.ndarray
    theta: np.ndarray
    grad_theta: np.ndarray
    mask: np.ndarray
    exclusion_radius: float
    velocity: np.ndarray | None = None
    spin_vector: np.ndarray | None = None


def _offsets(grid: Grid, center):
    return grid.coords[0] - center[0], grid.coords[1] - center[1]


def log_gauge_phase(grid: Grid, cfg: SpinConfig, exclusion_radius: float | None = None) -> SpinFieldSet:
    """theta = alpha ln(r/r0) and grad theta = (alpha / r) r_hat, sampled exactly."""
    if grid.dimension != 2:
        raise ValueError("the log gauge phase needs a 2D grid")
    if exclusion_radius is None:
        exclusion_radius = 2.0 * max(grid.spacing)
    dx, dy = _offsets(grid, cfg.center)
    r = np.hypot(dx, dy)
    mask = r < exclusion_radius
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = cfg.alpha * np.log(r / cfg.r0)
        grad = np.stack([cfg.alpha * dx / r**2, cfg.alpha * dy / r**2])
    theta = np.where(mask, np.nan, theta)
    grad = np.where(mask, np.nan, grad)
    return SpinFieldSet(grid=grid, radius=r, theta=theta, grad_theta=grad, mask=mask,
                        exclusion_radius=float(exclusion_radius))


def _require_normal(direction):
    sx, sy, _ = direction
    if abs(sx) > ORTHOGONALITY_TOL or abs(sy) > ORTHOGONALITY_TOL:
        raise SpinNotOrthogonal(
            f"spin direction {direction} must be normal to the grid plane")


def spin_velocity_field(grad_theta, cfg: SpinConfig,
                        consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """V_S = (hbar / m) s_hat x grad(theta), in-plane components."""
    _require_normal(cfg.direction)
    sz = cfg.direction[2]
    g = np.asarray(grad_theta, dtype=float)
    k = consts.hbar / consts.mass
    return np.stack([-k * sz * g[1], k * sz * g[0]])


def spin_velocity_from_density(grid: Grid, rho, spin, consts: PhysicalConstants = PhysicalConstants(),
                               density_floor: float = 1e-8) -> np.ndarray:
    """V = (grad rho x s) / (m rho) for a spin vector ``s`` normal to the plane.

    NaN where rho is below ``density_floor * max(rho)``.
    """
    if grid.dimension != 2:
        raise ValueError("needs a 2D grid")
    spin = np.asarray(spin, dtype=float)
    _require_normal(spin)
    rho = np.asarray(rho, dtype=float)
    g = gradient(grid, rho)
    low = rho < density_floor * float(np.max(rho)) if np.max(rho) > 0 else np.ones_like(rho, bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.stack([g[1] * spin[2], -g[0] * spin[2]]) / (consts.mass * rho)
    return np.where(low, np.nan, v)


@dataclass(frozen=True)
class SpinVectorReport:
    field: np.ndarray
    magnitude: float
    deviation: float


def spin_vector_field(fields: SpinFieldSet, cfg: SpinConfig,
                      consts: PhysicalConstants = PhysicalConstants()) -> SpinVectorReport:
    """s = r r_hat x m V_S at every unmasked point, with its spatial spread."""
    velocity = fields.velocity
    if velocity is None:
        velocity = spin_velocity_field(fields.grad_theta, cfg, consts)
        fields.velocity = velocity
    dx, dy = _offsets(fields.grid, cfg.center)
    m = consts.mass
    sz = m * (dx * velocity[1] - dy * velocity[0])
    s = np.stack([np.zeros_like(sz), np.zeros_like(sz), sz])
    s = np.where(fields.mask, np.nan, s)
    fields.spin_vector = s
    mag = np.abs(sz[~fields.mask])
    if mag.size == 0:
        return SpinVectorReport(field=s, magnitude=0.0, deviation=0.0)
    mean = float(np.mean(mag))
    return SpinVectorReport(field=s, magnitude=mean, deviation=float(np.max(np.abs(mag - mean))))


def compton_speed(cfg: SpinConfig, consts: PhysicalConstants = PhysicalConstants()) -> float:
    """|V_S| at r0 = hbar / (m c), which comes out as alpha * c."""
    r0 = consts.hbar / (consts.mass * consts.light_speed)
    return consts.hbar * cfg.alpha / (consts.mass * r0)


def quantum_potential_from_theta(grad_theta, consts: PhysicalConstants = PhysicalConstants()):
    """Q = -(hbar^2 / 2m) |grad theta|^2."""
    g = np.asarray(grad_theta, dtype=float)
    return -(consts.hbar**2) / (2.0 * consts.mass) * np.sum(g**2, axis=0)
