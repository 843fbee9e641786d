"""Polar (amplitude/phase) decomposition of sampled wavefunctions."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import AllMasked, ZeroNorm
from .grid import Grid

TWO_PI = 2.0 * np.pi
DEFAULT_NODE_EPSILON = 1e-10


@dataclass(frozen=True)
class PolarDecomposition:
    """``psi = amplitude * exp(i * total_phase)``.

    The phase is stored as a field anchored to zero at the first unmasked point
    plus a scalar ``offset``; ``total_phase`` is their sum. Only the anchored
    field enters spatial derivatives, so a constant gauge shift (which moves
    only ``offset``) leaves every derived observable bit-for-bit unchanged.
    """

    grid: Grid
    amplitude: np.ndarray
    phase: np.ndarray
    offset: float
    node_mask: np.ndarray
    epsilon_node: float

    @property
    def total_phase(self) -> np.ndarray:
        return self.phase + self.offset

    @property
    def valid(self) -> np.ndarray:
        return ~self.node_mask

    def shifted(self, phi0: float) -> "PolarDecomposition":
        """Constant (global) gauge shift ``psi -> exp(i phi0) psi``."""
        return replace(self, offset=self.offset + float(phi0))


def _unwrap_line(raw: np.ndarray, mask: np.ndarray, seed: float | None = None) -> np.ndarray:
    # integer winding counts keep result - raw an exact multiple of 2*pi
    out = np.array(raw, dtype=float)
    good = np.flatnonzero(~mask)
    if good.size == 0:
        if seed is not None:
            out += TWO_PI * np.round((seed - raw[0]) / TWO_PI)
        return out
    vals = raw[good]
    steps = np.diff(vals)
    turns = -np.round(steps / TWO_PI)
    wind = np.concatenate([[0.0], np.cumsum(turns)])
    if seed is not None:
        # first valid point chosen nearest to the seed value
        start = np.round((seed - vals[0]) / TWO_PI)
        wind = wind + start
    # masked points inherit the winding of the preceding valid point
    owner = np.searchsorted(good, np.arange(raw.size), side="right") - 1
    owner = np.clip(owner, 0, good.size - 1)
    return out + TWO_PI * wind[owner]


def unwrap_phase(raw_phase, mask=None) -> np.ndarray:
    """Remove 2*pi jumps from a principal-value phase field.

    1D: cumulative left-to-right unwrap over unmasked points; a masked run is
    skipped and the next valid point is re-anchored to the last valid one.
    2D: row 0 is unwrapped first, then every column is unwrapped starting from
    its row-0 value. This path-following scheme assumes no phase vortices.
    """
    raw = np.asarray(raw_phase, dtype=float)
    if mask is None:
        mask = np.zeros(raw.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if raw.ndim == 1:
        return _unwrap_line(raw, mask)
    if raw.ndim != 2:
        raise ValueError("unwrap_phase supports 1D and 2D fields")
    out = np.empty_like(raw)
    out[0] = _unwrap_line(raw[0], mask[0])
    for j in range(raw.shape[1]):
        out[1:, j] = _unwrap_line(raw[1:, j], mask[1:, j], seed=out[0, j])
    return out


def _fill_from_nearest(field: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return field
    _, nearest = ndimage.distance_transform_edt(mask, return_indices=True)
    return field[tuple(nearest)]


def polar_decompose(
    grid: Grid, psi, epsilon_node: float | None = None
) -> PolarDecomposition:
    """Split ``psi`` into amplitude and unwrapped phase.

    ``epsilon_node`` is an absolute amplitude threshold; by default it is
    ``1e-10 * max|psi|``. Points below it are masked and their phase is copied
    from the nearest unmasked point.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != grid.shape:
        raise ValueError("psi does not match grid")
    amplitude = np.abs(psi)
    if epsilon_node is None:
        epsilon_node = DEFAULT_NODE_EPSILON * float(np.max(amplitude))
    if not epsilon_node > 0:
        raise ValueError("epsilon_node must be positive")
    node_mask = amplitude < epsilon_node
    if node_mask.all():
        raise AllMasked(f"every point is below the node threshold {epsilon_node:g}")
    unwrapped = unwrap_phase(np.angle(psi), node_mask)
    unwrapped = _fill_from_nearest(unwrapped, node_mask)
    anchor = np.flatnonzero(~node_mask.ravel())[0]
    offset = float(unwrapped.ravel()[anchor])
    return PolarDecomposition(
        grid=grid,
        amplitude=amplitude,
        phase=unwrapped - offset,
        offset=offset,
        node_mask=node_mask,
        epsilon_node=float(epsilon_node),
    )


def polar_compose(decomp: PolarDecomposition) -> np.ndarray:
    return decomp.amplitude * np.exp(1j * decomp.total_phase)


def norm(grid: Grid, psi) -> float:
    return float(np.sqrt(grid.integrate(np.abs(psi) ** 2)))


def normalize(grid: Grid, psi) -> np.ndarray:
    """Rescale to unit trapezoid L2 norm."""
    psi = np.asarray(psi, dtype=complex)
    nrm = norm(grid, psi)
    if not nrm > 0 or not np.isfinite(nrm):
        raise ZeroNorm("cannot normalize a field with zero norm")
    return psi / nrm
