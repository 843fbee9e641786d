"""Uniform 1D/2D grids and second-order finite-difference operators.

Fields are plain numpy arrays. A scalar field has shape ``grid.shape``; a
vector field has shape ``(grid.dimension, *grid.shape)`` with component ``i``
along axis ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DIRICHLET = "dirichlet_zero"
PERIODIC = "periodic"
BOUNDARY_KINDS = (DIRICHLET, PERIODIC)
MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on ``[lo, hi]`` (dirichlet) or ``[lo, hi)`` (periodic)."""

    n: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    boundary: str = DIRICHLET

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(n) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if len(lo) == 1 and len(n) == 2:
            lo = lo * 2
        if len(hi) == 1 and len(n) == 2:
            hi = hi * 2
        if not len(n) == len(lo) == len(hi):
            raise ValueError("n, lo and hi must have one entry per axis")
        if any(v < MIN_POINTS for v in n):
            raise ValueError(f"need at least {MIN_POINTS} points per axis, got {n}")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("axis_max must exceed axis_min")
        if self.boundary not in BOUNDARY_KINDS:
            raise ValueError(f"boundary must be one of {BOUNDARY_KINDS}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def line(cls, n: int, lo: float, hi: float, boundary: str = DIRICHLET) -> "Grid":
        return cls((n,), (lo,), (hi,), boundary)

    @classmethod
    def square(cls, n: int, lo: float, hi: float, boundary: str = DIRICHLET) -> "Grid":
        return cls((n, n), (lo, lo), (hi, hi), boundary)

    @property
    def dimension(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def spacing(self) -> tuple[float, ...]:
        cells = [m if self.periodic else m - 1 for m in self.n]
        return tuple((b - a) / c for a, b, c in zip(self.lo, self.hi, cells))

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(a + h * np.arange(m) for a, h, m in zip(self.lo, self.spacing, self.n))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the full grid shape (``ij`` indexing)."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @property
    def x(self) -> np.ndarray:
        return self.coords[0]

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid-rule quadrature weights."""
        w = np.ones(self.shape)
        for axis, h in enumerate(self.spacing):
            wa = np.full(self.n[axis], h)
            if not self.periodic:
                wa[0] = wa[-1] = 0.5 * h
            shape = [1] * self.dimension
            shape[axis] = -1
            w = w * wa.reshape(shape)
        return w

    def integrate(self, f: np.ndarray) -> float | complex:
        return np.sum(self.weights * f)

    def interior(self, margin: int = 2) -> np.ndarray:
        """Boolean mask excluding ``margin`` outermost points per dirichlet boundary."""
        mask = np.ones(self.shape, dtype=bool)
        if self.periodic or margin == 0:
            return mask
        for axis in range(self.dimension):
            index = [slice(None)] * self.dimension
            index[axis] = slice(0, margin)
            mask[tuple(index)] = False
            index[axis] = slice(-margin, None)
            mask[tuple(index)] = False
        return mask

    def nearest_index(self, point) -> tuple[int, ...]:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return tuple(
            int(np.clip(np.rint((p - a) / h), 0, m - 1))
            for p, a, h, m in zip(point, self.lo, self.spacing, self.n)
        )

    def refined(self) -> "Grid":
        """Grid with every spacing halved (nested points for dirichlet)."""
        n = tuple(2 * m if self.periodic else 2 * m - 1 for m in self.n)
        return Grid(n, self.lo, self.hi, self.boundary)


def _first_derivative(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    g = np.moveaxis(f, axis, 0)
    if periodic:
        d = (np.roll(g, -1, axis=0) - np.roll(g, 1, axis=0)) / (2.0 * h)
    else:
        d = np.empty_like(g)
        d[1:-1] = (g[2:] - g[:-2]) / (2.0 * h)
        d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
        d[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) / (2.0 * h)
    return np.moveaxis(d, 0, axis)


def _second_derivative(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    g = np.moveaxis(f, axis, 0)
    h2 = h * h
    if periodic:
        d = (np.roll(g, -1, axis=0) - 2.0 * g + np.roll(g, 1, axis=0)) / h2
    else:
        d = np.empty_like(g)
        d[1:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / h2
        d[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / h2
        d[-1] = (2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]) / h2
    return np.moveaxis(d, 0, axis)


def _as_field(grid: Grid, f) -> np.ndarray:
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if not np.issubdtype(f.dtype, np.complexfloating):
        f = f.astype(float)
    return f


def partial(grid: Grid, f, axis: int) -> np.ndarray:
    f = _as_field(grid, f)
    return _first_derivative(f, grid.spacing[axis], axis, grid.periodic)


def gradient(grid: Grid, f) -> np.ndarray:
    """Second-order gradient; one-sided at dirichlet walls, wrapped when periodic."""
    f = _as_field(grid, f)
    return np.stack([
        _first_derivative(f, h, axis, grid.periodic) for axis, h in enumerate(grid.spacing)
    ])


def laplacian(grid: Grid, f) -> np.ndarray:
    """3-point (1D) / 5-point (2D) Laplacian."""
    f = _as_field(grid, f)
    return sum(
        _second_derivative(f, h, axis, grid.periodic) for axis, h in enumerate(grid.spacing)
    )


def divergence(grid: Grid, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (grid.dimension, *grid.shape):
        raise ValueError(f"vector field shape {v.shape} does not match grid")
    return sum(
        _first_derivative(v[axis].astype(v.dtype), h, axis, grid.periodic)
        for axis, h in enumerate(grid.spacing)
    )


def curl(grid: Grid, v) -> np.ndarray:
    """Out-of-plane component of the curl of a 2D vector field."""
    if grid.dimension != 2:
        raise ValueError("curl needs a 2D grid")
    v = np.asarray(v, dtype=float)
    return partial(grid, v[1], 0) - partial(grid, v[0], 1)


def wrap_angle(a):
    """Map angles into [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def phase_gradient(grid: Grid, phase) -> np.ndarray:
    """Gradient of an unwrapped phase.

    On periodic axes the neighbour differences are wrapped first so that a net
    winding across the seam does not show up as a spurious spike.
    """
    phase = _as_field(grid, phase)
    if not grid.periodic:
        return gradient(grid, phase)
    comps = []
    for axis, h in enumerate(grid.spacing):
        g = np.moveaxis(phase, axis, 0)
        d = wrap_angle(np.roll(g, -1, axis=0) - np.roll(g, 1, axis=0)) / (2.0 * h)
        comps.append(np.moveaxis(d, 0, axis))
    return np.stack(comps)


def l2_norm(grid: Grid, f, where=None) -> float:
    """Trapezoid L2 norm of a real or complex field over an optional region."""
    f = np.abs(np.asarray(f)) ** 2
    w = grid.weights
    if where is not None:
        f = np.where(where, f, 0.0)
    return float(np.sqrt(np.sum(w * f)))


def max_norm(f, where=None) -> float:
    f = np.abs(np.asarray(f))
    if where is not None:
        f = f[where]
    return float(np.max(f)) if f.size else 0.0
