"""Periodic grids, grid functions and finite-difference stencils on the unit torus.

Nodes sit at ``x_i = i * h`` with ``h = 1 / N``; periodicity is handled with
modular index arithmetic rather than ghost cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform node-centred grid on the torus ``R^dim / Z^dim``."""

    dim: int
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 8:
            raise GridError(f"points_per_axis must be an integer >= 8, got {self.points_per_axis}")

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.points_per_axis) * self.spacing

    def coordinates(self) -> np.ndarray:
        """Node coordinates with shape ``grid.shape + (dim,)``."""
        axes = [self.axis()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def wrap(self, index) -> tuple[int, ...]:
        idx = np.atleast_1d(np.asarray(index, dtype=int))
        if idx.size != self.dim:
            raise GridError(f"index {index!r} does not have {self.dim} components")
        return tuple(int(i) % self.points_per_axis for i in idx)

    def refined(self, factor: int = 2) -> "PeriodicGrid":
        return PeriodicGrid(self.dim, self.points_per_axis * factor)


@dataclass(frozen=True)
class ScalarField:
    """Real values on the nodes of a :class:`PeriodicGrid`."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape).copy()
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> "ScalarField":
        """Sample ``func(x)`` where ``x`` has shape ``grid.shape + (dim,)``."""
        return cls(grid, func(grid.coordinates()))

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float = 0.0) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def __getitem__(self, index) -> float:
        return float(self.values[self.grid.wrap(index)])

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, amount: float) -> "ScalarField":
        return ScalarField(self.grid, self.values + amount)


def gradient_upwind(field: ScalarField, node) -> tuple[np.ndarray, np.ndarray]:
    """One-sided differences ``(p_minus, p_plus)`` at a single node."""
    grid = field.grid
    idx = np.array(grid.wrap(node))
    f0 = field.values[tuple(idx)]
    p_minus = np.empty(grid.dim)
    p_plus = np.empty(grid.dim)
    for k in range(grid.dim):
        e = np.zeros(grid.dim, dtype=int)
        e[k] = 1
        f_fwd = field.values[grid.wrap(idx + e)]
        f_bwd = field.values[grid.wrap(idx - e)]
        p_minus[k] = (f0 - f_bwd) / grid.spacing
        p_plus[k] = (f_fwd - f0) / grid.spacing
    return p_minus, p_plus


def laplacian_centered(field: ScalarField, node) -> float:
    grid = field.grid
    idx = np.array(grid.wrap(node))
    f0 = field.values[tuple(idx)]
    total = 0.0
    for k in range(grid.dim):
        e = np.zeros(grid.dim, dtype=int)
        e[k] = 1
        total += field.values[grid.wrap(idx + e)] - 2.0 * f0 + field.values[grid.wrap(idx - e)]
    return float(total / grid.spacing**2)


# Whole-array versions used by the solvers.  ``values`` has shape grid.shape;
# returned gradients carry a trailing axis of length dim.

def one_sided_differences(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    dim = values.ndim
    p_minus = np.empty(values.shape + (dim,))
    p_plus = np.empty(values.shape + (dim,))
    for k in range(dim):
        p_minus[..., k] = (values - np.roll(values, 1, axis=k)) / h
        p_plus[..., k] = (np.roll(values, -1, axis=k) - values) / h
    return p_minus, p_plus


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * values.ndim * values
    for k in range(values.ndim):
        out = out + np.roll(values, 1, axis=k) + np.roll(values, -1, axis=k)
    return out / h**2


def max_one_sided_slope(values: np.ndarray, h: float) -> float:
    _, p_plus = one_sided_differences(values, h)
    return float(np.max(np.abs(p_plus)))


def resample(field: ScalarField, grid: PeriodicGrid) -> ScalarField:
    """Periodic (multi)linear interpolation of ``field`` onto ``grid``."""
    if field.grid.dim != grid.dim:
        raise GridError("dimension mismatch")
    if field.grid == grid:
        return field
    src = field.values
    n = field.grid.n
    pos = grid.coordinates() * n
    base = np.floor(pos).astype(int)
    frac = pos - base
    out = np.zeros(grid.shape)
    for corner in np.ndindex(*(2,) * grid.dim):
        weight = np.ones(grid.shape)
        index = []
        for k, bit in enumerate(corner):
            weight = weight * (frac[..., k] if bit else 1.0 - frac[..., k])
            index.append((base[..., k] + bit) % n)
        out += weight * src[tuple(index)]
    return ScalarField(grid, out)
