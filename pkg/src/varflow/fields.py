"""Uniform rectilinear grids and the sampled fields that live on them.

Everything downstream (differential operators, Poisson solvers, the flow and
wave diagnostics) works on these containers.  Field values are stored as
read-only numpy arrays so that all operations are pure transformations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_POINTS = 2_000_000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid on a rectangular domain.

    ``extents`` is one (lo, hi) pair per axis, ``counts`` the number of
    sample points per axis (>= 3 so second-order stencils fit).  Axes are
    indexed 0..ndim-1; for space-time grids axis 0 is the time-like axis
    by convention of the modules that use them.
    """

    extents: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        counts = tuple(int(n) for n in self.counts)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "counts", counts)
        if len(extents) != len(counts) or not counts:
            raise ValueError("extents and counts must be non-empty and equal length")
        if len(counts) > 4:
            raise ValueError(f"at most 4 axes supported, got {len(counts)}")
        for n in counts:
            if n < 3:
                raise ValueError(f"need >= 3 points per axis, got {n}")
        for lo, hi in extents:
            if not hi > lo:
                raise ValueError(f"empty extent [{lo}, {hi}]")
        npts = int(np.prod(counts))
        if npts > MAX_POINTS:
            raise ValueError(f"{npts} points exceeds the {MAX_POINTS} point budget")

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.extents, self.counts))

    @property
    def num_points(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.extents[i]
        return np.linspace(lo, hi, self.counts[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.ndim)]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an (N, ndim) array in row-major order."""
        mesh = self.meshgrid()
        return np.column_stack([m.ravel() for m in mesh])

    def volume_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (including the cell volume factor)."""
        w = np.ones(self.shape)
        for ax, (h, n) in enumerate(zip(self.spacing, self.counts)):
            w1 = np.full(n, h)
            w1[0] *= 0.5
            w1[-1] *= 0.5
            shape = [1] * self.ndim
            shape[ax] = n
            w = w * w1.reshape(shape)
        return w

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extents]))

    def refine(self, factor: int = 2) -> "Grid":
        """Grid with (n - 1) * factor + 1 points per axis; shares all nodes."""
        return Grid(self.extents, tuple((n - 1) * factor + 1 for n in self.counts))


def _check_values(grid: Grid, values: np.ndarray, expected_shape: tuple[int, ...], what: str):
    if values.shape != expected_shape:
        raise ValueError(f"{what} values have shape {values.shape}, expected {expected_shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        _check_values(self.grid, v, self.grid.shape, "ScalarField")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, f) -> "ScalarField":
        return cls(grid, f(*grid.meshgrid()))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * a)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        """Quadrature-weighted mean over the domain."""
        w = self.grid.volume_weights()
        return float(np.sum(w * self.values) / np.sum(w))

    def shifted_to_zero_mean(self) -> "ScalarField":
        return ScalarField(self.grid, self.values - self.mean())


@dataclass(frozen=True)
class VectorField:
    """Vector-valued samples; component axis is the trailing one."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        _check_values(self.grid, v, self.grid.shape + (self.grid.ndim,), "VectorField")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, f) -> "VectorField":
        comps = f(*grid.meshgrid())
        return cls(grid, np.stack(np.broadcast_arrays(*comps), axis=-1))

    @classmethod
    def from_components(cls, comps: list[ScalarField]) -> "VectorField":
        return cls(comps[0].grid, np.stack([c.values for c in comps], axis=-1))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros(grid.shape + (grid.ndim,)))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[..., i])

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "VectorField":
        return VectorField(self.grid, self.values * a)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


# Boundary faces are keyed by (axis, side); side 0 is the low face, 1 the
# high face.  A corner point appears once per incident face, each time with
# that face's outward normal, which keeps the per-face trapezoidal rule
# consistent with the Gauss theorem discretization.
FaceKey = tuple[int, int]


def face_shape(grid: Grid, axis: int) -> tuple[int, ...]:
    return tuple(n for i, n in enumerate(grid.counts) if i != axis)


def face_normal(grid: Grid, key: FaceKey) -> np.ndarray:
    axis, side = key
    n = np.zeros(grid.ndim)
    n[axis] = -1.0 if side == 0 else 1.0
    return n


def face_keys(grid: Grid) -> list[FaceKey]:
    return [(axis, side) for axis in range(grid.ndim) for side in (0, 1)]


@dataclass(frozen=True)
class BoundaryField:
    """Scalar samples on the boundary faces of a grid, one array per face."""

    grid: Grid
    faces: dict[FaceKey, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        faces = {}
        for key in face_keys(self.grid):
            if key not in self.faces:
                raise ValueError(f"missing face {key}")
            v = _readonly(self.faces[key])
            if v.shape != face_shape(self.grid, key[0]):
                raise ValueError(f"face {key} has shape {v.shape}, expected {face_shape(self.grid, key[0])}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"face {key} contains non-finite values")
            faces[key] = v
        object.__setattr__(self, "faces", faces)

    @classmethod
    def zeros(cls, grid: Grid) -> "BoundaryField":
        return cls(grid, {k: np.zeros(face_shape(grid, k[0])) for k in face_keys(grid)})

    def face_weights(self, key: FaceKey) -> np.ndarray:
        """Trapezoidal surface-quadrature weights on one face."""
        axis, _ = key
        w = np.ones(face_shape(self.grid, axis))
        other = [i for i in range(self.grid.ndim) if i != axis]
        for j, ax in enumerate(other):
            h = self.grid.spacing[ax]
            n = self.grid.counts[ax]
            w1 = np.full(n, h)
            w1[0] *= 0.5
            w1[-1] *= 0.5
            shape = [1] * len(other)
            shape[j] = n
            w = w * w1.reshape(shape)
        return w

    def integral(self) -> float:
        """Surface integral over the whole boundary."""
        total = 0.0
        for key, vals in self.faces.items():
            total += float(np.sum(self.face_weights(key) * vals))
        return total

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.faces.values())
