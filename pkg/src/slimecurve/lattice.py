"""Chemoattractant lattice and particle occupancy grid.

Both grids are stored row-major as ``[y, x]`` numpy arrays. Cell ``(x, y)``
covers the continuous square ``[x - 0.5, x + 0.5) x [y - 0.5, y + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from slimecurve._jit import njit

EMPTY = -1


@dataclass(frozen=True)
class DiffusionParams:
    """Box-mean diffusion with multiplicative decay and absorbing edges."""

    kernel_radius: int = 1
    decay: float = 0.5
    boundary: str = "absorbing"

    def __post_init__(self):
        if self.kernel_radius < 1:
            raise ValueError(f"kernel_radius must be >= 1, got {self.kernel_radius}")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"decay must be in [0, 1), got {self.decay}")
        if self.boundary != "absorbing":
            raise ValueError(f"unsupported boundary {self.boundary!r}")


class Field:
    """Nonnegative scalar chemoattractant concentration on a fixed lattice."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("field values must be 2D")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("field values must be finite and nonnegative")
        self.values = values

    @classmethod
    def zeros(cls, width: int, height: int) -> Field:
        return cls(np.zeros((height, width)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def mass(self) -> float:
        return float(self.values.sum())

    def copy(self) -> Field:
        return Field(self.values.copy())

    def __getitem__(self, xy):
        x, y = xy
        return self.values[y, x]


class OccupancyGrid:
    """At most one particle slot per cell; ``EMPTY`` marks a vacant cell."""

    __slots__ = ("cells",)

    def __init__(self, width: int, height: int):
        self.cells = np.full((height, width), EMPTY, dtype=np.int64)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.cells[y, x] == EMPTY

    def mask(self) -> np.ndarray:
        return self.cells != EMPTY

    def count(self, x: int, y: int, half: int) -> int:
        """Number of occupied cells in the (2*half+1)^2 window centred on (x, y)."""
        return int(_window_count(self.cells, x, y, half))


def nearest_cell(x: float, y: float) -> tuple[int, int]:
    return math.floor(x + 0.5), math.floor(y + 0.5)


def diffuse(field: Field, params: DiffusionParams = DiffusionParams()) -> Field:
    """One diffusion pass: (2r+1)^2 box mean (zeros outside), then decay."""
    out = np.empty_like(field.values)
    scratch = np.empty_like(field.values)
    _diffuse_into(field.values, out, scratch, params.kernel_radius, 1.0 - params.decay)
    return Field(out)


def project(field: Field, sites: Iterable[tuple[int, int, float]]) -> Field:
    """Add ``magnitude`` at each ``(x, y)`` site; returns a new field."""
    values = field.values.copy()
    for x, y, magnitude in sites:
        if not (0 <= x < field.width and 0 <= y < field.height):
            raise ValueError(f"projection site ({x}, {y}) outside {field.width}x{field.height} lattice")
        if magnitude < 0:
            raise ValueError("negative stimuli are not supported")
        values[y, x] += magnitude
    return Field(values)


def sample(field: Field, x: float, y: float) -> float:
    """Value of the nearest cell; zero off the lattice."""
    return float(_sample(field.values, x, y))


@njit
def _sample(values, x, y):
    ix = int(math.floor(x + 0.5))
    iy = int(math.floor(y + 0.5))
    if ix < 0 or iy < 0 or iy >= values.shape[0] or ix >= values.shape[1]:
        return 0.0
    return values[iy, ix]


@njit
def _diffuse_into(src, dst, scratch, r, factor):
    h, w = src.shape
    norm = factor / ((2 * r + 1) * (2 * r + 1))
    # separable box sum: rows into scratch, then columns into dst
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dx in range(-r, r + 1):
                xx = x + dx
                if 0 <= xx < w:
                    acc += src[y, xx]
            scratch[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-r, r + 1):
                yy = y + dy
                if 0 <= yy < h:
                    acc += scratch[yy, x]
            dst[y, x] = acc * norm


@njit
def _window_count(cells, x, y, half):
    h, w = cells.shape
    n = 0
    for yy in range(max(0, y - half), min(h, y + half + 1)):
        for xx in range(max(0, x - half), min(w, x + half + 1)):
            if cells[yy, xx] != -1:
                n += 1
    return n


@njit
def _project_into(values, xs, ys, magnitudes):
    for i in range(xs.shape[0]):
        values[ys[i], xs[i]] += magnitudes[i]
