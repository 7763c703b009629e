"""Measurements on the particle population.

The material is compared with reference curves through a curve extracted
from the occupancy pattern: per-column mean heights for 1D data, and an
ordered thinning skeleton for 2D shapes.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from skimage.morphology import medial_axis, remove_small_holes

METRIC_COLUMNS = ("step", "particle_count", "deviation_distance", "curve_rmse", "component_count")

EIGHT = np.ones((3, 3), dtype=bool)
SMALL_HOLE = 64


@dataclass(frozen=True)
class Snapshot:
    """Immutable copy of the population at one scheduler step."""

    step: int
    positions: np.ndarray
    width: int
    height: int

    @classmethod
    def of(cls, world) -> Snapshot:
        return cls(world.clock, world.positions.copy(), world.width, world.height)

    @property
    def n(self) -> int:
        return len(self.positions)

    def cells(self) -> np.ndarray:
        return np.floor(self.positions + 0.5).astype(np.int64)

    def mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        c = self.cells()
        m[c[:, 1], c[:, 0]] = True
        return m


def _snap(world_or_snapshot) -> Snapshot:
    return world_or_snapshot if isinstance(world_or_snapshot, Snapshot) else Snapshot.of(world_or_snapshot)


@dataclass(frozen=True)
class MaterialCurve:
    samples: np.ndarray
    extraction_mode: str


def extract_curve(world, mode: str = "column_mean", start: Optional[Sequence[float]] = None) -> MaterialCurve:
    snap = _snap(world)
    if snap.n == 0:
        raise ValueError("cannot extract a curve from an empty population")
    if mode == "column_mean":
        cx = snap.cells()[:, 0]
        cols, inverse = np.unique(cx, return_inverse=True)
        ysum = np.bincount(inverse, weights=snap.positions[:, 1])
        counts = np.bincount(inverse)
        return MaterialCurve(np.column_stack((cols.astype(float), ysum / counts)), mode)
    if mode == "skeleton":
        return MaterialCurve(_skeleton_path(snap.mask(), start), mode)
    raise ValueError(f"unknown extraction mode {mode!r}")


def _skeleton_path(mask: np.ndarray, start) -> np.ndarray:
    # bridge the pinholes of a loosely packed band before thinning
    solid = ndimage.binary_closing(np.pad(mask, 3), structure=EIGHT, iterations=2)[3:-3, 3:-3] | mask
    # pinholes are filled but the interior of a closed loop is not
    solid = remove_small_holes(solid, area_threshold=SMALL_HOLE)
    # fixed tie-breaking keeps extraction reproducible
    skel = medial_axis(solid, rng=0)
    labels, k = ndimage.label(skel, structure=EIGHT)
    if k == 0:
        ys, xs = np.nonzero(mask)
        return np.column_stack((xs, ys)).astype(float)[:1]
    sizes = np.bincount(labels.ravel())[1:]
    skel = labels == (np.argmax(sizes) + 1)
    ys, xs = np.nonzero(skel)
    index = {(x, y): i for i, (x, y) in enumerate(zip(xs.tolist(), ys.tolist()))}
    pts = list(index)

    def bfs(src):
        dist = {src: 0}
        parent = {src: None}
        q = deque([src])
        last = src
        while q:
            p = q.popleft()
            last = p
            x, y = p
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    nb = (x + dx, y + dy)
                    if nb in index and nb not in dist:
                        dist[nb] = dist[p] + 1
                        parent[nb] = p
                        q.append(nb)
        return last, parent

    a, _ = bfs(pts[0])
    b, parent = bfs(a)
    path = []
    p = b
    while p is not None:
        path.append(p)
        p = parent[p]
    out = np.array(path, dtype=float)
    if start is not None:
        s = np.asarray(start, dtype=float)
        if np.hypot(*(out[-1] - s)) < np.hypot(*(out[0] - s)):
            out = out[::-1]
    return out


def point_to_polyline(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the nearest segment of ``polyline``."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    q = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if len(q) == 1:
        return np.hypot(*(p - q[0]).T)
    a = q[:-1]
    d = q[1:] - a
    len2 = (d * d).sum(axis=1)
    len2 = np.where(len2 == 0, 1.0, len2)
    best = np.full(len(p), np.inf)
    # chunk over points to bound memory on long curves
    for s in range(0, len(p), 2048):
        pp = p[s : s + 2048, None, :]
        t = np.clip(((pp - a) * d).sum(axis=2) / len2, 0.0, 1.0)
        proj = a + t[..., None] * d
        best[s : s + 2048] = np.sqrt(((pp - proj) ** 2).sum(axis=2)).min(axis=1)
    return best


def curve_rmse(a, b) -> float:
    """RMS of distances from the samples of ``a`` to the polyline through ``b`` (asymmetric)."""
    pa = a.samples if isinstance(a, MaterialCurve) else np.asarray(a, dtype=float)
    pb = b.samples if isinstance(b, MaterialCurve) else np.asarray(b, dtype=float)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("curve_rmse needs two nonempty curves")
    d = point_to_polyline(pa, pb)
    return float(np.sqrt(np.mean(d * d)))


def deviation_distance(world, baseline: Sequence[Sequence[float]]) -> float:
    """Largest perpendicular distance of any particle from the line through the two baseline points."""
    snap = _snap(world)
    if snap.n == 0:
        return 0.0
    (ax, ay), (bx, by) = np.asarray(baseline, dtype=float)
    dx, dy = bx - ax, by - ay
    norm = np.hypot(dx, dy)
    if norm == 0:
        raise ValueError("degenerate baseline")
    p = snap.positions
    return float(np.max(np.abs(dx * (p[:, 1] - ay) - dy * (p[:, 0] - ax)) / norm))


def component_count(world, gap: int = 2, min_size: int = 10) -> int:
    """Connected pieces of material.

    Occupied cells up to ``gap`` empty cells apart belong to the same piece
    (``gap=0`` is plain 8-connectivity). Pieces with fewer than ``min_size``
    particles are ignored. The defaults bridge the pinholes of a sparse band
    and drop stray particles that wander off it.
    """
    mask = world if isinstance(world, np.ndarray) else _snap(world).mask()
    grown = ndimage.binary_dilation(mask, structure=np.ones((2 * gap + 1,) * 2, bool)) if gap > 0 else mask
    labels, k = ndimage.label(grown, structure=EIGHT)
    if min_size <= 1:
        return int(k)
    sizes = np.bincount(labels[mask], minlength=k + 1)[1:]
    return int(np.count_nonzero(sizes >= min_size))


def amplitude(curve: MaterialCurve) -> float:
    if len(curve.samples) == 0:
        raise ValueError("amplitude of an empty curve")
    y = curve.samples[:, 1]
    return float((y.max() - y.min()) / 2.0)


def material_span(world) -> int:
    """Number of lattice columns holding at least one particle."""
    snap = _snap(world)
    return int(len(np.unique(snap.cells()[:, 0]))) if snap.n else 0


def nearest_particle_distance(world, points) -> np.ndarray:
    snap = _snap(world)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if snap.n == 0:
        return np.full(len(pts), np.inf)
    from scipy.spatial import cKDTree

    d, _ = cKDTree(snap.positions).query(pts)
    return d


@dataclass
class MetricsLog:
    records: list[tuple] = field(default_factory=list)

    def append(self, step: int, particle_count: int, deviation: float, rmse: float, components: int) -> None:
        if self.records and step <= self.records[-1][0]:
            raise ValueError("metric steps must be strictly increasing")
        self.records.append((int(step), int(particle_count), float(deviation), float(rmse), int(components)))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[METRIC_COLUMNS.index(name)] for r in self.records])

    def to_csv(self, path: str | Path) -> None:
        from slimecurve.io import write_csv

        write_csv(path, METRIC_COLUMNS, self.records)

    @classmethod
    def from_csv(cls, path: str | Path) -> MetricsLog:
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != METRIC_COLUMNS:
                raise ValueError(f"{path}: unexpected metrics header {header}")
            for row in reader:
                log.append(int(row[0]), int(row[1]), float(row[2]), float(row[3]), int(row[4]))
        return log
