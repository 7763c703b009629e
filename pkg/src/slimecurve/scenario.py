"""Data ingestion, material initialisation and stimulus scheduling.

A scenario turns a 1D series or a 2D polyline into lattice patterns: the
rasterised data line that attracts the material during the warm-up halt,
the band of particles laid along it, and the clamp points that keep
pulling after the data stimulus is removed or weakened.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import ndimage

from slimecurve.agents import AdaptationParams, SensoryParams, World
from slimecurve.io import read_numeric_csv, read_pgm
from slimecurve.lattice import DiffusionParams

STRONG = 2.55
WEAK = 0.255
FOREVER = 2**62


class ScenarioError(ValueError):
    """Invalid scenario content; ``where`` names the offending field."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


# -- data types ----------------------------------------------------------------


@dataclass(frozen=True)
class Series1D:
    values: tuple[float, ...]
    x_scale: float = 1.0
    y_origin: float = 0.0
    y_scale: float = 1.0
    x_origin: float = 0.0

    def __post_init__(self):
        if len(self.values) < 2:
            raise ScenarioError("a series needs at least 2 samples", "values")
        if not all(math.isfinite(v) for v in self.values):
            raise ScenarioError("series values must be finite", "values")

    def to_lattice(self, values: Sequence[float], offset: int = 0) -> np.ndarray:
        """Map sample values (starting at sample index ``offset``) to lattice points."""
        i = np.arange(offset, offset + len(values))
        return np.column_stack(
            (self.x_origin + i * self.x_scale, self.y_origin - np.asarray(values, dtype=float) * self.y_scale)
        )


@dataclass(frozen=True)
class Polyline2D:
    points: tuple[tuple[float, float], ...]
    closed: bool = False

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ScenarioError("a polyline needs at least 2 points", "points")
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ScenarioError(f"repeated consecutive point {a}", "points")
        if self.closed and pts[0] == pts[-1]:
            raise ScenarioError("closed polylines must not repeat the first point", "points")

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def segments(self):
        pts = self.points + (self.points[:1] if self.closed else ())
        return list(zip(pts, pts[1:]))


@dataclass(frozen=True)
class Stimulus:
    """Attractant source projected every step inside ``[active_from, active_until)``."""

    cells: np.ndarray  # (k, 2) integer x, y
    magnitude: float
    kind: str = "polyline_mask"
    active_from: int = 0
    active_until: int = FOREVER

    def __post_init__(self):
        if self.kind not in ("polyline_mask", "point_set"):
            raise ScenarioError(f"unknown stimulus kind {self.kind!r}", "stimuli.kind")
        if not self.magnitude > 0:
            raise ScenarioError("stimulus magnitude must be > 0", "stimuli.magnitude")
        if self.active_until < self.active_from:
            raise ScenarioError("stimulus window ends before it starts", "stimuli")

    def active(self, step: int) -> bool:
        return self.active_from <= step < self.active_until


@dataclass
class Scenario:
    width: int
    height: int
    initial_mask: np.ndarray  # bool [y, x], cells where material is laid
    stimuli: list[Stimulus]
    clamp_points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    data_points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    data_line: Optional[np.ndarray] = None  # (k, 2) polyline vertices in lattice units
    series: Optional[Series1D] = None
    habitat: Optional[np.ndarray] = None
    material_width: int = 5
    warmup_halt: int = 20
    run_steps: int = 5000
    snapshot_every: int = 100
    seed: int = 0
    name: str = "scenario"
    sensory: SensoryParams = SensoryParams()
    adaptation: AdaptationParams = AdaptationParams()
    diffusion: DiffusionParams = DiffusionParams()

    def __post_init__(self):
        if not self.initial_mask.any():
            raise ScenarioError("initial material mask is empty", "initial_mask")
        for x, y in self.clamp_points:
            ix, iy = int(round(x)), int(round(y))
            if not (0 <= ix < self.width and 0 <= iy < self.height) or not self.initial_mask[iy, ix]:
                raise ScenarioError(f"clamp point ({x}, {y}) does not lie on the initial material", "clamp")

    def schedule(self, step: int):
        return schedule_stimuli(self, step)

    def build_world(self, seed: Optional[int] = None) -> World:
        world = World(
            self.width, self.height,
            sensory=self.sensory, adaptation=self.adaptation, diffusion=self.diffusion,
            seed=self.seed if seed is None else seed,
            warmup_halt=self.warmup_halt,
            stimuli=self.schedule,
            habitat=self.habitat,
        )
        ys, xs = np.nonzero(self.initial_mask)
        world.populate(zip(xs.tolist(), ys.tolist()))
        return world


# -- geometry / masks ------------------------------------------------------------


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """8-connected integer line from (x0, y0) to (x1, y1) inclusive."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize(polyline: Polyline2D, width: int, height: int) -> np.ndarray:
    """Boolean [y, x] mask of the 8-connected digital polyline."""
    mask = np.zeros((height, width), dtype=bool)
    for (ax, ay), (bx, by) in polyline.segments():
        a = (int(round(ax)), int(round(ay)))
        b = (int(round(bx)), int(round(by)))
        for x, y in (a, b):
            if not (0 <= x < width and 0 <= y < height):
                raise ScenarioError(f"point ({x}, {y}) outside {width}x{height} lattice", "points")
        for x, y in bresenham(*a, *b):
            mask[y, x] = True
    return mask


def disc(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return xx * xx + yy * yy <= r * r


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilation by a discrete disc; raises if the result would touch the lattice edge."""
    if radius == 0:
        return mask.copy()
    out = ndimage.binary_dilation(mask, structure=disc(radius))
    # anything clipped by the lattice edge is detected by comparing against a padded dilation
    padded = ndimage.binary_dilation(np.pad(mask, radius), structure=disc(radius))
    if padded.sum() != out.sum():
        raise ScenarioError(f"dilation by {radius} px exceeds the lattice", "material_width")
    return out


def dilate_pipe(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        raise ScenarioError(f"pipe radius must be >= 1, got {radius}", "pipe_radius")
    return dilate(mask, radius)


def init_material(mask: np.ndarray, width: int) -> np.ndarray:
    """Cells to fill with particles: the mask thickened to a band ``width`` px across."""
    if not mask.any():
        raise ScenarioError("empty material mask", "initial_mask")
    if width < 1:
        raise ScenarioError("material width must be >= 1", "material_width")
    return dilate(mask, width // 2)


def series_to_polyline(series: Series1D, width: Optional[int] = None, height: Optional[int] = None) -> Polyline2D:
    pts = series.to_lattice(series.values)
    if width is not None and height is not None:
        if pts[:, 0].min() < 0 or pts[:, 1].min() < 0 or pts[:, 0].max() > width - 1 or pts[:, 1].max() > height - 1:
            raise ScenarioError("series does not fit the lattice with the given scales", "series")
    return Polyline2D(tuple(map(tuple, pts)), closed=False)


def rectilinear_preprocess(polyline: Polyline2D) -> Polyline2D:
    """Replace each segment by a horizontal-vertical-horizontal step at its x-midpoint.

    The path passes through every original vertex; collinear runs are merged.
    """
    pts = polyline.array()
    if polyline.closed:
        raise ScenarioError("rectilinear pre-processing needs an open x-monotone polyline", "preprocess")
    dx = np.diff(pts[:, 0])
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise ScenarioError("rectilinear pre-processing needs strictly x-monotone points", "preprocess")
    out = [tuple(pts[0])]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 != y1:
            xm = (x0 + x1) / 2.0
            out += [(xm, y0), (xm, y1)]
        out.append((x1, y1))
    return Polyline2D(tuple(_drop_collinear(out)), closed=False)


def _drop_collinear(points):
    keep = [points[0]]
    for i in range(1, len(points) - 1):
        (ax, ay), (bx, by), (cx, cy) = keep[-1], points[i], points[i + 1]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) != 0:
            keep.append(points[i])
    keep.append(points[-1])
    return keep


def point_cells(points: np.ndarray, radius: int, width: int, height: int) -> np.ndarray:
    """Integer cells covered by discs of ``radius`` around each point (radius 0 = the point's cell)."""
    cells = set()
    offsets = np.argwhere(disc(radius)) - radius
    for x, y in np.asarray(points).reshape(-1, 2):
        cx, cy = int(round(x)), int(round(y))
        for oy, ox in offsets:
            px, py = cx + ox, cy + oy
            if not (0 <= px < width and 0 <= py < height):
                raise ScenarioError(f"point ({x}, {y}) outside lattice", "clamp")
            cells.add((px, py))
    return np.array(sorted(cells), dtype=np.int64).reshape(-1, 2)


def mask_cells(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    return np.column_stack((xs, ys)).astype(np.int64)


# -- scheduling -------------------------------------------------------------------


def schedule_stimuli(scenario: Scenario, step: int):
    """Projection arrays (xs, ys, magnitudes) for every stimulus active at ``step``."""
    active = [s for s in scenario.stimuli if s.active(step)]
    if not active:
        e = np.empty(0, dtype=np.int64)
        return e, e, np.empty(0)
    xs = np.concatenate([s.cells[:, 0] for s in active])
    ys = np.concatenate([s.cells[:, 1] for s in active])
    mags = np.concatenate([np.full(len(s.cells), s.magnitude) for s in active])
    return xs, ys, mags


# -- signals for 1D scenarios --------------------------------------------------------


def make_signal(spec: dict[str, Any]) -> np.ndarray:
    """Synthetic test signals: ``sine``, ``square`` or ``sine_composite``."""
    kind = spec.get("kind")
    n = int(spec.get("n", 0))
    if n < 2:
        raise ScenarioError("signal needs n >= 2 samples", "signal.n")
    t = np.arange(n, dtype=float)
    if kind == "sine":
        return spec.get("amplitude", 1.0) * np.sin(2 * np.pi * t / spec["period"] + spec.get("phase", 0.0))
    if kind == "square":
        s = np.sin(2 * np.pi * t / spec["period"] + spec.get("phase", 0.0) + 1e-9)
        return spec.get("amplitude", 1.0) * np.where(s >= 0, 1.0, -1.0)
    if kind == "sine_composite":
        out = np.zeros(n)
        for comp in spec["components"]:
            out += comp["amplitude"] * np.sin(2 * np.pi * t / comp["period"] + comp.get("phase", 0.0))
        return out
    raise ScenarioError(f"unknown signal kind {kind!r}", "signal.kind")


# -- loading ---------------------------------------------------------------------------


def read_points_csv(path: str | Path) -> np.ndarray:
    """Control points as two numeric columns (x, y); a header row is allowed."""
    try:
        return read_numeric_csv(path, ncols=2)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def read_series_csv(path: str | Path) -> np.ndarray:
    """One sample per row; with several columns the last one is the value."""
    try:
        return read_numeric_csv(path)[:, -1]
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def read_pgm_mask(path: str | Path) -> np.ndarray:
    return read_pgm(path) > 0


_PARAM_KEYS = {
    "sa": ("sensory", "sa"), "ra": ("sensory", "ra"), "so": ("sensory", "so"), "deposit": ("sensory", "deposit"),
    "decay": ("diffusion", "decay"), "kernel_radius": ("diffusion", "kernel_radius"),
    "test_period": ("adaptation", "test_period"),
}


def params_from(overrides: dict[str, Any]) -> tuple[SensoryParams, AdaptationParams, DiffusionParams]:
    groups: dict[str, dict[str, Any]] = {"sensory": {}, "adaptation": {}, "diffusion": {}}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("division_range", "survival_range"):
            groups["adaptation"][key] = tuple(value)
        elif key in ("division_window", "survival_window"):
            groups["adaptation"][key] = int(value)
        elif key in _PARAM_KEYS:
            group, name = _PARAM_KEYS[key]
            groups[group][name] = value
        else:
            raise ScenarioError(f"unknown parameter {key!r}", "params")
    try:
        return (SensoryParams(**groups["sensory"]), AdaptationParams(**groups["adaptation"]),
                DiffusionParams(**groups["diffusion"]))
    except ValueError as exc:
        raise ScenarioError(str(exc), "params") from None


def load_scenario(path: str | Path, **overrides) -> Scenario:
    """Load a JSON scenario file. ``overrides`` replace top-level keys and ``params`` entries."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    return scenario_from_dict(doc, base_dir=path.parent, **overrides)


def scenario_from_dict(doc: dict[str, Any], base_dir: Path | None = None, **overrides) -> Scenario:
    doc = dict(doc)
    params = dict(doc.get("params", {}))
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("seed", "run_steps", "snapshot_every", "warmup_halt"):
            doc[key] = value
        else:
            params[key] = value
    base_dir = Path(base_dir or ".")
    try:
        return _build(doc, params, base_dir)
    except KeyError as exc:
        raise ScenarioError(f"missing required field {exc.args[0]!r}", doc.get("name", "")) from None


def _build(doc: dict[str, Any], params: dict[str, Any], base_dir: Path) -> Scenario:
    width, height = (int(v) for v in doc.get("lattice", (400, 400)))
    sensory, adaptation, diffusion = params_from(params)
    data = doc["data"]
    series = None
    if data["type"] == "series":
        if "signal" in data:
            values = make_signal(data["signal"])
        elif "csv" in data:
            values = read_series_csv(base_dir / data["csv"])
        else:
            values = np.asarray(data["values"], dtype=float)
        series = Series1D(
            tuple(float(v) for v in values),
            x_scale=float(data.get("x_scale", 1.0)),
            y_origin=float(data.get("y_origin", height / 2)),
            y_scale=float(data.get("y_scale", 1.0)),
            x_origin=float(data.get("x_origin", 0.0)),
        )
        polyline = series_to_polyline(series, width, height)
        _check_margin(polyline.array(), width, height, sensory.so)
    elif data["type"] == "polyline":
        pts = read_points_csv(base_dir / data["csv"]) if "csv" in data else np.asarray(data["points"], dtype=float)
        polyline = Polyline2D(tuple(map(tuple, pts)), closed=bool(data.get("closed", False)))
    else:
        raise ScenarioError(f"unknown data type {data['type']!r}", "data.type")

    data_points = polyline.array()
    preprocess = doc.get("preprocess", "none")
    habitat = None
    if preprocess == "rectilinear":
        polyline = rectilinear_preprocess(polyline)
    elif preprocess not in ("none", "pipe"):
        raise ScenarioError(f"unknown preprocess {preprocess!r}", "preprocess")

    line_mask = rasterize(polyline, width, height)
    material_width = int(doc.get("material_width", 5))
    if preprocess == "pipe":
        # the pipe is both the initial material and the region it may occupy
        habitat = dilate_pipe(line_mask, int(doc.get("pipe_radius", 7)))
        material = habitat
    elif "mask_pgm" in doc:
        material = read_pgm_mask(base_dir / doc["mask_pgm"])
        if material.shape != (height, width):
            raise ScenarioError("mask size does not match lattice", "mask_pgm")
    else:
        material = init_material(line_mask, material_width)

    clamp_sel = doc.get("clamp", "none")
    if clamp_sel == "none":
        clamp_points = np.empty((0, 2))
    elif clamp_sel == "ends":
        clamp_points = data_points[[0, -1]]
    elif clamp_sel == "all":
        clamp_points = data_points.copy()
    elif isinstance(clamp_sel, list):
        try:
            clamp_points = data_points[np.asarray(clamp_sel, dtype=int)]
        except IndexError:
            raise ScenarioError("clamp index out of range", "clamp") from None
    else:
        raise ScenarioError(f"unknown clamp selection {clamp_sel!r}", "clamp")

    warmup = int(doc.get("warmup_halt", 20))
    protocol = doc.get("protocol", "remove")
    line_cells = mask_cells(line_mask)
    stimuli = []
    if protocol == "remove":
        stimuli.append(Stimulus(line_cells, STRONG, "polyline_mask", 0, warmup))
    elif protocol == "weak":
        stimuli.append(Stimulus(line_cells, STRONG, "polyline_mask", 0, warmup))
        stimuli.append(Stimulus(line_cells, WEAK, "polyline_mask", warmup, FOREVER))
    elif protocol != "none":
        raise ScenarioError(f"unknown protocol {protocol!r}", "protocol")
    if len(clamp_points):
        cr = int(doc.get("clamp_radius", 3))
        stimuli.append(Stimulus(point_cells(clamp_points, cr, width, height), STRONG, "point_set", 0, FOREVER))
    for i, extra in enumerate(doc.get("stimuli", [])):
        where = f"stimuli[{i}]"
        pts = np.asarray(extra["points"], dtype=float)
        cells = point_cells(pts, int(extra.get("radius", 0)), width, height)
        stimuli.append(Stimulus(cells, float(extra.get("magnitude", STRONG)), extra.get("kind", "point_set"),
                                int(extra.get("active_from", 0)), int(extra.get("active_until", FOREVER))))
        if not stimuli[-1].active_until > stimuli[-1].active_from and where:
            raise ScenarioError("empty active window", where)

    return Scenario(
        width=width, height=height, initial_mask=material, stimuli=stimuli,
        clamp_points=clamp_points, data_points=data_points, data_line=polyline.array(), series=series,
        habitat=habitat, material_width=material_width, warmup_halt=warmup,
        run_steps=int(doc.get("run_steps", 5000)), snapshot_every=int(doc.get("snapshot_every", 100)),
        seed=int(doc.get("seed", 0)), name=str(doc.get("name", "scenario")),
        sensory=sensory, adaptation=adaptation, diffusion=diffusion,
    )


def _check_margin(pts: np.ndarray, width: int, height: int, margin: float) -> None:
    if (pts[:, 0].min() < margin or pts[:, 1].min() < margin
            or pts[:, 0].max() > width - 1 - margin or pts[:, 1].max() > height - 1 - margin):
        raise ScenarioError(f"mapped series must keep a {margin:g} px margin inside the lattice", "data")


def with_overrides(scenario: Scenario, **kw) -> Scenario:
    return replace(scenario, **kw)
