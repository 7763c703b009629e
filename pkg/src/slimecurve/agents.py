"""The particle population and its scheduler.

Each particle has three forward sensors and moves one pixel per step along
its heading, depositing chemoattractant only when the move succeeds. Every
few steps particles are tested for division (sparse neighbourhood, recently
moved) and removal (saturated neighbourhood); removal opens holes that the
surrounding particles fill, which is what makes the collective shrink.

All per-particle state lives in flat numpy arrays indexed by slot so that
the hot loops can run under numba. Slots are compacted after every
adaptation pass; ``ids`` keeps a stable identifier per particle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from slimecurve._jit import njit
from slimecurve.lattice import (
    EMPTY,
    DiffusionParams,
    Field,
    OccupancyGrid,
    _diffuse_into,
    _project_into,
    _sample,
    _window_count,
)

log = logging.getLogger(__name__)

# (xs, ys, magnitudes) for one scheduler step
Projection = tuple[np.ndarray, np.ndarray, np.ndarray]
StimulusSchedule = Callable[[int], Projection]


@dataclass(frozen=True)
class SensoryParams:
    sa: float = 90.0
    ra: float = 45.0
    so: float = 5.0
    deposit: float = 5.0

    def __post_init__(self):
        if self.so < 1:
            raise ValueError(f"sensor offset must be >= 1 pixel, got {self.so}")
        if self.so < 3:
            log.warning("sensor offset %s < 3 px: particle coupling will be weak", self.so)
        if self.deposit < 0:
            raise ValueError("deposit must be nonnegative")


@dataclass(frozen=True)
class AdaptationParams:
    """Division/removal windows and inclusive count ranges.

    The division count includes the tested particle. The survival count
    also includes it, so with the default 5x5 window and range ``[0, 24]``
    a particle is removed only when its whole window is occupied.
    """

    division_window: int = 9
    division_range: tuple[int, int] = (1, 10)
    survival_window: int = 5
    survival_range: tuple[int, int] = (0, 24)
    test_period: int = 2

    def __post_init__(self):
        if self.test_period < 1:
            raise ValueError("test_period must be >= 1")
        for w in (self.division_window, self.survival_window):
            if w < 1 or w % 2 == 0:
                raise ValueError(f"adaptation windows must be odd and positive, got {w}")
        for lo, hi in (self.division_range, self.survival_range):
            if lo > hi:
                raise ValueError(f"empty count range [{lo}, {hi}]")


def _no_stimuli(step: int) -> Projection:
    empty = np.empty(0, dtype=np.int64)
    return empty, empty, np.empty(0)


class World:
    """Lattice, occupancy, particle roster, RNG and clock for one run."""

    def __init__(
        self,
        width: int,
        height: int,
        sensory: SensoryParams = SensoryParams(),
        adaptation: AdaptationParams = AdaptationParams(),
        diffusion: DiffusionParams = DiffusionParams(),
        seed: int = 0,
        warmup_halt: int = 0,
        stimuli: Optional[StimulusSchedule] = None,
        habitat: Optional[np.ndarray] = None,
    ):
        self.width = width
        self.height = height
        self.sensory = sensory
        self.adaptation = adaptation
        self.diffusion = diffusion
        self.warmup_halt = warmup_halt
        self.stimuli = stimuli or _no_stimuli
        self.rng = np.random.default_rng(seed)
        # cells particles may occupy; moves and spawns elsewhere are blocked like the lattice edge
        if habitat is None:
            habitat = np.ones((height, width), dtype=np.bool_)
        elif habitat.shape != (height, width):
            raise ValueError("habitat mask does not match the lattice")
        self.habitat = np.ascontiguousarray(habitat, dtype=np.bool_)

        self.field = Field.zeros(width, height)
        self.occupancy = OccupancyGrid(width, height)
        self._scratch = np.empty_like(self.field.values)
        self._next_field = np.empty_like(self.field.values)

        cap = width * height
        self.xs = np.zeros(cap)
        self.ys = np.zeros(cap)
        self.headings = np.zeros(cap)
        self.moved = np.zeros(cap, dtype=np.bool_)
        self.alive = np.zeros(cap, dtype=np.bool_)
        self.ids = np.zeros(cap, dtype=np.int64)
        self.n = 0
        self.next_id = 0
        self.clock = 0
        self.last_moves = 0

    # -- population -------------------------------------------------------

    def add_particle(self, x: int, y: int, heading: Optional[float] = None) -> bool:
        """Place a particle at cell (x, y) if it is free. Random heading by default."""
        if not self.occupancy.is_free(x, y) or not self.habitat[y, x]:
            return False
        i = self.n
        self.xs[i] = x
        self.ys[i] = y
        self.headings[i] = self.rng.random() * 360.0 if heading is None else heading % 360.0
        self.moved[i] = False
        self.alive[i] = True
        self.ids[i] = self.next_id
        self.occupancy.cells[y, x] = i
        self.n += 1
        self.next_id += 1
        return True

    def populate(self, cells: Iterable[tuple[int, int]]) -> int:
        return sum(self.add_particle(int(x), int(y)) for x, y in cells)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack((self.xs[: self.n], self.ys[: self.n]))

    def cells(self) -> np.ndarray:
        """Integer occupancy cell ``(x, y)`` of each particle."""
        return np.floor(self.positions + 0.5).astype(np.int64)

    def roster(self) -> np.ndarray:
        """Structured copy of (id, x, y, heading) ordered by id."""
        out = np.empty(self.n, dtype=[("id", "i8"), ("x", "f8"), ("y", "f8"), ("heading", "f8")])
        out["id"] = self.ids[: self.n]
        out["x"] = self.xs[: self.n]
        out["y"] = self.ys[: self.n]
        out["heading"] = self.headings[: self.n]
        return np.sort(out, order="id")

    def occupancy_consistent(self) -> bool:
        """Every particle owns its rounded cell and no cell references a missing slot."""
        return bool(_consistent(self.occupancy.cells, self.xs, self.ys, self.n))

    # -- scheduler stages -------------------------------------------------

    def project_stage(self) -> None:
        xs, ys, mags = self.stimuli(self.clock)
        if len(xs):
            _project_into(self.field.values, xs, ys, mags)

    def motor_stage(self) -> int:
        """Sense then move every particle in a fresh random order; returns successful moves."""
        if self.n == 0:
            self.last_moves = 0
            return 0
        order = self.rng.permutation(self.n)
        s = self.sensory
        self.last_moves = int(
            _motor(
                self.field.values, self.occupancy.cells, self.habitat, self.xs, self.ys, self.headings,
                self.moved, order, s.sa, s.ra, s.so, s.deposit, self.rng,
            )
        )
        return self.last_moves

    def adapt_stage(self) -> None:
        if self.n == 0:
            return
        a = self.adaptation
        order = self.rng.permutation(self.n)
        self.n, self.next_id = _adapt(
            self.occupancy.cells, self.habitat, self.xs, self.ys, self.headings, self.moved, self.alive,
            self.ids, order, self.n, self.next_id,
            a.division_window // 2, a.division_range[0], a.division_range[1],
            a.survival_window // 2, a.survival_range[0], a.survival_range[1],
            self.rng,
        )

    def diffuse_stage(self) -> None:
        d = self.diffusion
        _diffuse_into(self.field.values, self._next_field, self._scratch, d.kernel_radius, 1.0 - d.decay)
        self.field.values, self._next_field = self._next_field, self.field.values

    @property
    def halted(self) -> bool:
        return self.clock < self.warmup_halt

    def step(self) -> None:
        """One scheduler step: project, sense/move, adapt (periodic), diffuse, tick."""
        self.project_stage()
        if not self.halted:
            self.motor_stage()
            if self.clock % self.adaptation.test_period == 0:
                self.adapt_stage()
        else:
            self.last_moves = 0
        self.diffuse_stage()
        self.clock += 1

    def run(self, steps: int) -> None:
        for _ in range(steps):
            self.step()


# -- kernels ------------------------------------------------------------------


@njit
def _wrap_degrees(h):
    h = h - 360.0 * math.floor(h / 360.0)
    if h >= 360.0:
        h = 0.0
    return h


@njit
def _sense_one(values, x, y, heading, sa, ra, so, rng):
    rad = math.pi / 180.0
    fl = _sample(values, x + so * math.cos((heading - sa) * rad), y + so * math.sin((heading - sa) * rad))
    f = _sample(values, x + so * math.cos(heading * rad), y + so * math.sin(heading * rad))
    fr = _sample(values, x + so * math.cos((heading + sa) * rad), y + so * math.sin((heading + sa) * rad))
    if f >= fl and f >= fr:
        return heading
    if fl > fr:
        return _wrap_degrees(heading - ra)
    if fr > fl:
        return _wrap_degrees(heading + ra)
    if rng.random() < 0.5:
        return _wrap_degrees(heading - ra)
    return _wrap_degrees(heading + ra)


@njit
def _motor(values, cells, habitat, xs, ys, headings, moved, order, sa, ra, so, deposit, rng):
    h, w = cells.shape
    moves = 0
    for k in range(order.shape[0]):
        i = order[k]
        heading = _sense_one(values, xs[i], ys[i], headings[i], sa, ra, so, rng)
        rad = heading * math.pi / 180.0
        nx = xs[i] + math.cos(rad)
        ny = ys[i] + math.sin(rad)
        cx = int(math.floor(xs[i] + 0.5))
        cy = int(math.floor(ys[i] + 0.5))
        tx = int(math.floor(nx + 0.5))
        ty = int(math.floor(ny + 0.5))
        ok = 0 <= tx < w and 0 <= ty < h and habitat[ty, tx] and (cells[ty, tx] == -1 or (tx == cx and ty == cy))
        if ok:
            cells[cy, cx] = -1
            cells[ty, tx] = i
            xs[i] = nx
            ys[i] = ny
            values[ty, tx] += deposit
            moved[i] = True
            moves += 1
        else:
            moved[i] = False
            heading = _wrap_degrees(rng.random() * 360.0)
        headings[i] = heading
    return moves


@njit
def _adapt(cells, habitat, xs, ys, headings, moved, alive, ids, order, n, next_id,
           div_half, div_lo, div_hi, surv_half, surv_lo, surv_hi, rng):
    h, w = cells.shape
    m = n
    free_x = np.empty(9, dtype=np.int64)
    free_y = np.empty(9, dtype=np.int64)
    for k in range(n):
        i = order[k]
        cx = int(math.floor(xs[i] + 0.5))
        cy = int(math.floor(ys[i] + 0.5))
        if moved[i]:
            c = _window_count(cells, cx, cy, div_half)
            if div_lo <= c <= div_hi:
                nfree = 0
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        xx = cx + dx
                        yy = cy + dy
                        if 0 <= xx < w and 0 <= yy < h and habitat[yy, xx] and cells[yy, xx] == -1:
                            free_x[nfree] = xx
                            free_y[nfree] = yy
                            nfree += 1
                if nfree > 0:
                    j = rng.integers(0, nfree)
                    xs[m] = free_x[j]
                    ys[m] = free_y[j]
                    headings[m] = _wrap_degrees(rng.random() * 360.0)
                    moved[m] = False
                    alive[m] = True
                    ids[m] = next_id
                    next_id += 1
                    cells[free_y[j], free_x[j]] = m
                    m += 1
        c = _window_count(cells, cx, cy, surv_half)
        if c < surv_lo or c > surv_hi:
            alive[i] = False
            cells[cy, cx] = -1
    j = 0
    for i in range(m):
        if alive[i]:
            if j != i:
                xs[j] = xs[i]
                ys[j] = ys[i]
                headings[j] = headings[i]
                moved[j] = moved[i]
                ids[j] = ids[i]
                alive[j] = True
                cells[int(math.floor(ys[j] + 0.5)), int(math.floor(xs[j] + 0.5))] = j
            j += 1
    for i in range(j, m):
        alive[i] = False
    return j, next_id


@njit
def _consistent(cells, xs, ys, n):
    h, w = cells.shape
    seen = 0
    for i in range(n):
        cx = int(math.floor(xs[i] + 0.5))
        cy = int(math.floor(ys[i] + 0.5))
        if cx < 0 or cy < 0 or cx >= w or cy >= h or cells[cy, cx] != i:
            return False
    for y in range(h):
        for x in range(w):
            s = cells[y, x]
            if s != -1:
                if s >= n:
                    return False
                seen += 1
    return seen == n
