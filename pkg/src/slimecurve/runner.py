"""Drive a scenario through the scheduler and collect snapshots and metrics."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from slimecurve.analysis import (
    MetricsLog,
    Snapshot,
    component_count,
    curve_rmse,
    deviation_distance,
    extract_curve,
)
from slimecurve.scenario import Scenario


def simulate(
    scenario: Scenario,
    seed: Optional[int] = None,
    steps: Optional[int] = None,
    snapshot_every: Optional[int] = None,
    on_snapshot: Optional[Callable] = None,
) -> list[Snapshot]:
    """Run ``steps`` scheduler steps, snapshotting at step 0 and every ``snapshot_every`` steps."""
    steps = scenario.run_steps if steps is None else steps
    every = scenario.snapshot_every if snapshot_every is None else snapshot_every
    if every < 1:
        raise ValueError("snapshot_every must be >= 1")
    world = scenario.build_world(seed)
    snaps = [Snapshot.of(world)]
    if on_snapshot:
        on_snapshot(world)
    for _ in range(steps):
        world.step()
        if world.clock % every == 0:
            snaps.append(Snapshot.of(world))
            if on_snapshot:
                on_snapshot(world)
    return snaps


def baseline(scenario: Scenario) -> np.ndarray:
    """Segment the deviation distance is measured from: the two clamp points, else the data ends."""
    if len(scenario.clamp_points) == 2:
        return scenario.clamp_points
    return scenario.data_points[[0, -1]]


def extraction_mode(scenario: Scenario) -> str:
    return "column_mean" if scenario.series is not None else "skeleton"


def material_curve(scenario: Scenario, snap: Snapshot):
    return extract_curve(snap, extraction_mode(scenario), start=scenario.data_points[0])


def metrics(scenario: Scenario, snaps: list[Snapshot], reference: Optional[np.ndarray] = None) -> MetricsLog:
    """Per-snapshot metrics; ``curve_rmse`` is measured against ``reference`` (default: the data polyline)."""
    ref = scenario.data_line if reference is None else reference
    base = baseline(scenario)
    log = MetricsLog()
    for s in snaps:
        if s.n == 0:
            log.append(s.step, 0, 0.0, float("nan"), 0)
            continue
        log.append(
            s.step, s.n, deviation_distance(s, base), curve_rmse(material_curve(scenario, s), ref),
            component_count(s),
        )
    return log
