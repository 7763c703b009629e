"""Command-line entry point: ``slimecurve run | oracle | compare``.

Errors are reported as a single JSON line on stderr and a nonzero exit code
(2 for bad input, 1 for anything else).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from slimecurve import __version__, oracle
from slimecurve.analysis import Snapshot, curve_rmse, deviation_distance
from slimecurve.io import field_frame, read_csv_rows, read_numeric_csv, write_csv, write_pgm
from slimecurve.runner import baseline, material_curve, metrics, simulate
from slimecurve.scenario import ScenarioError, scenario_from_dict

MANIFEST_KIND = "slimecurve-run"
PARAM_FLAGS = ("sa", "ra", "so", "deposit", "decay", "kernel_radius", "test_period")


class CliError(Exception):
    def __init__(self, message: str, where: str = "", code: int = 2):
        super().__init__(message)
        self.where = where
        self.code = code


# -- run -------------------------------------------------------------------------------


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None


def run_scenario(
    source: str | Path,
    out: str | Path,
    seed: Optional[int] = None,
    steps: Optional[int] = None,
    snapshot_every: Optional[int] = None,
    params: Optional[dict] = None,
    frames: bool = True,
) -> dict:
    """Run a scenario (or replay a manifest) into ``out`` and return the manifest written there."""
    source = Path(source)
    doc = _read_json(source)
    if doc.get("kind") == MANIFEST_KIND:
        # a manifest pins everything; explicit arguments still win
        scenario_path = Path(doc["scenario"])
        scenario_doc = doc["scenario_doc"]
        seed = doc["seed"] if seed is None else seed
        steps = doc["steps"] if steps is None else steps
        snapshot_every = doc["snapshot_every"] if snapshot_every is None else snapshot_every
        params = {**doc.get("overrides", {}), **(params or {})}
    else:
        scenario_path = source.resolve()
        scenario_doc = doc
    params = {k: v for k, v in (params or {}).items() if v is not None}
    scenario = scenario_from_dict(scenario_doc, base_dir=scenario_path.parent, **params)
    seed = scenario.seed if seed is None else int(seed)
    steps = scenario.run_steps if steps is None else int(steps)
    every = scenario.snapshot_every if snapshot_every is None else int(snapshot_every)
    if steps < 0:
        raise CliError("steps must be >= 0", "steps")

    out = Path(out)
    (out / "rosters").mkdir(parents=True, exist_ok=True)
    if frames:
        (out / "frames").mkdir(exist_ok=True)
    artifacts: list[str] = []

    def emit(world):
        tag = f"{world.clock:07d}"
        if frames:
            img, _ = field_frame(world.field.values, world.occupancy.mask())
            write_pgm(out / "frames" / f"frame_{tag}.pgm", img)
            artifacts.append(f"frames/frame_{tag}.pgm")
        r = world.roster()
        write_csv(out / "rosters" / f"roster_{tag}.csv", ("id", "x", "y", "heading"),
                  zip(r["id"], r["x"], r["y"], r["heading"]))
        artifacts.append(f"rosters/roster_{tag}.csv")

    snaps = simulate(scenario, seed=seed, steps=steps, snapshot_every=every, on_snapshot=emit)
    metrics(scenario, snaps).to_csv(out / "metrics.csv")
    artifacts.append("metrics.csv")
    write_csv(out / "data_line.csv", ("x", "y"), scenario.data_line)
    artifacts.append("data_line.csv")

    manifest = {
        "kind": MANIFEST_KIND,
        "version": __version__,
        "name": scenario.name,
        "scenario": str(scenario_path),
        "scenario_doc": scenario_doc,
        "seed": seed,
        "steps": steps,
        "snapshot_every": every,
        "overrides": params,
        "lattice": [scenario.width, scenario.height],
        "parameters": {
            "sensory": asdict(scenario.sensory),
            "adaptation": asdict(scenario.adaptation),
            "diffusion": asdict(scenario.diffusion),
            "warmup_halt": scenario.warmup_halt,
        },
        "artifacts": artifacts,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _run_job(job: tuple) -> str:
    source, out, kw = job
    run_scenario(source, out, **kw)
    return str(out)


def cmd_run(args) -> int:
    params = {k: getattr(args, k) for k in PARAM_FLAGS}
    kw = dict(seed=args.seed, steps=args.steps, snapshot_every=args.snapshot_every, params=params,
              frames=not args.no_frames)
    out = Path(args.out)
    if len(args.scenario) == 1:
        jobs = [(args.scenario[0], out, kw)]
    else:
        jobs = [(s, out / Path(s).stem, kw) for s in args.scenario]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for done in pool.map(_run_job, jobs):
                print(done)
    else:
        for job in jobs:
            print(_run_job(job))
    return 0


# -- oracle ----------------------------------------------------------------------------


def _emit_csv(path: Optional[str], header, rows) -> None:
    write_csv(path if path else sys.stdout, header, rows)


def _series(path: str) -> np.ndarray:
    return read_numeric_csv(path)[:, -1]


def cmd_oracle(args) -> int:
    if args.kind == "movavg":
        y = _series(args.input)
        smooth = oracle.moving_average(y, args.window)
        first = args.window // 2
        _emit_csv(args.output, ("index", "value"), zip(range(first, first + len(smooth)), smooth))
    elif args.kind == "lowpass":
        y = _series(args.input)
        smooth = oracle.lowpass(y, args.alpha, args.iterations)
        _emit_csv(args.output, ("index", "value"), enumerate(smooth))
    elif args.kind == "bspline":
        pts = read_numeric_csv(args.input, ncols=2)
        if args.closed:
            spec = oracle.close_spline(pts, args.clamped, args.degree, start=args.start)
        else:
            spec = oracle.SplineSpec(pts, args.degree, clamped=args.clamped)
        _emit_csv(args.output, ("x", "y"), oracle.bspline_sample(spec, args.samples))
    elif args.kind == "hull":
        pts = read_numeric_csv(args.input, ncols=2)
        _emit_csv(args.output, ("x", "y"), oracle.convex_hull(pts))
    return 0


# -- compare ---------------------------------------------------------------------------


def load_run(rundir: str | Path):
    """Manifest, scenario and snapshots of a finished run directory."""
    rundir = Path(rundir)
    mpath = rundir / "manifest.json"
    if not mpath.exists():
        raise CliError(f"no manifest.json in {rundir}", str(rundir))
    manifest = json.loads(mpath.read_text())
    scenario = scenario_from_dict(manifest["scenario_doc"], base_dir=Path(manifest["scenario"]).parent,
                                  **manifest.get("overrides", {}))
    snaps = []
    for rel in manifest["artifacts"]:
        if not rel.startswith("rosters/"):
            continue
        header, rows = read_csv_rows(rundir / rel)
        step = int(Path(rel).stem.split("_")[1])
        pos = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
        snaps.append(Snapshot(step, pos, scenario.width, scenario.height))
    if not snaps:
        raise CliError(f"run directory {rundir} holds no snapshots", str(rundir))
    return manifest, scenario, snaps


def compare_run(run, oracles: dict[str, np.ndarray]):
    """Per-snapshot RMSE of the material curve against each oracle curve, plus deviation distance.

    ``run`` is a run directory or the tuple returned by :func:`load_run`. Returns
    (header, rows, best) where ``best`` maps oracle name to the step with least RMSE.
    """
    _, scenario, snaps = load_run(run) if isinstance(run, (str, Path)) else run
    for name, curve in oracles.items():
        if (curve[:, 0].min() < -0.5 or curve[:, 1].min() < -0.5
                or curve[:, 0].max() > scenario.width - 0.5 or curve[:, 1].max() > scenario.height - 0.5):
            raise CliError(f"oracle curve {name!r} lies outside the {scenario.width}x{scenario.height} lattice",
                           name)
    base = baseline(scenario)
    header = ["step", "deviation_distance"] + [f"rmse_{n}" for n in oracles]
    rows = []
    for s in snaps:
        if s.n == 0:
            rows.append([s.step, 0.0] + [float("nan")] * len(oracles))
            continue
        curve = material_curve(scenario, s)
        rows.append([s.step, deviation_distance(s, base)] + [curve_rmse(curve, c) for c in oracles.values()])
    table = np.array([r[2:] for r in rows], dtype=float).reshape(len(rows), -1)
    best = {}
    for j, name in enumerate(oracles):
        col = np.where(np.isnan(table[:, j]), np.inf, table[:, j])
        best[name] = rows[int(np.argmin(col))][0]
    return header, rows, best


def cmd_compare(args) -> int:
    run = load_run(args.rundir)
    oracles: dict[str, np.ndarray] = {}
    for path in args.oracle:
        oracles[Path(path).stem] = read_numeric_csv(path, ncols=2)
    if args.bspline_degrees:
        scenario = run[1]
        for d in args.bspline_degrees:
            spec = oracle.SplineSpec(scenario.data_points, d, clamped=args.clamped)
            oracles[f"bspline{d}"] = oracle.bspline_sample(spec)
    if not oracles:
        raise CliError("give at least one oracle curve or --bspline-degrees", "oracle")
    header, rows, best = compare_run(run, oracles)
    out = Path(args.output) if args.output else Path(args.rundir) / "compare.csv"
    write_csv(out, header, rows)
    for name, step in best.items():
        print(f"best,{name},{step}")
    return 0


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slimecurve", description="Particle-material curve relaxation runs.")
    p.add_argument("--version", action="version", version=f"slimecurve {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run scenario files (or replay a manifest)")
    r.add_argument("scenario", nargs="+", help="scenario JSON or manifest.json")
    r.add_argument("--out", required=True, help="output directory (one subdirectory per scenario when several)")
    r.add_argument("--seed", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--snapshot-every", type=int)
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.add_argument("--no-frames", action="store_true", help="skip PGM frames")
    r.add_argument("--sa", type=float, help="sensor angle (degrees)")
    r.add_argument("--ra", type=float, help="rotation angle (degrees)")
    r.add_argument("--so", type=float, help="sensor offset (cells)")
    r.add_argument("--deposit", type=float)
    r.add_argument("--decay", type=float)
    r.add_argument("--kernel-radius", type=int)
    r.add_argument("--test-period", type=int)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="reference computations on CSV input")
    osub = o.add_subparsers(dest="kind", required=True)
    m = osub.add_parser("movavg")
    m.add_argument("--window", type=int, required=True)
    lp = osub.add_parser("lowpass")
    lp.add_argument("--alpha", type=float, default=0.5)
    lp.add_argument("--iterations", type=int, default=1)
    b = osub.add_parser("bspline")
    b.add_argument("--degree", type=int, default=3)
    b.add_argument("--clamped", action="store_true")
    b.add_argument("--closed", action="store_true")
    b.add_argument("--start", type=int, default=0, help="rotation of a closed cycle")
    b.add_argument("--samples", type=int, default=512)
    h = osub.add_parser("hull")
    for q in (m, lp, b, h):
        q.add_argument("input")
        q.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("compare", help="score a run's snapshots against oracle curves")
    c.add_argument("rundir")
    c.add_argument("oracle", nargs="*", help="curve CSVs with x,y columns")
    c.add_argument("--bspline-degrees", type=int, nargs="+", help="B-splines through the scenario's data points")
    c.add_argument("--clamped", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_compare)
    return p


def _fail(kind: str, message: str, where: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "where": where, "message": message}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        return _fail("CliError", str(exc), exc.where, exc.code)
    except ScenarioError as exc:
        return _fail("ScenarioError", str(exc), exc.where, 2)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), "", 2)
    except Exception as exc:  # noqa: BLE001 - last-resort one-line report
        return _fail(type(exc).__name__, str(exc), "", 1)


if __name__ == "__main__":
    sys.exit(main())
