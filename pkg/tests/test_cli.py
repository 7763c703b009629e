import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from slimecurve.cli import main
from slimecurve.io import read_numeric_csv, read_pgm, write_csv

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "slimecurve" / "scenarios"
TRIANGLE = str(SCENARIOS / "triangle.json")


def test_run_zero_steps_writes_initial_frame_only(tmp_path):
    assert main(["run", TRIANGLE, "--out", str(tmp_path), "--steps", "0"]) == 0
    assert [p.name for p in (tmp_path / "frames").iterdir()] == ["frame_0000000.pgm"]
    img = read_pgm(tmp_path / "frames" / "frame_0000000.pgm")
    assert img.shape == (200, 200) and (img == 255).any()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["steps"] == 0 and manifest["seed"] == 1
    assert manifest["parameters"]["sensory"] == {"sa": 90.0, "ra": 45.0, "so": 5.0, "deposit": 5.0}
    assert all((tmp_path / a).exists() for a in manifest["artifacts"])


def test_run_triangle_frames_and_monotone_deviation(tmp_path):
    assert main(["run", TRIANGLE, "--out", str(tmp_path), "--steps", "600", "--snapshot-every", "200"]) == 0
    assert len(list((tmp_path / "frames").glob("*.pgm"))) == 4
    m = read_numeric_csv(tmp_path / "metrics.csv")
    assert np.array_equal(m[:, 0], [0, 200, 400, 600])
    assert np.all(np.diff(m[:, 2]) <= 2.0)


def test_parameter_overrides_land_in_manifest(tmp_path):
    assert main(["run", TRIANGLE, "--out", str(tmp_path), "--steps", "0", "--so", "7", "--decay", "0.2"]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["overrides"] == {"so": 7.0, "decay": 0.2}
    assert manifest["parameters"]["diffusion"]["decay"] == 0.2


def test_jobs_run_several_scenarios(tmp_path):
    b = str(SCENARIOS / "m_clamped.json")
    assert main(["run", TRIANGLE, b, "--out", str(tmp_path), "--steps", "10", "--jobs", "2", "--no-frames"]) == 0
    assert (tmp_path / "triangle" / "metrics.csv").exists()
    assert (tmp_path / "m_clamped" / "metrics.csv").exists()


def test_invalid_scenario_gives_one_line_json_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n  "lattice": [10, 10]\n  "data": {}}')
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert payload["error"] == "ScenarioError" and "line 3" in payload["message"]


def test_oracle_movavg_window_one_echoes(tmp_path, capsys):
    series = tmp_path / "s.csv"
    write_csv(series, ("value",), [(v,) for v in (1.5, -2.0, 3.25, 0.0)])
    assert main(["oracle", "movavg", "--window", "1", str(series)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["index,value", "0,1.5", "1,-2.0", "2,3.25", "3,0.0"]


def test_oracle_movavg_window_19_narrows(tmp_path):
    series = tmp_path / "s.csv"
    write_csv(series, ("value",), [(np.sin(i / 9.0),) for i in range(200)])
    out = tmp_path / "o.csv"
    assert main(["oracle", "movavg", "--window", "19", str(series), "-o", str(out)]) == 0
    res = read_numeric_csv(out)
    assert len(res) == 182 and res[0, 0] == 9


def test_oracle_bspline_512_samples(tmp_path):
    pts = tmp_path / "p.csv"
    write_csv(pts, ("x", "y"), [(0, 0), (10, 20), (20, 0), (30, 20)])
    out = tmp_path / "c.csv"
    assert main(["oracle", "bspline", "--degree", "2", "--clamped", str(pts), "-o", str(out)]) == 0
    c = read_numeric_csv(out)
    assert c.shape == (512, 2) and np.allclose(c[0], (0, 0)) and np.allclose(c[-1], (30, 20))


def test_oracle_hull_and_lowpass(tmp_path, capsys):
    pts = tmp_path / "p.csv"
    write_csv(pts, ("x", "y"), [(0, 0), (2, 0), (1, 1), (2, 2), (0, 2)])
    assert main(["oracle", "hull", str(pts)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 5
    series = tmp_path / "s.csv"
    write_csv(series, ("v",), [(0,), (4,), (0,)])
    assert main(["oracle", "lowpass", "--iterations", "1", str(series)]) == 0
    assert capsys.readouterr().out.splitlines()[2] == "1,2.0"


def test_oracle_malformed_csv_reports_row(tmp_path, capsys):
    pts = tmp_path / "p.csv"
    pts.write_text("x,y\n1,2\n3\n")
    assert main(["oracle", "hull", str(pts)]) == 2
    assert "row 3" in json.loads(capsys.readouterr().err)["message"]


def test_compare_against_own_curve_is_zero(tmp_path):
    from slimecurve.cli import load_run
    from slimecurve.runner import material_curve

    run = tmp_path / "run"
    assert main(["run", TRIANGLE, "--out", str(run), "--steps", "0"]) == 0
    _, sc, snaps = load_run(run)
    write_csv(tmp_path / "own.csv", ("x", "y"), material_curve(sc, snaps[0]).samples)
    assert main(["compare", str(run), str(tmp_path / "own.csv")]) == 0
    report = read_numeric_csv(run / "compare.csv")
    assert np.all(report[:, 2] == 0)


def test_compare_reports_best_step_per_degree(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["run", str(SCENARIOS / "m_clamped.json"), "--out", str(run), "--steps", "300",
                 "--snapshot-every", "100", "--no-frames"]) == 0
    capsys.readouterr()
    assert main(["compare", str(run), "--bspline-degrees", "1", "2", "3", "4", "--clamped"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split(",")[1] for ln in lines] == ["bspline1", "bspline2", "bspline3", "bspline4"]
    assert all(int(ln.split(",")[2]) in (0, 100, 200, 300) for ln in lines)
    header = (run / "compare.csv").read_text().splitlines()[0]
    assert header == "step,deviation_distance,rmse_bspline1,rmse_bspline2,rmse_bspline3,rmse_bspline4"


def test_compare_errors(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["compare", str(empty), "--bspline-degrees", "2"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "CliError"
    run = tmp_path / "run"
    main(["run", TRIANGLE, "--out", str(run), "--steps", "0"])
    write_csv(tmp_path / "far.csv", ("x", "y"), [(0, 0), (900, 900)])
    assert main(["compare", str(run), str(tmp_path / "far.csv")]) == 2
    assert "outside" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])["message"]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "slimecurve.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("slimecurve ")


@pytest.mark.parametrize("argv", [["run"], ["oracle"], ["bogus"]])
def test_usage_errors_exit_nonzero(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code != 0
