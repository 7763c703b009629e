import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.draw import line as sk_line

from slimecurve.analysis import point_to_polyline
from slimecurve.scenario import (
    STRONG,
    WEAK,
    Polyline2D,
    ScenarioError,
    Series1D,
    bresenham,
    dilate,
    disc,
    load_scenario,
    make_signal,
    rasterize,
    rectilinear_preprocess,
    scenario_from_dict,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "slimecurve" / "scenarios"
M = [[80, 300], [140, 100], [200, 240], [260, 100], [320, 300]]


def doc(**kw):
    d = {"name": "t", "lattice": [100, 100], "data": {"type": "polyline", "points": [[20, 50], [80, 50]]}}
    d.update(kw)
    return d


@settings(max_examples=200, deadline=None)
@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_bresenham_matches_skimage(x0, y0, x1, y1):
    rr, cc = sk_line(y0, x0, y1, x1)
    assert set(bresenham(x0, y0, x1, y1)) == set(zip(cc.tolist(), rr.tolist()))


def test_rasterize_is_connected_and_hits_vertices():
    pl = Polyline2D(tuple(map(tuple, M)))
    mask = rasterize(pl, 400, 400)
    for x, y in M:
        assert mask[y, x]
    from scipy import ndimage

    assert ndimage.label(mask, structure=np.ones((3, 3)))[1] == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_dilate_matches_brute_force(radius, seed):
    rng = np.random.default_rng(seed)
    mask = np.zeros((30, 30), bool)
    mask[rng.integers(8, 22, 6), rng.integers(8, 22, 6)] = True
    out = dilate(mask, radius)
    ys, xs = np.nonzero(mask)
    gy, gx = np.mgrid[:30, :30]
    brute = np.zeros_like(mask)
    for x, y in zip(xs, ys):
        brute |= (gx - x) ** 2 + (gy - y) ** 2 <= radius * radius
    assert np.array_equal(out, brute)
    assert disc(radius).shape == (2 * radius + 1, 2 * radius + 1)


def test_dilate_refuses_clipping():
    mask = np.zeros((10, 10), bool)
    mask[0, 5] = True
    with pytest.raises(ScenarioError):
        dilate(mask, 2)


def test_rectilinear_M_has_four_risers():
    out = rectilinear_preprocess(Polyline2D(tuple(map(tuple, M)))).array()
    seg = np.diff(out, axis=0)
    assert np.all((seg[:, 0] == 0) | (seg[:, 1] == 0))
    risers = seg[seg[:, 0] == 0]
    assert len(risers) == 4
    # risers sit at the segment midpoints and the path runs through every original vertex
    assert sorted(out[:-1][seg[:, 0] == 0][:, 0].tolist()) == [110.0, 170.0, 230.0, 290.0]
    assert point_to_polyline(np.array(M, float), out).max() == 0.0


def test_rectilinear_rejects_non_monotone():
    with pytest.raises(ScenarioError):
        rectilinear_preprocess(Polyline2D(((0, 0), (10, 5), (5, 10))))


def test_series_mapping():
    s = Series1D((0.0, 1.0, -1.0), x_scale=2.0, y_origin=50.0, y_scale=10.0, x_origin=5.0)
    assert np.array_equal(s.to_lattice(s.values), [[5, 50], [7, 40], [9, 60]])
    assert np.array_equal(s.to_lattice([0.5], offset=1), [[7, 45]])


def test_signals():
    sq = make_signal({"kind": "square", "n": 160, "period": 80})
    assert set(np.unique(sq)) == {-1.0, 1.0} and sq[:40].min() == 1.0 and sq[40:80].max() == -1.0
    with pytest.raises(ScenarioError):
        make_signal({"kind": "noise", "n": 10})


def test_removal_protocol_schedule():
    sc = scenario_from_dict(doc(protocol="remove", clamp="ends", warmup_halt=20))
    xs, _, mags = sc.schedule(0)
    assert set(mags) == {STRONG}
    line_cells = len(xs) - len(sc.stimuli[1].cells)
    xs, _, mags = sc.schedule(20)
    assert len(xs) == len(sc.stimuli[1].cells) and line_cells > 0
    assert len(sc.schedule(10**9)[0]) == len(xs)


def test_weak_protocol_schedule():
    sc = scenario_from_dict(doc(protocol="weak"))
    assert set(sc.schedule(19)[2]) == {STRONG}
    assert set(sc.schedule(20)[2]) == {WEAK}
    assert set(sc.schedule(10**9)[2]) == {WEAK}


def test_clamp_discs_and_initial_band():
    sc = scenario_from_dict(doc(clamp="ends", clamp_radius=3, material_width=5))
    assert len(sc.stimuli[-1].cells) == 2 * 29
    assert sc.initial_mask[48:53, 50].all() and not sc.initial_mask[47, 50]


def test_pipe_is_material_and_habitat():
    sc = scenario_from_dict(doc(preprocess="pipe", pipe_radius=7))
    assert np.array_equal(sc.initial_mask, sc.habitat)
    assert sc.habitat[43:58, 50].all() and not sc.habitat[42, 50]


@pytest.mark.parametrize(
    "bad, where",
    [
        ({"data": {"type": "polyline", "points": [[20, 50], [120, 50]]}}, ""),
        ({"clamp": [7]}, "clamp"),
        ({"protocol": "fade"}, "protocol"),
        ({"params": {"so": 0}}, "params"),
        ({"params": {"speed": 2}}, "params"),
        ({"data": {"type": "polyline", "points": [[20, 50], [20, 50], [40, 40]]}}, "points"),
    ],
)
def test_invalid_scenarios_raise_with_context(bad, where):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(doc(**bad))
    assert exc.value.where.startswith(where)


def test_missing_field_and_bad_json(tmp_path):
    with pytest.raises(ScenarioError, match="data"):
        scenario_from_dict({"name": "x"})
    p = tmp_path / "bad.json"
    p.write_text('{"name": "x",\n "lattice": [10, 10],,}')
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(p)


def test_csv_points_with_row_errors(tmp_path):
    (tmp_path / "pts.csv").write_text("x,y\n20,50\n80,oops\n")
    d = doc(data={"type": "polyline", "csv": "pts.csv"})
    (tmp_path / "s.json").write_text(json.dumps(d))
    with pytest.raises(ScenarioError, match="row 3"):
        load_scenario(tmp_path / "s.json")


def test_overrides_reach_params_and_run_plan():
    sc = scenario_from_dict(doc(), seed=9, so=7, decay=0.2, run_steps=10)
    assert (sc.seed, sc.sensory.so, sc.diffusion.decay, sc.run_steps) == (9, 7, 0.2, 10)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_corpus_loads_and_builds(path):
    sc = load_scenario(path)
    world = sc.build_world()
    assert world.n == sc.initial_mask.sum() or sc.habitat is not None
    assert world.occupancy_consistent()
