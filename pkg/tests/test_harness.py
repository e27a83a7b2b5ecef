import copy
import json
import math

import numpy as np
import pytest

from trailnav.errors import ConfigInvalid, EmptyLog
from trailnav.harness import (
    Environment,
    aggregate,
    load_scenario,
    plot_data,
    run_suite,
    run_trial,
)
from trailnav.harness.pipeline import compute_metrics, windowed_rms
from trailnav.harness.report import read_metrics_csv
from trailnav.harness.scenario import BUILTIN
from trailnav.track import RolloutLog, UnicycleState

FLAT = load_scenario("flat")


def scenario(**changes):
    data = copy.deepcopy(FLAT.raw)
    data.update(changes)
    return load_scenario(data)


@pytest.fixture(scope="module")
def flat_trail():
    return run_trial(FLAT, "trail", 0, 0)


def test_builtins_load():
    for name in BUILTIN:
        sc = load_scenario(name)
        assert sc.name == name


def test_invalid_configs():
    with pytest.raises(ConfigInvalid):
        load_scenario({"schema": "other"})
    with pytest.raises(ConfigInvalid):
        scenario(extra=1)
    with pytest.raises(ConfigInvalid):
        scenario(goal={"x": 99.0, "y": 0.0})
    with pytest.raises(ConfigInvalid):
        scenario(sim={"time_cap": 0.0})
    with pytest.raises(ConfigInvalid):
        scenario(elevation=[{"type": "volcano"}])
    with pytest.raises(ConfigInvalid):
        load_scenario("/nonexistent/file.json")
    with pytest.raises(ConfigInvalid):
        run_trial(FLAT, "rrt")


def test_start_equals_goal():
    sc = scenario(goal={"x": 1.2, "y": 0.1})
    for method in ("trail", "mppi-geo"):
        m = run_trial(sc, method, 0, 0).metrics
        assert m.success and m.progress == 1.0
        assert m.time == pytest.approx(0.0) and m.length == pytest.approx(0.0)


def test_flat_trail_is_nearly_straight(flat_trail):
    m = flat_trail.metrics
    assert m.success and m.progress == 1.0
    d = math.dist(FLAT.start[:2], FLAT.goal)
    assert m.length <= 1.05 * d
    assert m.time == pytest.approx(len(flat_trail.log) * FLAT.sim.dt)


def test_blocked_fails_gracefully():
    sc = load_scenario("blocked")
    res = run_trial(sc, "trail", 0, 0)
    assert not res.metrics.success and res.metrics.progress < 1.0
    assert res.metrics.failure_reason == "no_path"
    assert res.metrics.time is None and res.metrics.length is None


def test_metrics_windowed_rms():
    assert np.allclose(windowed_rms([3.0, 4.0, 0.0], 0.05), [math.sqrt(12.5), math.sqrt(8.0)])
    assert np.allclose(windowed_rms([2.0], 0.05), [2.0])
    assert len(windowed_rms([], 0.05)) == 0


def test_progress_on_failure():
    log = RolloutLog()
    log.append(t=0, x=1, y=0, theta=0, v=0, omega=0, v_cmd=0, omega_cmd=0, bump=0, az_proxy=0)
    log.final = UnicycleState(6.0, 0.0, 0.0)
    m = compute_metrics(FLAT, "trail", 0, 0, log, False, "time_cap")
    assert m.progress == pytest.approx(0.5)
    log.final = UnicycleState(-30.0, 0.0, 0.0)
    assert compute_metrics(FLAT, "trail", 0, 0, log, False, "time_cap").progress == 0.0


def test_determinism(flat_trail):
    again = run_trial(FLAT, "trail", 0, 0)
    assert json.dumps(again.metrics.to_dict(), sort_keys=True) == json.dumps(flat_trail.metrics.to_dict(), sort_keys=True)
    assert again.log.rows == flat_trail.log.rows


def test_suite_identical_trials_have_zero_std(tmp_path):
    doc = run_suite([FLAT], ["trail"], trials=3, seed=5, out_dir=tmp_path)
    (entry,) = doc["summary"]
    assert entry["successes"] == 3
    for k in ("success_rate", "progress", "time", "length", "az_rms_mean", "az_max"):
        assert entry[k]["std"] == 0.0
    assert (tmp_path / "metrics.csv").exists() and (tmp_path / "metrics.json").exists()
    assert (tmp_path / "flat_trail_trial2_rollout.csv").exists()
    assert (tmp_path / "flat_trail_trial0_plot.json").exists()
    assert [t["seed"] for t in doc["trials"]] == [5, 6, 7]


def test_always_failing_method_reports_absent_metrics(tmp_path):
    doc = run_suite(["blocked"], ["trail"], trials=2, seed=0, out_dir=tmp_path)
    (entry,) = doc["summary"]
    assert entry["successes"] == 0 and entry["success_rate"]["mean"] == 0.0
    for k in ("time", "length", "az_rms_mean", "az_max"):
        assert entry[k]["mean"] is None and entry[k]["std"] is None
    saved = json.loads((tmp_path / "metrics.json").read_text())
    assert saved["summary"][0]["time"]["mean"] is None


def test_aggregation_matches_csv_recompute(tmp_path):
    run_suite([FLAT, "blocked"], ["trail"], trials=2, seed=1, out_dir=tmp_path)
    rows = read_metrics_csv(tmp_path / "metrics.csv")
    table = aggregate(rows)
    saved = json.loads((tmp_path / "metrics.json").read_text())["summary"]
    for entry, ref in zip(table, saved):
        ds = [r for r in rows if (r["scenario"], r["method"]) == (entry["scenario"], entry["method"])]
        ok = [r for r in ds if r["success"]]
        for k in ("time", "length", "az_max"):
            xs = [r[k] for r in ok]
            if xs:
                mean = sum(xs) / len(xs)
                std = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
                assert entry[k]["mean"] == pytest.approx(mean, rel=1e-12)
                assert entry[k]["std"] == pytest.approx(std, abs=1e-12)
                assert ref[k]["mean"] == pytest.approx(mean, rel=1e-12)
        assert entry["progress"]["mean"] == pytest.approx(sum(r["progress"] for r in ds) / len(ds))


def test_plot_data(flat_trail):
    with pytest.raises(EmptyLog):
        plot_data(RolloutLog())
    env = Environment.build(FLAT)
    data = plot_data(flat_trail.log, env.geo)
    assert len(data["polyline"]["x"]) == len(flat_trail.log)
    v = flat_trail.log.array("v")
    assert data["speed_range"] == [v.min(), v.max()]
    assert data["cost_raster"]["rows"] == env.geo.shape[0]


def test_trail_respects_input_limits(flat_trail):
    lim = FLAT.limits
    v = flat_trail.log.array("v")
    w = flat_trail.log.array("omega")
    assert np.all((v >= lim.v_min) & (v <= lim.v_max))
    assert np.all((w >= lim.omega_min) & (w <= lim.omega_max))
