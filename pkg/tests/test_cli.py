"""CLI tests: artifacts, determinism, overrides, sweep fan-out, error paths."""

import json
import os

import numpy as np
import pytest

from wbcsim.cli import apply_override, bench_normals, main, parse_param, RunConfig
from wbcsim.simulator import LOG_COLUMNS, MetricsSummary, ScenarioError

METRICS_KEYS = set(MetricsSummary.__dataclass_fields__)

MINI_SLOPE = """\
name: mini
terrain:
  kind: slope
  angle_deg: 10.0
  start: 0.3
  blend: 0.4
duration: 0.5
reference:
  - t_start: 0.0
    speed: 0.5
    height: 0.25
"""

MINI_FLAT = """\
name: flat_hold
terrain:
  kind: flat
duration: 0.3
"""


@pytest.fixture
def slope_scn(tmp_path):
    p = tmp_path / "mini.scn"
    p.write_text(MINI_SLOPE)
    return str(p)


@pytest.fixture
def flat_scn(tmp_path):
    p = tmp_path / "flat.scn"
    p.write_text(MINI_FLAT)
    return str(p)


# -- param parsing -----------------------------------------------------------

def test_parse_param_types():
    assert parse_param("duration=2.5") == ("duration", 2.5)
    assert parse_param("estimation_mode=true_normal") == (
        "estimation_mode", "true_normal")
    assert parse_param("lqr_q=[1,2,3,4]") == ("lqr_q", [1, 2, 3, 4])
    with pytest.raises(ScenarioError):
        parse_param("no_equals_sign")


def test_apply_override_dotted():
    cfg = {"terrain": {"kind": "slope", "angle_deg": 10.0}}
    apply_override(cfg, "terrain.angle_deg", 20.0)
    apply_override(cfg, "duration", 1.0)
    assert cfg["terrain"]["angle_deg"] == 20.0 and cfg["duration"] == 1.0
    with pytest.raises(ScenarioError):
        apply_override(cfg, "duration.sub", 1.0)   # scalar is not a section


# -- run mode ----------------------------------------------------------------

def test_run_writes_artifacts(slope_scn, tmp_path):
    out = tmp_path / "out"
    assert main(["--scenario", slope_scn, "--out", str(out), "--seed", "2"]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == METRICS_KEYS       # documented closed key set
    assert metrics["fell"] is False and metrics["failed"] is False
    header = (out / "log.csv").read_text().splitlines()[0]
    assert header == ",".join(LOG_COLUMNS)
    # slope terrain: incline trace artifact present
    trace = (out / "psi_trace.csv").read_text().splitlines()
    assert trace[0] == "t,psi_hat,psi_true"
    assert len(trace) > 100
    assert (out / "metrics.txt").read_text().startswith("name = mini")


def test_same_seed_byte_identical_logs(slope_scn, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--scenario", slope_scn, "--out", str(a), "--seed", "5"]) == 0
    assert main(["--scenario", slope_scn, "--out", str(b), "--seed", "5"]) == 0
    assert (a / "log.csv").read_bytes() == (b / "log.csv").read_bytes()


def test_flat_terrain_has_no_psi_trace(flat_scn, tmp_path):
    out = tmp_path / "out"
    assert main(["--scenario", flat_scn, "--out", str(out)]) == 0
    assert not (out / "psi_trace.csv").exists()


def test_env_var_sets_output_dir(flat_scn, tmp_path, monkeypatch):
    out = tmp_path / "from_env"
    monkeypatch.setenv("WBCSIM_OUT", str(out))
    assert main(["--scenario", flat_scn]) == 0
    assert (out / "metrics.json").exists()


def test_param_override_applied(flat_scn, tmp_path):
    out = tmp_path / "out"
    assert main(["--scenario", flat_scn, "--out", str(out),
                 "--param", "duration=0.1", "--param", "name=renamed"]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["name"] == "renamed"
    assert len((out / "log.csv").read_text().splitlines()) < 60


# -- error paths -------------------------------------------------------------

def test_malformed_scenario_diagnostic_names_key(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("terrain: {kind: flat}\nspeeed: 1.0\n")
    assert main(["--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "speeed" in capsys.readouterr().err


def test_missing_scenario_file(tmp_path, capsys):
    assert main(["--scenario", str(tmp_path / "nope.scn"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "nope.scn" in capsys.readouterr().err


def test_run_mode_requires_scenario(tmp_path, capsys):
    assert main(["--out", str(tmp_path / "o")]) == 2
    assert "--scenario" in capsys.readouterr().err


# -- sweep mode --------------------------------------------------------------

def test_sweep_writes_per_value_runs_and_summary(flat_scn, tmp_path):
    out = tmp_path / "sweep"
    assert main(["--scenario", flat_scn, "--out", str(out), "--mode", "sweep",
                 "--sweep", "duration=0.1,0.2", "--jobs", "1"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("sweep_value,name,fell,failed")
    assert len(lines) == 3
    for tag in ("duration_0.1", "duration_0.2"):
        assert (out / tag / "metrics.json").exists()


def test_sweep_requires_key(flat_scn, tmp_path, capsys):
    assert main(["--scenario", flat_scn, "--out", str(tmp_path / "o"),
                 "--mode", "sweep"]) == 2
    assert "--sweep" in capsys.readouterr().err


# -- bench-normals -----------------------------------------------------------

def test_bench_normals_passes(capsys):
    cfg = RunConfig(scenario=None, out_dir=".", seed=1)
    assert bench_normals(cfg) == 0
    table = capsys.readouterr().out
    assert "ramp pipeline" in table and "FAIL" not in table
