import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cpsdefend.cli import main

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def run_cli(*args):
    return main([str(a) for a in args])


def test_run_gain160(tmp_path, capsys):
    assert run_cli("run", "--golden", "gain160", "--out", tmp_path, "--export-region") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert 5.001 <= summary["detection_time"] <= 5.010
    assert summary["gains"]["kp"] == 50.0 and summary["gains_verified"]
    assert (tmp_path / "region.csv").exists()
    assert "gain160: detection=" in capsys.readouterr().out


def test_timeseries_layout(tmp_path):
    assert run_cli("run", "--scenario", SCENARIO_DIR / "baseline.toml", "--out", tmp_path) == 0
    with open(tmp_path / "timeseries.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "r", "e", "u", "u_attacked", "y", "y_model", "residual", "ids_flag",
                       "controller_id"]
    assert len(rows) - 1 == round(15.0 / 0.001) + 1
    assert all(float(x) == float(x) for x in rows[-1][:8])


def test_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run_cli("run", "--scenario", SCENARIO_DIR / "sse.toml", "--out", d) == 0
    for name in ("timeseries.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_baseline_no_ids_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", "--golden", "baseline", "--out", a) == 0
    assert run_cli("run", "--golden", "baseline", "--no-ids", "--out", b) == 0
    assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()


def test_missing_config(tmp_path, capsys):
    assert run_cli("run", "--scenario", tmp_path / "missing.conf", "--out", tmp_path) == 1
    assert "config error" in capsys.readouterr().err


def test_bad_config_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text((SCENARIO_DIR / "baseline.toml").read_text() + "detector.persistance = 2\n")
    assert run_cli("run", "--scenario", cfg, "--out", tmp_path) == 1
    assert "detector.persistance" in capsys.readouterr().err


def test_identification_failure_exit(tmp_path):
    cfg = tmp_path / "noisy.toml"
    cfg.write_text((SCENARIO_DIR / "gain160.toml").read_text()
                   + "noise.std = 0.001\nnoise.seed = 1\n")
    assert run_cli("run", "--scenario", cfg, "--out", tmp_path) == 2
    assert json.loads((tmp_path / "summary.json").read_text())["identification_failed"]


@pytest.mark.parametrize("name, cell", [("gain160", "50.0,100.0,1"), ("sse", "2000.0,1500.0,1")])
def test_region_published_systems(tmp_path, name, cell):
    assert run_cli("region", "--golden", name, "--out", tmp_path) == 0
    lines = (tmp_path / "region.csv").read_text().splitlines()
    assert cell in lines and len(lines) == 201 * 201 + 1


def test_region_from_config_file(tmp_path):
    assert run_cli("region", "--scenario", SCENARIO_DIR / "gain160.toml", "--out", tmp_path,
                   "--kp-range", 0, 100, "--ki-range", 0, 200, "--steps", 3) == 0
    assert "50.0,100.0,1" in (tmp_path / "region.csv").read_text().splitlines()


def test_region_empty(tmp_path, capsys):
    assert run_cli("region", "--scenario", SCENARIO_DIR / "unstabilizable.toml", "--out", tmp_path) == 3
    assert "no stabilizing" in capsys.readouterr().err


def test_list_golden(capsys):
    assert run_cli("list-golden") == 0
    out = capsys.readouterr().out
    assert all(n in out for n in ("baseline", "gain160", "sse"))


def test_source_required():
    with pytest.raises(SystemExit):
        run_cli("run", "--out", ".")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cpsdefend", "list-golden"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "gain160" in proc.stdout
