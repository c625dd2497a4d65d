from pathlib import Path

import numpy as np
import pytest

from cpsdefend.compensate import pid_tf
from cpsdefend.config import dump_config, load_config, parse_config
from cpsdefend.scenarios import GOLDEN, golden, paper_baseline, paper_gain_attack, paper_sse_attack
from cpsdefend.sim import summarize

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def test_baseline_definition():
    g = paper_baseline()
    assert g.scenario.plant.den.tolist() == [1.0, -1.988, 0.9881]
    c = pid_tf(g.scenario.controller)
    np.testing.assert_allclose(c.num.coeffs, [30.2, -29.97], rtol=1e-12)
    assert c.den.tolist() == [1.0, -1.0]
    assert g.expected.detection is None


def test_gain_attack_definition():
    s = paper_gain_attack().scenario
    assert (s.attack.kind, s.attack.gain, s.attack.onset) == ("gain", 160.0, 5.0)
    p = s.compensator.policy
    assert (p.kind, p.kp, p.ki) == ("explicit", 50.0, 100.0)


def test_sse_attack_definition():
    s = paper_sse_attack().scenario
    assert s.attack.tf.num.tolist() == [0.7, -0.7]
    assert s.attack.tf.den.tolist() == [1.0, -1.0001]
    assert (s.arx.l, s.arx.m) == (3, 3)


def test_unknown_golden():
    with pytest.raises(KeyError, match="unknown golden"):
        golden("nope")


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_within_expected_bounds(golden_run, name):
    g = golden(name)
    rep = summarize(golden_run(name))
    exp = g.expected
    if exp.detection is None:
        assert rep.detection_time is None
    else:
        lo, hi = exp.detection
        assert lo <= rep.detection_time <= hi
    lo, hi = exp.steady_state_error
    assert lo <= rep.steady_state_error <= hi
    assert rep.diverged is not exp.stable


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_config_files_match(name):
    g = golden(name)
    sf = load_config(SCENARIO_DIR / f"{name}.toml")
    assert sf.scenario == g.scenario
    assert sf.region_system == g.published_model


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_dump_parse_round_trip(name):
    g = golden(name)
    sf = parse_config(dump_config(g.scenario, g.published_model))
    assert sf.scenario == g.scenario
