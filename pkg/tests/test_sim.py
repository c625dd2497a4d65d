from dataclasses import replace

import numpy as np
import pytest

from cpsdefend.attack import AttackModel
from cpsdefend.compensate import PidGains, pid_tf
from cpsdefend.lti import TransferFunction, lsim
from cpsdefend.scenarios import DC_BLOCKER, MOTOR, NOMINAL_PI, golden
from cpsdefend.sim import (
    DIVERGENCE_LIMIT,
    NoiseConfig,
    Scenario,
    ScenarioError,
    run_scenario,
    steady_state_error,
    summarize,
)

TS = 1e-3


def short(**kw):
    base = dict(plant=MOTOR, controller=NOMINAL_PI, duration=3.0, secure_until=1.0)
    base.update(kw)
    return Scenario(**base)


def test_baseline_converges(golden_run):
    log = golden_run("baseline")
    assert np.max(np.abs(log.y[log.at(14.0):] - 1.0)) < 0.01
    assert log.events.detection_time is None
    rep = summarize(log)
    assert rep.detection_latency is None and rep.steady_state_error < 0.01


def test_no_attack_no_swap(golden_run):
    log = golden_run("baseline")
    assert not log.controller_id.any() and log.events.swap_time is None


def test_gain_attack_uncompensated_grows(golden_run):
    log = golden_run("gain160", ids=False)
    y = log.y
    pre = np.max(np.abs(y[log.at(4.0):log.at(5.0)] - 1))
    assert np.max(np.abs(y[log.at(5.0):])) > 10
    assert np.max(np.abs(y[log.at(14.0):] - 1)) > 1000 * pre


def test_gain_attack_full_pipeline(golden_run):
    log = golden_run("gain160")
    ev = log.events
    assert 5.001 <= ev.detection_time <= 5.010
    assert ev.swap_time is not None and ev.swap_time <= 5.1
    assert ev.swap_time == pytest.approx(ev.ident_complete_time + TS)
    assert np.max(np.abs(log.y[log.at(ev.swap_time):])) < 5
    assert (ev.gains.kp, ev.gains.ki) == (50.0, 100.0) and ev.gains_verified
    assert log.controller_id[log.at(ev.swap_time)] == 1
    assert log.controller_id[log.at(ev.swap_time) - 1] == 0


def test_sse_summaries(golden_run):
    assert summarize(golden_run("sse", ids=False)).steady_state_error == pytest.approx(0.032, abs=0.008)
    log = golden_run("sse")
    assert abs(log.r[log.at(14.0)] - log.y[log.at(14.0)]) <= 0.0075
    assert log.events.gains_verified is False and log.events.gain_rejection


def test_determinism():
    s = short(attack=AttackModel.constant_gain(160, 1.5), noise=NoiseConfig(1e-4, 3))
    a, b = run_scenario(s), run_scenario(s)
    for col in ("y", "u", "residual", "y_model", "ids_flag", "controller_id"):
        assert getattr(a, col).tobytes() == getattr(b, col).tobytes()


@pytest.mark.parametrize("name", ["gain160", "sse"])
def test_model_driven_by_u_only(golden_run, name):
    log = golden_run(name, compensation=False)
    np.testing.assert_array_equal(log.y_model, lsim(MOTOR, log.u))
    assert np.any(log.y != log.y_model)


def test_model_ignores_attack_shape():
    # same u (attack starts at the last sample), different attacks: y_model identical
    logs = [run_scenario(short(attack=a, ids_enabled=False))
            for a in (AttackModel.constant_gain(160, 3.0), AttackModel.filter(DC_BLOCKER, 3.0))]
    np.testing.assert_array_equal(logs[0].u, logs[1].u)
    np.testing.assert_array_equal(logs[0].y_model, logs[1].y_model)
    assert logs[0].y[-1] == logs[1].y[-1]  # plant only sees u' one step later


@pytest.mark.parametrize("latency", [0, 1])
def test_loop_algebra(latency):
    log = run_scenario(short(latency=latency))
    y_fb = log.y if latency == 0 else np.concatenate([[0.0], log.y[:-1]])
    np.testing.assert_allclose(log.e, log.r - y_fb, atol=1e-12, rtol=0)
    np.testing.assert_allclose(log.u, lsim(pid_tf(NOMINAL_PI), log.e), atol=1e-12, rtol=0)


def test_latency_one_baseline_still_converges():
    log = run_scenario(short(latency=1, duration=15.0, secure_until=5.0))
    assert abs(log.y[-1] - 1) < 0.01 and log.events.detection_time is None


def test_noise_seeds():
    a = run_scenario(short(noise=NoiseConfig(0.01, 1)))
    b = run_scenario(short(noise=NoiseConfig(0.01, 2)))
    assert np.any(a.y != b.y)
    assert a.events.secure_std == pytest.approx(0.01, rel=0.1)
    assert a.events.thresholds[1] == pytest.approx(3 * a.events.secure_std + a.events.secure_mean)


def test_identification_failure_is_an_event():
    s = short(attack=AttackModel.constant_gain(160, 1.5), noise=NoiseConfig(1e-3, 0))
    log = run_scenario(s)
    ev = log.events
    assert ev.detection_time is not None
    assert ev.identification_failed and ev.swap_time is None


def test_compensation_disabled_identifies_but_never_swaps(golden_run):
    log = golden_run("gain160", compensation=False)
    assert log.events.identified_tf is not None
    assert not log.controller_id.any()


def test_divergence_is_clamped():
    plant = TransferFunction([1.0], [1.0, -1.5], TS)
    log = run_scenario(Scenario(plant=plant, controller=PidGains(0.1, 0.0), duration=1.0,
                                secure_until=0.5, ids_enabled=False))
    assert log.events.diverged and summarize(log).diverged
    assert np.all(np.isfinite(log.y)) and np.max(np.abs(log.y)) == DIVERGENCE_LIMIT


def test_explicit_rejection_keeps_controller_by_default():
    g = golden("sse").scenario
    s = replace(g, compensator=replace(g.compensator, on_reject="keep"))
    log = run_scenario(s)
    assert log.events.gains_verified is False and log.events.swap_time is None


def test_steady_state_error_window(golden_run):
    log = golden_run("baseline")
    n = round(len(log) * 0.05)
    assert steady_state_error(log) == pytest.approx(np.mean(np.abs(1 - log.y[-n:])))


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(ts=0.0), "ts"),
        (dict(duration=-1.0), "duration"),
        (dict(latency=2), "latency"),
        (dict(secure_until=10.0), "secure_until"),
        (dict(attack=AttackModel.constant_gain(2, 0.5)), "attack.onset"),
        (dict(attack=AttackModel.constant_gain(2, 9.0)), "attack.onset"),
        (dict(plant=TransferFunction([1, 0], [1, -0.5], TS)), "latency"),
        (dict(plant=TransferFunction([1], [1, -0.5], 0.01)), "plant"),
        (dict(noise=NoiseConfig(-1.0)), "noise.std"),
    ],
)
def test_validation(kw, field):
    with pytest.raises(ScenarioError) as info:
        run_scenario(short(**kw))
    assert info.value.field == field


def test_onset_at_secure_boundary_allowed():
    short(attack=AttackModel.constant_gain(2, 1.0)).validate()


def test_biproper_plant_with_latency_one():
    plant = TransferFunction([0.1, 0.0], [1, -0.5], TS)
    log = run_scenario(short(plant=plant, latency=1, ids_enabled=False))
    assert np.all(np.isfinite(log.y))
