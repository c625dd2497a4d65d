"""Reference scenarios: a DC-motor speed loop under two forward-channel attacks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .attack import AttackModel
from .compensate import GainPolicy, PidGains
from .lti import TransferFunction, tf_series
from .sim import ArxConfig, CompensatorConfig, Scenario

TS = 1e-3
ONSET = 5.0

MOTOR = TransferFunction([9.96e-7, 9.92e-7], [1.0, -1.988, 0.9881], TS)
NOMINAL_PI = PidGains(kp=30.2, ki=230.0, ts=TS)  # (30.2 z - 29.97) / (z - 1)
DC_BLOCKER = TransferFunction([0.7, -0.7], [1.0, -1.0001], TS)

# Attacked-loop models as published (printed rounding kept on purpose: the
# steady-state-attack model's numerator no longer vanishes at z = 1).
PUBLISHED_GAIN_MODEL = TransferFunction(
    [1.59359996e-4, -1.58720003e-4], [1.0, -1.98799999, 0.988099999], TS
)
PUBLISHED_DC_BLOCKER_MODEL = TransferFunction(
    [6.972e-7, 0.028e-7, -6.944e-7], [1.0, -2.988100049, 2.976298898, -0.988198859], TS
)


@dataclass(frozen=True)
class ExpectedBounds:
    """Closed intervals that a run's summary must fall into."""

    detection: Optional[tuple] = None          # None: no detection allowed
    steady_state_error: Optional[tuple] = None
    stable: bool = True


@dataclass(frozen=True)
class GoldenScenario:
    name: str
    scenario: Scenario
    expected: ExpectedBounds
    published_model: Optional[TransferFunction] = None
    description: str = ""

    def region_system(self) -> TransferFunction:
        """System whose PI stability region the scenario is about."""
        if self.published_model is not None:
            return self.published_model
        s = self.scenario
        if s.attack.kind == "none":
            return s.plant
        return tf_series(s.attack.as_tf(s.ts), s.plant)


def paper_baseline() -> GoldenScenario:
    s = Scenario(plant=MOTOR, controller=NOMINAL_PI, ts=TS, duration=15.0, secure_until=ONSET,
                 name="baseline")
    return GoldenScenario(
        "baseline", s,
        ExpectedBounds(detection=None, steady_state_error=(0.0, 0.01)),
        description="attack-free unit-step response",
    )


def paper_gain_attack() -> GoldenScenario:
    base = paper_baseline().scenario
    s = replace(
        base,
        attack=AttackModel.constant_gain(160.0, ONSET),
        arx=ArxConfig(l=2, m=2),
        compensator=CompensatorConfig(policy=GainPolicy.explicit(50.0, 100.0)),
        name="gain160",
    )
    return GoldenScenario(
        "gain160", s,
        ExpectedBounds(detection=(5.001, 5.010), steady_state_error=(0.0, 0.05)),
        published_model=PUBLISHED_GAIN_MODEL,
        description="constant gain 160 on the control signal from t=5 s",
    )


def paper_sse_attack() -> GoldenScenario:
    base = paper_baseline().scenario
    s = replace(
        base,
        attack=AttackModel.filter(DC_BLOCKER, ONSET),
        arx=ArxConfig(l=3, m=3),
        # The attacker's zero at z=1 cancels the PI integrator, leaving a
        # closed-loop root on the unit circle for every PI gain; the check on
        # the identified model therefore rejects the gains, and they are
        # applied regardless.
        compensator=CompensatorConfig(policy=GainPolicy.explicit(2000.0, 1500.0), on_reject="apply"),
        name="sse",
    )
    return GoldenScenario(
        "sse", s,
        ExpectedBounds(detection=(5.010, 5.040), steady_state_error=(0.0, 0.0075)),
        published_model=PUBLISHED_DC_BLOCKER_MODEL,
        description="(0.7z - 0.7)/(z - 1.0001) filter on the control signal from t=5 s",
    )


GOLDEN: dict[str, Callable[[], GoldenScenario]] = {
    "baseline": paper_baseline,
    "gain160": paper_gain_attack,
    "sse": paper_sse_attack,
}


def golden(name: str) -> GoldenScenario:
    try:
        return GOLDEN[name]()
    except KeyError:
        raise KeyError(f"unknown golden scenario {name!r}; choose from {sorted(GOLDEN)}") from None
