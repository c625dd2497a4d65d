"""Scenario files: flat ``section.key = value`` lines (a TOML subset).

Example::

    name = "gain160"
    ts = 0.001
    plant.num = [9.96e-07, 9.92e-07]
    plant.den = [1.0, -1.988, 0.9881]
    attack.kind = "gain"
    attack.gain = 160.0

Every key is optional except ``plant.num``/``plant.den`` and the controller.
Unknown keys are rejected so that typos surface as errors.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .attack import AttackModel
from .compensate import GainPolicy, PidGains
from .ids import DetectorConfig
from .lti import TransferFunction
from .sim import ArxConfig, CompensatorConfig, NoiseConfig, Scenario, ScenarioError, StepReference


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"field '{field}': {message}")
        self.field = field


NUMBER = "number"
INT = "int"
BOOL = "bool"
STR = "str"
VECTOR = "vector"
PAIR = "pair"

SCHEMA = {
    "name": STR, "ts": NUMBER, "duration": NUMBER, "secure_until": NUMBER, "latency": INT,
    "plant.num": VECTOR, "plant.den": VECTOR,
    "controller.kp": NUMBER, "controller.ki": NUMBER, "controller.kd": NUMBER,
    "controller.filter_n": NUMBER, "controller.num": VECTOR, "controller.den": VECTOR,
    "reference.amplitude": NUMBER, "reference.start": NUMBER,
    "attack.kind": STR, "attack.onset": NUMBER, "attack.gain": NUMBER,
    "attack.num": VECTOR, "attack.den": VECTOR,
    "detector.enabled": BOOL, "detector.eta": NUMBER, "detector.sigma_floor": NUMBER,
    "detector.persistence": INT,
    "arx.l": INT, "arx.m": INT, "arx.lambda": NUMBER, "arx.p0": NUMBER, "arx.eps": NUMBER,
    "arx.window": INT, "arx.method": STR,
    "compensator.enabled": BOOL, "compensator.policy": STR, "compensator.kp": NUMBER,
    "compensator.ki": NUMBER, "compensator.kp_range": PAIR, "compensator.ki_range": PAIR,
    "compensator.steps": INT, "compensator.on_reject": STR,
    "noise.std": NUMBER, "noise.seed": INT,
    "region.num": VECTOR, "region.den": VECTOR,
}


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    region_system: Optional[TransferFunction] = None


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value: Any):
    kind = SCHEMA[key]
    is_num = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)
    if kind == NUMBER and is_num(value):
        return float(value)
    if kind == INT and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind == BOOL and isinstance(value, bool):
        return value
    if kind == STR and isinstance(value, str):
        return value
    if kind in (VECTOR, PAIR) and isinstance(value, list) and value and all(is_num(x) for x in value):
        if kind == PAIR and len(value) != 2:
            raise ConfigError(key, "expected a [low, high] pair")
        return [float(x) for x in value]
    raise ConfigError(key, f"expected {kind}, got {value!r}")


def parse_config(text: str) -> ScenarioFile:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<syntax>", str(exc)) from None
    flat = _flatten(raw)
    for key in flat:
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
    cfg = {k: _coerce(k, v) for k, v in flat.items()}
    return _build(cfg)


def load_config(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _tf(cfg: dict, prefix: str, ts: float, required: bool = False) -> Optional[TransferFunction]:
    num, den = cfg.get(f"{prefix}.num"), cfg.get(f"{prefix}.den")
    if num is None and den is None:
        if required:
            raise ConfigError(f"{prefix}.num", "missing")
        return None
    if num is None or den is None:
        missing = f"{prefix}.num" if num is None else f"{prefix}.den"
        raise ConfigError(missing, "numerator and denominator must both be given")
    try:
        return TransferFunction(num, den, ts)
    except ValueError as exc:
        raise ConfigError(f"{prefix}.num", str(exc)) from None


def _build(cfg: dict) -> ScenarioFile:
    ts = cfg.get("ts", 1e-3)
    if not ts > 0:
        raise ConfigError("ts", "must be positive")
    plant = _tf(cfg, "plant", ts, required=True)

    controller = _tf(cfg, "controller", ts)
    gain_keys = [k for k in ("controller.kp", "controller.ki", "controller.kd") if k in cfg]
    if controller is not None and gain_keys:
        raise ConfigError(gain_keys[0], "give either controller gains or controller.num/den, not both")
    if controller is None:
        if "controller.kp" not in cfg:
            raise ConfigError("controller.kp", "missing")
        controller = PidGains(
            cfg["controller.kp"], cfg.get("controller.ki", 0.0), cfg.get("controller.kd", 0.0),
            cfg.get("controller.filter_n", 100.0), ts,
        )

    kind = cfg.get("attack.kind", "none")
    onset = cfg.get("attack.onset", 0.0)
    try:
        if kind == "none":
            attack = AttackModel.none()
        elif kind == "gain":
            if "attack.gain" not in cfg:
                raise ConfigError("attack.gain", "missing for a gain attack")
            attack = AttackModel.constant_gain(cfg["attack.gain"], onset)
        elif kind == "lti":
            attack = AttackModel.filter(_tf(cfg, "attack", ts, required=True), onset)
        else:
            raise ConfigError("attack.kind", f"unknown kind {kind!r} (none, gain, lti)")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("attack.onset", str(exc)) from None

    try:
        detector = DetectorConfig(
            cfg.get("detector.eta", 3.0),
            cfg.get("detector.sigma_floor", DetectorConfig.sigma_floor),
            cfg.get("detector.persistence", 1),
        )
    except ValueError as exc:
        raise ConfigError("detector", str(exc)) from None

    try:
        arx = ArxConfig(
            cfg.get("arx.l", 2), cfg.get("arx.m", 2), cfg.get("arx.lambda", 1.0),
            cfg.get("arx.p0", ArxConfig.p0), cfg.get("arx.eps", ArxConfig.eps),
            cfg.get("arx.window", ArxConfig.window), cfg.get("arx.method", "qr"),
        )
        arx.orders
    except ValueError as exc:
        raise ConfigError("arx.l", str(exc)) from None
    if not 0 < arx.lam <= 1:
        raise ConfigError("arx.lambda", "must lie in (0, 1]")
    if not arx.p0 > 0:
        raise ConfigError("arx.p0", "must be positive")

    policy_name = cfg.get("compensator.policy", "explicit" if "compensator.kp" in cfg else "min_max_root")
    try:
        if policy_name == "explicit":
            for k in ("compensator.kp", "compensator.ki"):
                if k not in cfg:
                    raise ConfigError(k, "missing for the explicit gain policy")
            policy = GainPolicy.explicit(cfg["compensator.kp"], cfg["compensator.ki"])
        else:
            policy = GainPolicy(policy_name)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("compensator.policy", str(exc)) from None
    comp = CompensatorConfig(
        policy,
        tuple(cfg.get("compensator.kp_range", CompensatorConfig.kp_range)),
        tuple(cfg.get("compensator.ki_range", CompensatorConfig.ki_range)),
        cfg.get("compensator.steps", CompensatorConfig.steps),
        cfg.get("compensator.on_reject", "keep"),
    )

    noise = None
    if "noise.std" in cfg:
        noise = NoiseConfig(cfg["noise.std"], cfg.get("noise.seed", 0))

    ids_on = cfg.get("detector.enabled", True)
    scenario = Scenario(
        plant=plant,
        controller=controller,
        attack=attack,
        ts=ts,
        duration=cfg.get("duration", 15.0),
        secure_until=cfg.get("secure_until", 5.0),
        reference=StepReference(cfg.get("reference.amplitude", 1.0), cfg.get("reference.start", 0.0)),
        detector=detector,
        arx=arx,
        compensator=comp,
        noise=noise,
        latency=cfg.get("latency", 0),
        ids_enabled=ids_on,
        compensation_enabled=cfg.get("compensator.enabled", True) and ids_on,
        name=cfg.get("name", "custom"),
    )
    try:
        scenario.validate()
    except ScenarioError as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1]) from None
    return ScenarioFile(scenario, _tf(cfg, "region", ts))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(s: Scenario, region_system: Optional[TransferFunction] = None) -> str:
    """Serialize a scenario to the flat key/value format (round-trips through ``parse_config``)."""
    items: list[tuple[str, Any]] = [
        ("name", s.name), ("ts", s.ts), ("duration", s.duration),
        ("secure_until", s.secure_until), ("latency", s.latency),
        ("plant.num", s.plant.num.tolist()), ("plant.den", s.plant.den.tolist()),
    ]
    if isinstance(s.controller, PidGains):
        c = s.controller
        items += [("controller.kp", c.kp), ("controller.ki", c.ki), ("controller.kd", c.kd),
                  ("controller.filter_n", c.filter_n)]
    else:
        items += [("controller.num", s.controller.num.tolist()),
                  ("controller.den", s.controller.den.tolist())]
    items += [("reference.amplitude", s.reference.amplitude), ("reference.start", s.reference.start)]
    a = s.attack
    items.append(("attack.kind", a.kind))
    if a.kind != "none":
        items.append(("attack.onset", a.onset))
    if a.kind == "gain":
        items.append(("attack.gain", a.gain))
    elif a.kind == "lti":
        items += [("attack.num", a.tf.num.tolist()), ("attack.den", a.tf.den.tolist())]
    d = s.detector
    items += [("detector.enabled", s.ids_enabled), ("detector.eta", d.eta),
              ("detector.sigma_floor", d.sigma_floor), ("detector.persistence", d.persistence)]
    x = s.arx
    items += [("arx.l", x.l), ("arx.m", x.m), ("arx.lambda", x.lam), ("arx.p0", x.p0),
              ("arx.eps", x.eps), ("arx.window", x.window), ("arx.method", x.method)]
    c = s.compensator
    items += [("compensator.enabled", s.compensation_enabled), ("compensator.policy", c.policy.kind)]
    if c.policy.kind == "explicit":
        items += [("compensator.kp", c.policy.kp), ("compensator.ki", c.policy.ki)]
    items += [("compensator.kp_range", list(c.kp_range)), ("compensator.ki_range", list(c.ki_range)),
              ("compensator.steps", c.steps), ("compensator.on_reject", c.on_reject)]
    if s.noise is not None:
        items += [("noise.std", s.noise.std), ("noise.seed", s.noise.seed)]
    if region_system is not None:
        items += [("region.num", region_system.num.tolist()), ("region.den", region_system.den.tolist())]
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in items)
