"""Closed-loop simulation with detection, identification and controller swap."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .attack import AttackChannelState, AttackModel
from .compensate import (
    DEFAULT_KI_RANGE,
    DEFAULT_KP_RANGE,
    DEFAULT_STEPS,
    GainPolicy,
    GainSelectionError,
    PidGains,
    StabilityRegion,
    pid_tf,
    select_gains,
    stability_region,
)
from .ident import ArxOrders, sqrt_rls_init, rls_init, theta_to_tf
from .ids import DetectorConfig, DetectorState, detect_step, fit_secure_stats
from .lti import LtiSimState, TransferFunction

DIVERGENCE_LIMIT = 1e9


class ScenarioError(ValueError):
    """Scenario violates an invariant; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class StepReference:
    amplitude: float = 1.0
    start: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude if t >= self.start else 0.0


@dataclass(frozen=True)
class ArxConfig:
    l: int = 2
    m: int = 2
    lam: float = 1.0
    p0: float = 1e12
    eps: float = 1e-8
    window: int = 20
    method: str = "qr"

    @property
    def orders(self) -> ArxOrders:
        return ArxOrders(self.l, self.m)


@dataclass(frozen=True)
class CompensatorConfig:
    policy: GainPolicy = field(default_factory=GainPolicy)
    kp_range: tuple = DEFAULT_KP_RANGE
    ki_range: tuple = DEFAULT_KI_RANGE
    steps: int = DEFAULT_STEPS
    # what to do when explicit gains fail the check on the identified model:
    # "keep" the original controller, or "apply" the gains anyway
    on_reject: str = "keep"


@dataclass(frozen=True)
class NoiseConfig:
    std: float
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    plant: TransferFunction
    controller: Union[PidGains, TransferFunction]
    attack: AttackModel = field(default_factory=AttackModel)
    ts: float = 1e-3
    duration: float = 15.0
    secure_until: float = 5.0
    reference: StepReference = field(default_factory=StepReference)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    arx: ArxConfig = field(default_factory=ArxConfig)
    compensator: CompensatorConfig = field(default_factory=CompensatorConfig)
    noise: Optional[NoiseConfig] = None
    latency: int = 0
    ids_enabled: bool = True
    compensation_enabled: bool = True
    name: str = "custom"

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.ts)) + 1

    def index(self, t: float) -> int:
        return int(round(t / self.ts))

    def controller_tf(self) -> TransferFunction:
        if isinstance(self.controller, PidGains):
            return pid_tf(self.controller)
        return self.controller

    def with_toggles(self, ids: Optional[bool] = None, compensation: Optional[bool] = None) -> Scenario:
        ids = self.ids_enabled if ids is None else ids
        comp = self.compensation_enabled if compensation is None else compensation
        return replace(self, ids_enabled=ids, compensation_enabled=comp and ids)

    def validate(self) -> None:
        if not self.ts > 0:
            raise ScenarioError("ts", "sample time must be positive")
        if not self.duration > 0:
            raise ScenarioError("duration", "must be positive")
        if self.plant.ts != self.ts:
            raise ScenarioError("plant", f"sample time {self.plant.ts} != scenario ts {self.ts}")
        if self.controller_tf().ts != self.ts:
            raise ScenarioError("controller", "sample time differs from scenario ts")
        if self.attack.kind == "lti" and self.attack.tf.ts != self.ts:
            raise ScenarioError("attack", "filter sample time differs from scenario ts")
        if self.latency not in (0, 1):
            raise ScenarioError("latency", "must be 0 or 1")
        if self.latency == 0 and not self.plant.strictly_proper:
            raise ScenarioError("latency", "zero feedback latency needs a strictly proper plant")
        if self.secure_until < 2 * self.ts:
            raise ScenarioError("secure_until", "secure phase needs at least 2 samples")
        if self.secure_until > self.duration:
            raise ScenarioError("secure_until", "secure phase longer than the run")
        if self.attack.kind != "none":
            # the secure window covers t < secure_until, so an onset exactly at
            # secure_until is attack-free for the whole window
            if self.index(self.attack.onset) < self.index(self.secure_until):
                raise ScenarioError("attack.onset", "attack starts inside the secure phase")
            if self.attack.onset > self.duration:
                raise ScenarioError("attack.onset", "attack starts after the end of the run")
        if self.compensator.on_reject not in ("keep", "apply"):
            raise ScenarioError("compensator.on_reject", "must be 'keep' or 'apply'")
        if self.arx.method not in ("qr", "covariance"):
            raise ScenarioError("arx.method", "must be 'qr' or 'covariance'")
        if self.noise is not None and self.noise.std < 0:
            raise ScenarioError("noise.std", "must be >= 0")


@dataclass
class SimEvents:
    secure_mean: Optional[float] = None
    secure_std: Optional[float] = None
    thresholds: Optional[tuple] = None
    detection_time: Optional[float] = None
    ident_complete_time: Optional[float] = None
    ident_error_at_completion: Optional[float] = None
    identified_tf: Optional[TransferFunction] = None
    identification_failed: bool = False
    gains: Optional[PidGains] = None
    gains_verified: Optional[bool] = None
    gain_rejection: Optional[str] = None
    swap_time: Optional[float] = None
    region: Optional[StabilityRegion] = None
    diverged: bool = False
    final_prediction_error: Optional[float] = None


COLUMNS = ("t", "r", "e", "u", "u_attacked", "y", "y_model", "residual", "ids_flag", "controller_id")


@dataclass
class SimLog:
    scenario: Scenario
    t: np.ndarray
    r: np.ndarray
    e: np.ndarray
    u: np.ndarray
    u_attacked: np.ndarray
    y: np.ndarray
    y_model: np.ndarray
    residual: np.ndarray
    ids_flag: np.ndarray
    controller_id: np.ndarray
    theta: np.ndarray
    prediction_error: np.ndarray
    events: SimEvents

    def __len__(self):
        return self.t.size

    def at(self, t: float) -> int:
        return self.scenario.index(t)


def _clamp(x: np.ndarray) -> np.ndarray:
    return np.nan_to_num(
        np.clip(x, -DIVERGENCE_LIMIT, DIVERGENCE_LIMIT),
        nan=DIVERGENCE_LIMIT, posinf=DIVERGENCE_LIMIT, neginf=-DIVERGENCE_LIMIT,
    )


def run_scenario(s: Scenario) -> SimLog:
    s.validate()
    n = s.n_samples
    ts = s.ts
    secure_k = s.index(s.secure_until)
    orders = s.arx.orders
    lag = orders.lag

    plant = LtiSimState(s.plant)
    model = LtiSimState(s.plant)
    controller = LtiSimState(s.controller_tf())
    channel = AttackChannelState(s.attack, onset_index=s.index(s.attack.onset))
    rng = np.random.default_rng(s.noise.seed) if s.noise is not None and s.noise.std > 0 else None

    cols = {c: np.zeros(n) for c in COLUMNS}
    ids_flag = np.zeros(n, dtype=bool)
    ctrl_id = np.zeros(n, dtype=int)
    theta_log = np.full((n, orders.n_params), np.nan)
    err_log = np.full(n, np.nan)
    ev = SimEvents()

    secure_residuals = []
    detector: Optional[DetectorState] = None
    rls = None
    buf_u, buf_y = [], []
    streak = 0
    pending_swap: Optional[PidGains] = None
    active_id = 0
    y_prev = 0.0

    for k in range(n):
        t = k * ts
        if pending_swap is not None:
            controller = LtiSimState(pid_tf(pending_swap))
            active_id = 1
            ev.swap_time = t
            pending_swap = None

        noise = rng.normal(0.0, s.noise.std) if rng is not None else 0.0
        r_k = s.reference(t)
        if s.latency == 0:
            y_fb = plant.peek() + noise
        else:
            y_fb = y_prev
        e_k = r_k - y_fb
        u_k = controller.step(e_k)
        ua_k = channel.apply(u_k, t, k)
        y_k = plant.step(ua_k) + noise
        ym_k = model.step(u_k)
        res = y_k - ym_k
        y_prev = y_k
        if abs(y_k) > DIVERGENCE_LIMIT or not np.isfinite(y_k):
            ev.diverged = True

        if s.ids_enabled:
            if k < secure_k:
                secure_residuals.append(res)
            else:
                if detector is None:
                    stats = fit_secure_stats(secure_residuals)
                    detector = DetectorState.armed(s.detector, stats)
                    ev.secure_mean, ev.secure_std = stats.mean, stats.std
                    ev.thresholds = (detector.lambda_low, detector.lambda_upp)
                was_flagged = detector.flag
                detect_step(detector, res, t)
                if detector.flag and not was_flagged:
                    ev.detection_time = t
                    init = sqrt_rls_init if s.arx.method == "qr" else rls_init
                    rls = init(orders, s.arx.lam, s.arx.p0)

        if rls is not None:
            buf_u.append(u_k)
            buf_y.append(y_k)
            if len(buf_y) > lag:
                phi = [-buf_y[-1 - i] for i in range(1, orders.l + 1)]
                phi += [buf_u[-1 - i] for i in range(1, orders.m + 1)]
                err = rls.update(phi, y_k)
                err_log[k] = err
                ev.final_prediction_error = abs(err)
                streak = streak + 1 if abs(err) < s.arx.eps else 0
                if ev.ident_complete_time is None and streak >= s.arx.window:
                    ev.ident_complete_time = t
                    ev.ident_error_at_completion = abs(err)
                    ev.identified_tf = theta_to_tf(rls.arx_theta, ts)
                    if s.compensation_enabled:
                        pending_swap = _choose_gains(s, ev)
                del buf_u[:-lag - 1], buf_y[:-lag - 1]
            theta_log[k] = rls.theta

        cols["t"][k] = t
        cols["r"][k] = r_k
        cols["e"][k] = e_k
        cols["u"][k] = u_k
        cols["u_attacked"][k] = ua_k
        cols["y"][k] = y_k
        cols["y_model"][k] = ym_k
        cols["residual"][k] = res
        ids_flag[k] = detector is not None and detector.flag
        ctrl_id[k] = active_id

    if ev.detection_time is not None and ev.ident_complete_time is None:
        ev.identification_failed = True

    return SimLog(
        scenario=s,
        t=cols["t"],
        r=cols["r"],
        e=_clamp(cols["e"]),
        u=_clamp(cols["u"]),
        u_attacked=_clamp(cols["u_attacked"]),
        y=_clamp(cols["y"]),
        y_model=_clamp(cols["y_model"]),
        residual=_clamp(cols["residual"]),
        ids_flag=ids_flag,
        controller_id=ctrl_id,
        theta=theta_log,
        prediction_error=err_log,
        events=ev,
    )


def _choose_gains(s: Scenario, ev: SimEvents) -> Optional[PidGains]:
    g = ev.identified_tf
    c = s.compensator
    region = stability_region(g, c.kp_range, c.ki_range, c.steps)
    ev.region = region
    try:
        gains = select_gains(region, g, c.policy)
        ev.gains_verified = True
    except GainSelectionError as exc:
        ev.gain_rejection = str(exc)
        ev.gains_verified = False
        if c.policy.kind != "explicit" or c.on_reject != "apply":
            return None
        gains = PidGains(c.policy.kp, c.policy.ki, ts=s.ts)
    ev.gains = gains
    return gains


@dataclass
class SummaryReport:
    scenario: str
    detection_time: Optional[float]
    detection_latency: Optional[float]
    ident_complete_time: Optional[float]
    final_prediction_error: Optional[float]
    identified_num: Optional[list]
    identified_den: Optional[list]
    gains: Optional[dict]
    gains_verified: Optional[bool]
    swap_time: Optional[float]
    peak_output: float
    steady_state_error: float
    diverged: bool
    identification_failed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def steady_state_error(log: SimLog, fraction: float = 0.05) -> float:
    """Mean ``|r - y|`` over the final ``fraction`` of the samples."""
    n = max(1, int(round(len(log) * fraction)))
    return float(np.mean(np.abs(log.r[-n:] - log.y[-n:])))


def summarize(log: SimLog) -> SummaryReport:
    ev = log.events
    s = log.scenario
    latency = None
    if ev.detection_time is not None and s.attack.kind != "none":
        latency = (s.index(ev.detection_time) - s.index(s.attack.onset)) * s.ts
    tf = ev.identified_tf
    return SummaryReport(
        scenario=s.name,
        detection_time=ev.detection_time,
        detection_latency=latency,
        ident_complete_time=ev.ident_complete_time,
        final_prediction_error=ev.final_prediction_error,
        identified_num=tf.num.tolist() if tf is not None else None,
        identified_den=tf.den.tolist() if tf is not None else None,
        gains={"kp": ev.gains.kp, "ki": ev.gains.ki, "kd": ev.gains.kd} if ev.gains else None,
        gains_verified=ev.gains_verified,
        swap_time=ev.swap_time,
        peak_output=float(np.max(np.abs(log.y))),
        steady_state_error=steady_state_error(log),
        diverged=ev.diverged,
        identification_failed=ev.identification_failed,
    )
