"""Residual-threshold intrusion detection.

Residual statistics are learned over an attack-free window; afterwards any
residual outside ``mean +/- eta * std`` counts as a violation, and
``persistence`` consecutive violations raise a latching alarm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted


class DetectorError(RuntimeError):
    pass


@dataclass(frozen=True)
class SecureStats:
    mean: float
    std: float
    sample_count: int


@dataclass(frozen=True)
class DetectorConfig:
    # sigma_floor is in plant-output units; see README for how it was chosen
    eta: float = 3.0
    sigma_floor: float = 2e-3
    persistence: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")
        if int(self.persistence) < 1:
            raise ValueError("persistence must be >= 1")


def fit_secure_stats(residuals) -> SecureStats:
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 2:
        raise ValueError(f"need at least 2 secure-phase residuals, got {r.size}")
    return SecureStats(float(r.mean()), float(r.std(ddof=1)), int(r.size))


def thresholds(stats: SecureStats, config: DetectorConfig) -> tuple[float, float]:
    s_eff = max(stats.std, config.sigma_floor)
    return stats.mean - config.eta * s_eff, stats.mean + config.eta * s_eff


@dataclass
class DetectorState:
    config: DetectorConfig
    stats: Optional[SecureStats] = None
    lambda_low: float = -np.inf
    lambda_upp: float = np.inf
    counter: int = 0
    flag: bool = False
    detection_time: Optional[float] = None

    @classmethod
    def armed(cls, config: DetectorConfig, stats: SecureStats) -> DetectorState:
        low, upp = thresholds(stats, config)
        return cls(config, stats, low, upp)

    @property
    def is_armed(self) -> bool:
        return self.stats is not None


def detect_step(state: DetectorState, residual: float, t: float) -> DetectorState:
    """Advance the detector by one sample (mutates and returns ``state``)."""
    if not state.is_armed:
        raise DetectorError("detector used before the secure phase finished")
    if state.lambda_low <= residual <= state.lambda_upp:
        state.counter = 0
    else:
        state.counter += 1
    if not state.flag and state.counter >= state.config.persistence:
        state.flag = True
        state.detection_time = t
    return state


class ResidualDetector(BaseEstimator):
    """Estimator wrapper: ``fit`` on secure residuals, ``predict`` alarm flags.

    ``predict`` returns the latched flag for each residual in the stream.
    """

    def __init__(self, eta=3.0, sigma_floor=2e-3, persistence=1):
        self.eta = eta
        self.sigma_floor = sigma_floor
        self.persistence = persistence

    def fit(self, residuals, y=None):
        r = check_array(residuals, ensure_2d=False, dtype=float).ravel()
        self.config_ = DetectorConfig(self.eta, self.sigma_floor, self.persistence)
        self.stats_ = fit_secure_stats(r)
        self.threshold_low_, self.threshold_high_ = thresholds(self.stats_, self.config_)
        return self

    def predict(self, residuals, t=None):
        check_is_fitted(self, "stats_")
        r = check_array(residuals, ensure_2d=False, dtype=float).ravel()
        times = np.arange(r.size, dtype=float) if t is None else np.asarray(t, dtype=float)
        state = DetectorState.armed(self.config_, self.stats_)
        flags = np.zeros(r.size, dtype=bool)
        for i, (ri, ti) in enumerate(zip(r, times)):
            flags[i] = detect_step(state, ri, ti).flag
        return flags

    def first_detection(self, residuals, t=None) -> Optional[float]:
        flags = self.predict(residuals, t)
        idx = np.flatnonzero(flags)
        if idx.size == 0:
            return None
        times = np.arange(flags.size, dtype=float) if t is None else np.asarray(t, dtype=float)
        return float(times[idx[0]])
