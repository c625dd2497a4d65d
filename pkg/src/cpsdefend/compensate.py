"""Discrete PI/PID controllers and their closed-loop stability regions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .lti import (
    BOUNDARY_TOL,
    Polynomial,
    TransferFunction,
    _check_ts,
    is_stable,
    is_stable_batch,
)

DEFAULT_KP_RANGE = (0.0, 5000.0)
DEFAULT_KI_RANGE = (0.0, 5000.0)
# 201 nodes -> spacing 25, so the usual round-number gains sit on grid nodes
DEFAULT_STEPS = 201


class DegenerateLoopError(ValueError):
    """Characteristic polynomial is constant (or zero)."""


class GainSelectionError(RuntimeError):
    """No acceptable gains: empty stable set or rejected explicit gains."""


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float = 0.0
    filter_n: float = 100.0
    ts: float = 1e-3

    def __post_init__(self):
        if not self.ts > 0:
            raise ValueError("sample time must be positive")


def pid_tf(gains: PidGains) -> TransferFunction:
    """Discrete controller ``kp + ki Ts/(z-1) + kd N / (1 + N Ts/(z-1))``.

    With ``kd == 0`` this is the PI form ``(kp z + ki Ts - kp) / (z - 1)``;
    the ``(z - 1)`` factors are never cancelled, even for ``ki == 0``.
    """
    kp, ki, kd, n, ts = gains.kp, gains.ki, gains.kd, gains.filter_n, gains.ts
    integ = Polynomial([1.0, -1.0])
    if kd == 0:
        return TransferFunction(Polynomial([kp, ki * ts - kp]), integ, ts)
    filt = Polynomial([1.0, n * ts - 1.0])
    num = (
        Polynomial([kp]) * integ * filt
        + Polynomial([ki * ts]) * filt
        + Polynomial([kd * n]) * integ * integ
    )
    return TransferFunction(num, integ * filt, ts)


def char_poly(g: TransferFunction, c: TransferFunction) -> Polynomial:
    """Monic numerator of ``1 + G(z) C(z)``."""
    _check_ts(g, c)
    p = g.den * c.den + g.num * c.num
    if p.degree < 1:
        raise DegenerateLoopError(f"characteristic polynomial {p.tolist()} has no roots to test")
    return p.monic()


def _pi_char_coeffs(g: TransferFunction, kp, ki) -> np.ndarray:
    """Characteristic coefficients for many PI gain pairs at once.

    The polynomial is affine in the gains:
    ``den_G (z-1) + kp num_G (z-1) + ki Ts num_G``.
    """
    integ = np.array([1.0, -1.0])
    base = np.convolve(g.den.coeffs, integ)
    width = base.size
    p_kp = np.convolve(g.num.coeffs, integ)
    p_ki = g.num.coeffs * g.ts

    def pad(c):
        out = np.zeros(width)
        out[width - c.size:] = c
        return out

    kp = np.asarray(kp, dtype=float)[..., None]
    ki = np.asarray(ki, dtype=float)[..., None]
    return pad(base) + kp * pad(p_kp) + ki * pad(p_ki)


def _max_root_moduli(coeffs: np.ndarray) -> np.ndarray:
    """Largest root modulus of each row, via batched companion eigenvalues."""
    c = np.atleast_2d(coeffs)
    c = c / c[:, :1]
    n = c.shape[1] - 1
    comp = np.zeros((c.shape[0], n, n))
    comp[:, 0, :] = -c[:, 1:]
    if n > 1:
        idx = np.arange(n - 1)
        comp[:, idx + 1, idx] = 1.0
    return np.abs(np.linalg.eigvals(comp)).max(axis=1)


@dataclass
class StabilityRegion:
    """Stability verdicts on a (kp, ki) grid; ``mask[i, j]`` is ``(kp_axis[i], ki_axis[j])``."""

    kp_axis: np.ndarray
    ki_axis: np.ndarray
    mask: np.ndarray
    system: TransferFunction
    margin: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mask.shape != (self.kp_axis.size, self.ki_axis.size):
            raise ValueError("mask shape does not match the axes")

    @property
    def n_stable(self) -> int:
        return int(self.mask.sum())

    def cell(self, kp: float, ki: float) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.kp_axis - kp))), int(np.argmin(np.abs(self.ki_axis - ki)))

    def stable_at(self, kp: float, ki: float) -> bool:
        """Verdict of the grid cell nearest to ``(kp, ki)``."""
        return bool(self.mask[self.cell(kp, ki)])

    def rows(self):
        for i, kp in enumerate(self.kp_axis):
            for j, ki in enumerate(self.ki_axis):
                yield float(kp), float(ki), bool(self.mask[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kp", "ki", "stable"])
            for kp, ki, ok in self.rows():
                w.writerow([repr(kp), repr(ki), int(ok)])


def stability_region(
    g: TransferFunction,
    kp_range=DEFAULT_KP_RANGE,
    ki_range=DEFAULT_KI_RANGE,
    steps=DEFAULT_STEPS,
    with_margin: bool = False,
    tol: float = BOUNDARY_TOL,
) -> StabilityRegion:
    """Sweep PI gains on a uniform grid (``kd = 0``)."""
    n_kp, n_ki = (steps, steps) if np.isscalar(steps) else steps
    if n_kp < 2 or n_ki < 2:
        raise ValueError("need at least 2 grid steps per axis")
    kp_axis = np.linspace(kp_range[0], kp_range[1], int(n_kp))
    ki_axis = np.linspace(ki_range[0], ki_range[1], int(n_ki))
    KP, KI = np.meshgrid(kp_axis, ki_axis, indexing="ij")
    coeffs = _pi_char_coeffs(g, KP.ravel(), KI.ravel())
    mask = is_stable_batch(coeffs, tol).reshape(KP.shape)
    margin = None
    if with_margin:
        margin = np.full(KP.shape, np.inf)
        lead_ok = np.abs(coeffs[:, 0]) > 0
        flat = margin.ravel()
        flat[lead_ok] = _max_root_moduli(coeffs[lead_ok])
        margin = flat.reshape(KP.shape)
    return StabilityRegion(kp_axis, ki_axis, mask, g, margin)


@dataclass(frozen=True)
class GainPolicy:
    """``explicit`` uses the configured ``(kp, ki)``; ``min_max_root`` searches the grid."""

    kind: str = "min_max_root"
    kp: Optional[float] = None
    ki: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("explicit", "min_max_root"):
            raise ValueError(f"unknown gain policy {self.kind!r}")
        if self.kind == "explicit" and (self.kp is None or self.ki is None):
            raise ValueError("explicit policy needs kp and ki")

    @classmethod
    def explicit(cls, kp: float, ki: float) -> GainPolicy:
        return cls("explicit", float(kp), float(ki))


def pi_is_stable(g: TransferFunction, kp: float, ki: float, tol: float = BOUNDARY_TOL) -> bool:
    try:
        return is_stable(char_poly(g, pid_tf(PidGains(kp, ki, ts=g.ts))), tol)
    except DegenerateLoopError:
        return False


def select_gains(region: StabilityRegion, g: TransferFunction, policy: GainPolicy) -> PidGains:
    if policy.kind == "explicit":
        if not pi_is_stable(g, policy.kp, policy.ki):
            raise GainSelectionError(
                f"explicit gains kp={policy.kp:g}, ki={policy.ki:g} do not stabilize the identified system"
            )
        return PidGains(policy.kp, policy.ki, ts=g.ts)

    if region.n_stable == 0:
        raise GainSelectionError("stability region is empty")
    ii, jj = np.nonzero(region.mask)
    kp = region.kp_axis[ii]
    ki = region.ki_axis[jj]
    if region.margin is not None:
        moduli = region.margin[ii, jj]
    else:
        moduli = _max_root_moduli(_pi_char_coeffs(g, kp, ki))
    # lexsort: last key is primary -> modulus, then kp, then ki
    best = np.lexsort((ki, kp, moduli))[0]
    return PidGains(float(kp[best]), float(ki[best]), ts=g.ts)


class PiCompensator(BaseEstimator):
    """Fit a stabilizing PI controller to an (identified) system.

    ``fit`` takes the system transfer function, sweeps the gain grid and picks
    gains per the policy.  ``kp``/``ki`` given means explicit gains.
    """

    def __init__(self, kp=None, ki=None, kp_range=DEFAULT_KP_RANGE, ki_range=DEFAULT_KI_RANGE,
                 steps=DEFAULT_STEPS):
        self.kp = kp
        self.ki = ki
        self.kp_range = kp_range
        self.ki_range = ki_range
        self.steps = steps

    def _policy(self) -> GainPolicy:
        if self.kp is None and self.ki is None:
            return GainPolicy("min_max_root")
        return GainPolicy.explicit(self.kp, self.ki)

    def fit(self, system: TransferFunction, y=None):
        self.region_ = stability_region(system, self.kp_range, self.ki_range, self.steps)
        self.gains_ = select_gains(self.region_, system, self._policy())
        self.controller_ = pid_tf(self.gains_)
        return self

    def is_stabilizing(self, system: TransferFunction) -> bool:
        check_is_fitted(self, "gains_")
        return pi_is_stable(system, self.gains_.kp, self.gains_.ki)
