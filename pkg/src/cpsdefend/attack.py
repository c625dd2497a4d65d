"""Man-in-the-middle models for the controller-to-plant channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lti import LtiSimState, TransferFunction

KINDS = ("none", "gain", "lti")


@dataclass(frozen=True)
class AttackModel:
    """What the attacker does to ``u`` and from when.

    kind
        ``"none"``, ``"gain"`` (``u' = g u``) or ``"lti"`` (``u' = M(z) u``).
    onset
        Activation time in seconds; the channel is the identity before it.
    """

    kind: str = "none"
    onset: float = 0.0
    gain: float = 1.0
    tf: Optional[TransferFunction] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {KINDS}")
        if self.onset < 0:
            raise ValueError("attack onset must be >= 0")
        if self.kind == "lti" and self.tf is None:
            raise ValueError("lti attack needs a transfer function")

    @classmethod
    def none(cls) -> AttackModel:
        return cls("none")

    @classmethod
    def constant_gain(cls, g: float, onset: float) -> AttackModel:
        return cls("gain", onset=onset, gain=float(g))

    @classmethod
    def filter(cls, m: TransferFunction, onset: float) -> AttackModel:
        return cls("lti", onset=onset, tf=m)

    def as_tf(self, ts: float) -> TransferFunction:
        """The post-onset channel as a transfer function."""
        if self.kind == "lti":
            return self.tf
        g = self.gain if self.kind == "gain" else 1.0
        return TransferFunction.gain(g, ts)


class AttackChannelState:
    """Stateful channel.  The filter starts from rest at the onset sample."""

    def __init__(self, model: AttackModel, onset_index: Optional[int] = None, ts: Optional[float] = None):
        self.model = model
        if onset_index is None:
            onset_index = round(model.onset / ts) if ts else None
        self.onset_index = onset_index
        self.filter = LtiSimState(model.tf) if model.kind == "lti" else None

    def active(self, t: float, k: Optional[int] = None) -> bool:
        if self.model.kind == "none":
            return False
        if k is not None and self.onset_index is not None:
            return k >= self.onset_index
        return t >= self.model.onset

    def apply(self, u_k: float, t: float, k: Optional[int] = None) -> float:
        if not self.active(t, k):
            return u_k
        if self.model.kind == "gain":
            return self.model.gain * u_k
        return self.filter.step(u_k)


def channel_apply(state: AttackChannelState, u_k: float, t: float, k: Optional[int] = None) -> float:
    return state.apply(u_k, t, k)
