"""Small shared value types used across the driving stack."""

from dataclasses import dataclass


@dataclass(frozen=True)
class DriveCommand:
    """Actuation output of every brain: linear m/s (forward-only), angular rad/s."""

    v: float
    w: float


@dataclass(frozen=True)
class Limits:
    """Command limits; also the normalization constants for model outputs."""

    v_max: float = 12.0
    w_max: float = 2.5

    def clamp(self, v, w):
        v = min(max(v, 0.0), self.v_max)
        w = min(max(w, -self.w_max), self.w_max)
        return DriveCommand(v, w)
