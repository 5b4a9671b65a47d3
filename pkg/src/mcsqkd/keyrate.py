"""Asymptotic secret-key rate per pulse pair."""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["KeyRateInputs", "binary_entropy", "key_rate", "DEFAULT_F_EC"]

DEFAULT_F_EC = 1.2


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class KeyRateInputs:
    p1_a: float
    p1_b: float
    y11_z: float
    e11_x: float
    q_z: float
    e_z: float
    f_ec: float = DEFAULT_F_EC

    def __post_init__(self):
        for name in ("p1_a", "p1_b", "y11_z", "e11_x", "q_z", "e_z"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.f_ec < 1.0:
            raise ValueError("reconciliation efficiency must be >= 1")


def key_rate(inputs: KeyRateInputs) -> float:
    """Single-photon privacy term minus error-correction leakage; may be negative."""
    privacy = inputs.p1_a * inputs.p1_b * inputs.y11_z * (1.0 - binary_entropy(inputs.e11_x))
    leakage = inputs.q_z * inputs.f_ec * binary_entropy(inputs.e_z)
    return privacy - leakage
