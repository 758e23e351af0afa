"""QoS requirements expressed as minimum downlink rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrafficSpec:
    L_s: float = 1048.0       # bits, delay-sensitive packet
    lambda_s: float = 4.0     # packets/s
    D_max: float = 0.01       # s
    varrho: float = 1e-3      # delay-bound violation probability
    L_n: float = 9000.0       # bits, delay-tolerant packet
    lambda_n: float = 20.0    # packets/s

    def __post_init__(self):
        if min(self.L_s, self.lambda_s, self.D_max, self.L_n) <= 0 or self.lambda_n < 0:
            raise ValueError("traffic parameters must be positive")
        if not 0.0 < self.varrho < 1.0:
            raise ValueError("varrho must lie in (0, 1)")


def min_rate_sensitive(spec: TrafficSpec) -> float:
    """Effective-bandwidth rate (bit/s) keeping P(delay > D_max) <= varrho."""
    lv = math.log(spec.varrho)
    return -spec.L_s * lv / (spec.D_max * math.log(1.0 - lv / (spec.lambda_s * spec.D_max)))


def min_rate_tolerant(spec: TrafficSpec) -> float:
    return spec.lambda_n * spec.L_n


def rate_floors(sensitive: np.ndarray, spec: TrafficSpec) -> np.ndarray:
    """Per-vehicle minimum rate in bit/s."""
    return np.where(sensitive, min_rate_sensitive(spec), min_rate_tolerant(spec))
