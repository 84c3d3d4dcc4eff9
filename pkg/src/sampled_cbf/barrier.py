"""Sampled nonsmooth barrier, safe set, domain and extended class-K functions.

Units: the barrier value lives in squared metres (it is a shifted squared
distance); the clearance it certifies is in metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distance import DistanceEvaluation
from .errors import NotSafe


@dataclass(frozen=True)
class BarrierConfig:
    """Sampling error ``epsilon``, safety margin ``gamma`` and domain depth ``r_bar`` (all m^2)."""

    epsilon: float
    gamma: float
    r_bar: float

    def __post_init__(self):
        if self.epsilon < 0 or self.gamma < 0:
            raise ValueError("epsilon and gamma must be non-negative")
        r = self.epsilon + self.gamma
        if not 0 < self.r_bar < r:
            raise ValueError(f"need 0 < r_bar < epsilon + gamma = {r}, got r_bar={self.r_bar}")

    @property
    def r(self):
        return self.epsilon + self.gamma

    @classmethod
    def from_fraction(cls, epsilon, gamma, fraction=0.5):
        """Config with ``r_bar = fraction * (epsilon + gamma)``."""
        if not 0 < fraction < 1:
            raise ValueError("r_bar fraction must lie in (0, 1)")
        return cls(float(epsilon), float(gamma), fraction * (epsilon + gamma))


@dataclass(frozen=True)
class Linear:
    """``alpha(s) = k * s``."""

    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("alpha gain must be positive")

    def __call__(self, s):
        return self.k * s


@dataclass(frozen=True)
class Cubic:
    """``alpha(s) = k * s**3``."""

    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("alpha gain must be positive")

    def __call__(self, s):
        return self.k * s * s * s


AlphaFunction = Linear | Cubic


def barrier_value(evaluation: DistanceEvaluation, cfg: BarrierConfig) -> float:
    return evaluation.min_squared - cfg.epsilon - cfg.gamma


def is_safe(b: float) -> bool:
    return b >= 0.0


def in_domain(b: float, cfg: BarrierConfig) -> bool:
    return b > -cfg.r_bar


def margin_implication(b: float, gamma: float) -> float:
    """Clearance (m) guaranteed by a non-negative barrier value."""
    if b < 0:
        raise NotSafe(f"barrier value {b} is negative; no clearance certified")
    return math.sqrt(gamma)
