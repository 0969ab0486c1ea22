"""Result container shared by the tilting scheme and the closed-form estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class Method(str, Enum):
    CLT = "CLT"
    SMALL_MODERATE = "SmallModerate"
    TRUE_MODERATE = "TrueModerate"
    SIMPLIFIED = "Simplified"
    SCHEME_EXACT = "SchemeExact"
    LARGE_UPPER_BOUND = "LargeUpperBound"


class Quality(str, Enum):
    EQUIVALENT = "Equivalent"
    UPPER_BOUND = "UpperBound"
    HEURISTIC = "Heuristic"


@dataclass(frozen=True)
class DeviationEstimate:
    """P[X_N >= x] approximated as prefactor * exp(exponent), clamped to [0, 1]."""

    probability: float
    log_probability: float
    prefactor: float
    exponent: float
    method: Method
    quality: Quality
    flags: tuple[str, ...] = field(default=())

    @classmethod
    def from_parts(cls, prefactor: float, exponent: float, method: Method, quality: Quality, flags=()):
        if prefactor < 0 or not math.isfinite(exponent) and exponent != -math.inf:
            raise ValueError("prefactor must be nonnegative and exponent finite or -inf")
        if prefactor == 0 or exponent == -math.inf:
            log_p = -math.inf
        else:
            log_p = math.log(prefactor) + exponent
        prob = 1.0 if log_p >= 0 else math.exp(log_p)
        return cls(prob, log_p, prefactor, exponent, Method(method), Quality(quality), tuple(flags))

    @classmethod
    def from_log_parts(cls, log_prefactor: float, exponent: float, method: Method, quality: Quality, flags=()):
        """Like ``from_parts`` but keeps log_probability exact when the prefactor underflows."""
        log_p = log_prefactor + exponent
        prob = 1.0 if log_p >= 0 else math.exp(log_p)
        return cls(prob, log_p, math.exp(log_prefactor), exponent, Method(method), Quality(quality), tuple(flags))

    def as_row(self) -> dict:
        return {
            "method": self.method.value,
            "probability": self.probability,
            "log_probability": self.log_probability,
            "prefactor": self.prefactor,
            "exponent": self.exponent,
            "quality": self.quality.value,
            "flags": ";".join(self.flags),
        }
