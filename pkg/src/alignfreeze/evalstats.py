"""Seed aggregation and the one-standard-deviation significance rule."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

THRESHOLD_RULES = ("baseline_std", "method_std", "max", "pooled")


@dataclass(frozen=True)
class RunStats:
    mean: float
    std: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DataError("RunStats needs at least one score")
        if self.std < 0 or (self.n == 1 and self.std != 0):
            raise DataError("invalid standard deviation")

    def __str__(self):
        return f"{self.mean:.4g}±{self.std:.2g}"


@dataclass(frozen=True)
class SignificanceVerdict:
    direction: str  # "up" | "same" | "down"
    delta: float
    threshold: float

    @property
    def arrow(self):
        return {"up": "↑", "down": "↓", "same": "="}[self.direction]


def aggregate(scores, ddof: int = 1) -> RunStats:
    """Mean and standard deviation over seeds.

    ``ddof=1`` gives the sample deviation, ``ddof=0`` the population one.
    A single score always has zero deviation.
    """
    arr = np.asarray(list(scores), dtype=float)
    if arr.size == 0:
        raise DataError("cannot aggregate an empty score list")
    if ddof not in (0, 1):
        raise ConfigError("ddof must be 0 or 1")
    mean = math.fsum(arr.tolist()) / arr.size
    if arr.size == 1:
        return RunStats(mean, 0.0, 1)
    ss = math.fsum(((arr - mean) ** 2).tolist())
    return RunStats(mean, math.sqrt(ss / (arr.size - ddof)), int(arr.size))


def significance(baseline: RunStats, method: RunStats, rule: str = "max") -> SignificanceVerdict:
    if rule == "baseline_std":
        threshold = baseline.std
    elif rule == "method_std":
        threshold = method.std
    elif rule == "max":
        threshold = max(baseline.std, method.std)
    elif rule == "pooled":
        threshold = math.sqrt((baseline.std**2 + method.std**2) / 2)
    else:
        raise ConfigError(f"unknown threshold rule {rule!r}; choose from {THRESHOLD_RULES}")
    delta = method.mean - baseline.mean
    if delta > threshold:
        direction = "up"
    elif delta < -threshold:
        direction = "down"
    else:
        direction = "same"
    return SignificanceVerdict(direction, delta, threshold)


def count_verdicts(verdicts) -> tuple:
    """Return ``(#up, #down, #same)``; accepts a list or a ``{language: verdict}`` dict."""
    if isinstance(verdicts, dict):
        verdicts = list(verdicts.values())
    if not verdicts:
        raise DataError("no verdicts to count")
    c = Counter(v.direction if isinstance(v, SignificanceVerdict) else v for v in verdicts)
    return c["up"], c["down"], c["same"]
