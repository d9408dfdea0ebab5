"""Percentile filtering of a parallel corpus by external quality scores."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

from .errors import DataError, ParseError

# Percentile grid used for the corpus-quality sweep.
QE_PERCENTILES = (0, 25, 37, 50, 62, 75)


class ScoredPair(NamedTuple):
    index: int
    score: float


def _rank(p, n):
    p = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    if not 0 <= p <= 100:
        raise ValueError(f"percentile {p} outside [0, 100]")
    return max(1, math.ceil(p * n / 100))


def percentile_threshold(scores, p) -> float:
    """Nearest-rank percentile: the value at 1-based rank ``ceil(p/100 * n)``."""
    scores = sorted(float(s) for s in scores)
    if not scores:
        raise DataError("no scores")
    if any(not math.isfinite(s) for s in scores):
        raise DataError("scores must be finite")
    return scores[_rank(p, len(scores)) - 1]


def filter_corpus(pairs, p) -> list:
    """Keep pairs scoring at least the ``p``-th percentile, in input order."""
    pairs = [sp if isinstance(sp, ScoredPair) else ScoredPair(*sp) for sp in pairs]
    threshold = percentile_threshold([sp.score for sp in pairs], p)
    return [sp for sp in pairs if sp.score >= threshold]


def read_scores(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            try:
                value = float(text)
            except ValueError:
                raise ParseError("expected a decimal score", token=text, line=lineno) from None
            if not math.isfinite(value):
                raise ParseError("score must be finite", token=text, line=lineno)
            out.append(value)
    return out
