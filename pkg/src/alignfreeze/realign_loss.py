"""In-batch contrastive realignment loss over aligned word representations.

For a batch of ``B`` aligned word pairs the ``2B`` representations are scored
by cosine similarity.  Each representation ``h`` contributes::

    sim(h, partner(h)) / T - log sum_{h' != h} exp(sim(h, h') / T)

The partner is part of the denominator sum.  The objective is the mean of
these terms; :func:`contrastive_loss` returns its negation so it can be
minimized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align_extract import AlignmentSet, select_word_reps
from .errors import BatchError, ConfigError, NumericError


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.1
    similarity: str = "cosine"
    representation_layer: int = -1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.similarity != "cosine":
            raise ConfigError(f"unsupported similarity {self.similarity!r}")


class RealignBatch:
    """``2B`` word vectors and the fixpoint-free involution pairing them."""

    def __init__(self, reps, partner):
        reps = np.asarray(reps)
        partner = np.asarray(partner, dtype=np.int64)
        if reps.ndim != 2 or len(reps) == 0:
            raise BatchError("batch needs at least one aligned pair")
        if len(reps) % 2:
            raise BatchError("batch must hold an even number of representations")
        n = len(reps)
        if partner.shape != (n,):
            raise BatchError("partner map must have one entry per representation")
        idx = np.arange(n)
        if (
            partner.min() < 0
            or partner.max() >= n
            or np.any(partner == idx)
            or np.any(partner[partner] != idx)
        ):
            raise BatchError("partner map must be a fixpoint-free involution")
        if not np.all(np.isfinite(reps)):
            raise NumericError("batch contains non-finite values")
        self.reps = reps
        self.partner = partner

    @property
    def B(self):
        return len(self.reps) // 2

    def __len__(self):
        return len(self.reps)

    @classmethod
    def from_pairs(cls, src_reps, tgt_reps) -> "RealignBatch":
        """Interleave ``src_reps[i]`` and ``tgt_reps[i]`` as partners ``2i <-> 2i+1``."""
        src_reps, tgt_reps = np.asarray(src_reps), np.asarray(tgt_reps)
        if len(src_reps) == 0 or len(src_reps) != len(tgt_reps):
            raise BatchError("need equally many (and at least one) source and target vectors")
        reps = np.empty((2 * len(src_reps), src_reps.shape[1]), dtype=np.result_type(src_reps, tgt_reps))
        reps[0::2], reps[1::2] = src_reps, tgt_reps
        partner = np.arange(len(reps)) ^ 1
        return cls(reps, partner)

    @classmethod
    def concat(cls, batches) -> "RealignBatch":
        batches = list(batches)
        if not batches:
            raise BatchError("nothing to concatenate")
        offsets = np.cumsum([0] + [len(b) for b in batches[:-1]])
        reps = np.concatenate([b.reps for b in batches])
        partner = np.concatenate([b.partner + o for b, o in zip(batches, offsets)])
        return cls(reps, partner)


def cosine_sim(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise NumericError("cosine similarity of a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def contrastive_loss(batch: RealignBatch, cfg: LossConfig = LossConfig()):
    """Return ``(loss, grads)`` with ``grads`` shaped like ``batch.reps``."""
    if not isinstance(batch, RealignBatch):
        raise BatchError("expected a RealignBatch")
    R = batch.reps
    n = len(R)
    T = cfg.temperature
    norms = np.linalg.norm(R, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise NumericError("zero-norm representation in batch")
    U = R / norms
    logits = (U @ U.T) / T
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - row_max)
    denom = e.sum(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(denom[:, 0])
    rows = np.arange(n)
    pos = logits[rows, batch.partner]
    loss = -np.mean(pos - lse)
    if not np.isfinite(loss):
        raise NumericError("non-finite contrastive loss")

    # d loss / d logits, then through logits = U U^T / T
    G = e / denom
    G[rows, batch.partner] -= 1.0
    G /= n * T
    dU = (G + G.T) @ U
    grads = (dU - U * np.sum(U * dU, axis=1, keepdims=True)) / norms
    return float(loss), grads


def build_batch(hidden_src, hidden_tgt, links: AlignmentSet, spans_src=None, spans_tgt=None, pooling="mean"):
    """Collect the representations of aligned words from two sentences.

    ``spans_src[i]`` lists the positions making up source word ``i``; by
    default every word is a single position.  Links are taken in sorted order.
    """
    if links is None or len(links) == 0:
        raise BatchError("sentence pair has no alignment links")
    ordered = links.sorted()
    if spans_src is None:
        spans_src = [[i] for i in range(len(hidden_src))]
    if spans_tgt is None:
        spans_tgt = [[i] for i in range(len(hidden_tgt))]
    try:
        src = select_word_reps(hidden_src, [spans_src[s] for s, _ in ordered], pooling)
        tgt = select_word_reps(hidden_tgt, [spans_tgt[t] for _, t in ordered], pooling)
    except IndexError as e:
        raise BatchError(f"link refers to a word without a span: {e}") from None
    return RealignBatch.from_pairs(np.stack(src), np.stack(tgt))
