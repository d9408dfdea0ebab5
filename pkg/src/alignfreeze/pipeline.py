"""Realignment with layer freezing, fine-tuning, and multi-seed experiments.

A run follows five steps: build a fresh encoder, freeze part of it, train the
rest on the contrastive realignment loss, unfreeze everything, and fine-tune
the whole model on the source language before evaluating on the targets.
The ``FinetuneOnly`` baseline skips realignment entirely.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import evalstats
from .align_extract import AlignmentSet, dictionary_align
from .encoder import (
    AdamState,
    EncoderConfig,
    EncoderModel,
    FreezeMask,
    FreezeStrategy,
    accumulate,
    adam_update,
    apply_freeze,
    backward,
    forward,
    init_model,
    train_step,
    zero_grads,
)
from .errors import ConfigError, DataError, StrategyError
from .realign_loss import LossConfig, RealignBatch, contrastive_loss
from .tasks import (
    SyntheticSpec,
    evaluate_sentence_task,
    evaluate_token_task,
    generate_bundle,
    load_bundle,
)

log = logging.getLogger(__name__)

FINETUNE_ONLY = "FinetuneOnly"

# Values used at full scale with pretrained encoders; a randomly initialised
# desk-scale encoder needs the larger learning rates below.
FULL_SCALE_REFERENCE = {
    "finetune_lr": 2e-5,
    "finetune_batch": 32,
    "max_len_finetune": 200,
    "realign_lr": 2e-5,
    "realign_batch_pairs": 16,
    "max_len_realign": 96,
    "temperature": 0.1,
    "seeds": 5,
}


@dataclass(frozen=True)
class TrainConfig:
    realign_steps: int = 500
    realign_batch_pairs: int = 16
    realign_lr: float = 1e-3
    finetune_epochs: int = 3
    finetune_batch: int = 32
    finetune_lr: float = 1e-3
    max_len_realign: int = 96
    max_len_finetune: int = 200
    seed: int = 0

    def __post_init__(self):
        for f in ("realign_batch_pairs", "finetune_batch", "max_len_realign", "max_len_finetune"):
            if getattr(self, f) < 1:
                raise ConfigError(f"{f} must be positive")
        for f in ("realign_steps", "finetune_epochs"):
            if getattr(self, f) < 0:
                raise ConfigError(f"{f} must be non-negative")
        if not (self.realign_lr > 0 and self.finetune_lr > 0):
            raise ConfigError("learning rates must be positive")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


# --- task heads ---------------------------------------------------------------


@dataclass
class TaskHead:
    kind: str
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.kind not in ("token_classifier", "sentence_classifier"):
            raise ConfigError(f"unknown head kind {self.kind!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ConfigError("head weight must be d x K and bias length K")

    @property
    def K(self):
        return self.weight.shape[1]

    def copy(self):
        return TaskHead(self.kind, self.weight.copy(), self.bias.copy())


def init_head(kind: str, hidden_dim: int, num_labels: int, seed=0, dtype=np.float32) -> TaskHead:
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (hidden_dim + num_labels))
    w = rng.uniform(-bound, bound, size=(hidden_dim, num_labels)).astype(dtype)
    return TaskHead(kind, w, np.zeros(num_labels, dtype=dtype))


def head_logits(model, head: TaskHead, ids) -> np.ndarray:
    """Logits for a ``(b, n)`` batch of equal-length sentences."""
    top = forward(model, np.atleast_2d(ids))[-1]
    if head.kind == "token_classifier":
        return top @ head.weight + head.bias
    return top.mean(axis=1) @ head.weight + head.bias


def _softmax_xent(logits, labels):
    z = logits - logits.max(-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(-1, keepdims=True))
    nll = -np.take_along_axis(logp, labels[..., None], -1)[..., 0]
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, labels[..., None], np.take_along_axis(dlogits, labels[..., None], -1) - 1, -1)
    return nll, dlogits


def head_loss_grads(model, head: TaskHead, ids, labels, acts=None):
    """Summed cross-entropy of a batch and its gradients.

    ``labels`` is ``(b, n)`` for token heads and ``(b,)`` for sentence heads.
    Returns ``(loss_sum, head_grads, encoder_grads)``.
    """
    ids = np.atleast_2d(ids)
    labels = np.asarray(labels)
    if acts is None:
        acts = forward(model, ids)
    top = acts[-1]
    if head.kind == "token_classifier":
        feats = top
    else:
        feats = top.mean(axis=1)
    logits = feats @ head.weight + head.bias
    nll, dlogits = _softmax_xent(logits, labels)
    dlogits = dlogits.astype(top.dtype)
    gw = feats.reshape(-1, feats.shape[-1]).T @ dlogits.reshape(-1, head.K)
    gb = dlogits.reshape(-1, head.K).sum(0)
    dfeats = dlogits @ head.weight.T
    if head.kind == "token_classifier":
        dtop = dfeats
    else:
        dtop = np.repeat(dfeats[:, None, :] / top.shape[1], top.shape[1], axis=1)
    grads = backward(model, acts, {-1: dtop})
    return float(nll.sum()), {"weight": gw, "bias": gb}, grads


# --- realignment --------------------------------------------------------------


class AlignedPair(NamedTuple):
    src_ids: np.ndarray
    tgt_ids: np.ndarray
    links: AlignmentSet


def _truncate_pair(ex: AlignedPair, max_len: int):
    src, tgt = np.asarray(ex.src_ids)[:max_len], np.asarray(ex.tgt_ids)[:max_len]
    links = [(s, t) for s, t in ex.links.sorted() if s < max_len and t < max_len]
    if not links or len(src) == 0 or len(tgt) == 0:
        return None
    return src, tgt, np.array(links, dtype=np.int64)


def _forward_grouped(model, seqs):
    """Forward sequences batched by length. Returns (acts per group, locator)."""
    groups = {}
    for i, s in enumerate(seqs):
        groups.setdefault(len(s), []).append(i)
    acts, where = {}, {}
    for n, members in sorted(groups.items()):
        acts[n] = forward(model, np.stack([seqs[i] for i in members]))
        for row, i in enumerate(members):
            where[i] = (n, row)
    return acts, where


def realign_batch_grads(model, pairs, loss_cfg: LossConfig):
    """Contrastive loss over a list of truncated pairs and the encoder gradients."""
    layer = loss_cfg.representation_layer
    seqs = []
    for src, tgt, _ in pairs:
        seqs.extend((src, tgt))
    acts, where = _forward_grouped(model, seqs)

    # rows of the batch: link j of pair i contributes (src pos, tgt pos)
    coords = []
    for i, (_, _, links) in enumerate(pairs):
        for s, t in links:
            coords.append((2 * i, s))
            coords.append((2 * i + 1, t))
    reps = np.stack([acts[where[q][0]][layer][where[q][1], pos] for q, pos in coords])
    batch = RealignBatch(reps, np.arange(len(reps)) ^ 1)
    loss, drep = contrastive_loss(batch, loss_cfg)

    upstream = {n: np.zeros_like(a[layer]) for n, a in acts.items()}
    for (q, pos), g in zip(coords, drep):
        n, row = where[q]
        upstream[n][row, pos] += g
    grads = zero_grads(model)
    for n, a in acts.items():
        accumulate(grads, backward(model, a, {layer: upstream[n]}))
    return loss, grads, batch.B


def run_realignment(
    model: EncoderModel,
    corpus,
    strategy,
    cfg: TrainConfig,
    loss_cfg: LossConfig = LossConfig(),
    history: list | None = None,
) -> EncoderModel:
    """Train the unfrozen blocks of ``model`` on the realignment loss.

    ``corpus`` holds :class:`AlignedPair` items (or equivalent triples); pairs
    without links are skipped and the corpus is cycled in a seeded random
    order until ``cfg.realign_steps`` updates are made.  Per-step losses are
    appended to ``history`` when given.  The model is updated in place and
    returned with nothing frozen.
    """
    if isinstance(strategy, str):
        strategy = FreezeStrategy.parse(strategy)
    mask = apply_freeze(strategy, model.config.num_layers)
    if cfg.realign_steps == 0:
        return model
    max_len = min(cfg.max_len_realign, model.config.max_seq_len)
    usable = [p for p in (_truncate_pair(AlignedPair(*ex), max_len) for ex in corpus) if p is not None]
    if not usable:
        raise DataError("realignment corpus has no sentence pair with alignment links")
    rng = np.random.default_rng([cfg.seed, 1])
    opt = AdamState()
    order, cursor = rng.permutation(len(usable)), 0
    for step in range(cfg.realign_steps):
        batch = []
        while len(batch) < min(cfg.realign_batch_pairs, len(usable)):
            if cursor == len(order):
                order, cursor = rng.permutation(len(usable)), 0
            batch.append(usable[order[cursor]])
            cursor += 1
        loss, grads, _ = realign_batch_grads(model, batch, loss_cfg)
        train_step(model, grads, mask, opt, cfg.realign_lr)
        if history is not None:
            history.append(loss)
        if step % 100 == 0:
            log.debug("realign step %d loss %.4f", step, loss)
    return model


# --- fine-tuning --------------------------------------------------------------


def _labels_for(head, s):
    return s.tags if head.kind == "token_classifier" else s.label


def run_finetune(model: EncoderModel, head: TaskHead, data, cfg: TrainConfig):
    """Fine-tune encoder and head together with softmax cross-entropy.

    Nothing is frozen. Sentences longer than the model allows are truncated.
    """
    if not data:
        raise DataError("no fine-tuning data")
    for s in data:
        if np.any(np.asarray(s.tags) >= head.K) or np.any(np.asarray(s.tags) < 0):
            raise DataError(f"label out of range for a head with {head.K} labels")
    if cfg.finetune_epochs == 0:
        return model, head
    max_len = min(cfg.max_len_finetune, model.config.max_seq_len)
    rng = np.random.default_rng([cfg.seed, 2])
    no_mask = FreezeMask()
    opt = AdamState()
    head_state = {"weight": [0.0, 0.0, 0], "bias": [0.0, 0.0, 0]}
    for epoch in range(cfg.finetune_epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(order), cfg.finetune_batch):
            chunk = [data[i] for i in order[start : start + cfg.finetune_batch]]
            groups = {}
            for s in chunk:
                n = min(len(s), max_len)
                groups.setdefault(n, []).append(s)
            units = sum(min(len(s), max_len) for s in chunk) if head.kind == "token_classifier" else len(chunk)
            grads = zero_grads(model)
            hg = {"weight": np.zeros_like(head.weight), "bias": np.zeros_like(head.bias)}
            for n, members in sorted(groups.items()):
                ids = np.stack([s.token_ids[:n] for s in members])
                if head.kind == "token_classifier":
                    labels = np.stack([s.tags[:n] for s in members])
                else:
                    labels = np.array([s.label for s in members])
                _, g_head, g_enc = head_loss_grads(model, head, ids, labels)
                accumulate(grads, g_enc)
                hg["weight"] += g_head["weight"]
                hg["bias"] += g_head["bias"]
            scale = 1.0 / units
            for b in grads.values():
                for k in b:
                    b[k] *= scale
            train_step(model, grads, no_mask, opt, cfg.finetune_lr)
            for name in ("weight", "bias"):
                m, v, t = head_state[name]
                p, m, v = adam_update(getattr(head, name), hg[name] * scale, m, v, t + 1, cfg.finetune_lr)
                setattr(head, name, p.astype(getattr(head, name).dtype))
                head_state[name] = [m, v, t + 1]
    return model, head


# --- experiments --------------------------------------------------------------


def parse_strategy(text: str):
    text = text.strip()
    if text == FINETUNE_ONLY:
        return FINETUNE_ONLY
    return FreezeStrategy.parse(text)


@dataclass
class ExperimentSpec:
    """Parsed experiment document.

    JSON keys: ``model`` (encoder config; ``vocab_size`` defaults to the
    bundle's id range), ``task`` (``kind`` plus ``generator`` fields or a
    ``bundle`` directory), ``strategies``, ``seeds``, ``train``, ``loss``,
    ``aligner`` (``dictionary`` or ``gold``), ``significance``.
    """

    model: dict = field(default_factory=dict)
    task_kind: str = "token"
    generator: dict | None = field(default_factory=dict)
    bundle_path: str | None = None
    strategies: list = field(default_factory=lambda: [FINETUNE_ONLY, "Full", "FrontHalf", "BackHalf"])
    seeds: list = field(default_factory=lambda: [1, 2, 3])
    train: dict = field(default_factory=dict)
    loss: dict = field(default_factory=dict)
    aligner: str = "dictionary"
    threshold_rule: str = "max"
    ddof: int = 1

    def __post_init__(self):
        if self.task_kind not in ("token", "sentence"):
            raise ConfigError(f"unknown task kind {self.task_kind!r}")
        if self.aligner not in ("dictionary", "gold"):
            raise ConfigError(f"unknown aligner {self.aligner!r}")
        if self.threshold_rule not in evalstats.THRESHOLD_RULES:
            raise ConfigError(f"unknown threshold rule {self.threshold_rule!r}")
        if not self.strategies:
            raise ConfigError("no strategies given")
        try:
            self.strategies = [str(parse_strategy(s)) for s in self.strategies]
        except StrategyError as e:
            raise ConfigError(str(e)) from None
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategies")
        # validate eagerly so errors surface before any training
        TrainConfig.from_dict(self.train)
        LossConfig(**self.loss)
        if self.bundle_path is None:
            SyntheticSpec.from_dict(self.generator or {})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise ConfigError("experiment spec must be a JSON object")
        known = {"model", "task", "strategies", "seeds", "train", "loss", "aligner", "significance"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        task = dict(d.get("task", {}))
        sig = dict(d.get("significance", {}))
        kw = dict(
            model=dict(d.get("model", {})),
            task_kind=task.pop("kind", "token"),
            generator=task.pop("generator", {}),
            bundle_path=task.pop("bundle", None),
            train=dict(d.get("train", {})),
            loss=dict(d.get("loss", {})),
            aligner=d.get("aligner", "dictionary"),
            threshold_rule=sig.pop("threshold_rule", "max"),
            ddof=sig.pop("ddof", 1),
        )
        if task or sig:
            raise ConfigError(f"unknown task/significance keys: {sorted(set(task) | set(sig))}")
        if "strategies" in d:
            kw["strategies"] = list(d["strategies"])
        if "seeds" in d:
            kw["seeds"] = [int(s) for s in d["seeds"]]
        try:
            return cls(**kw)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None

    def to_dict(self) -> dict:
        task = {"kind": self.task_kind}
        if self.bundle_path is not None:
            task["bundle"] = self.bundle_path
        else:
            task["generator"] = self.generator
        return {
            "model": self.model,
            "task": task,
            "strategies": self.strategies,
            "seeds": self.seeds,
            "train": self.train,
            "loss": self.loss,
            "aligner": self.aligner,
            "significance": {"threshold_rule": self.threshold_rule, "ddof": self.ddof},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def load_bundle(self):
        if self.bundle_path is not None:
            return load_bundle(self.bundle_path)
        return generate_bundle(SyntheticSpec.from_dict(self.generator or {}))

    def encoder_config(self, bundle) -> EncoderConfig:
        d = dict(self.model)
        d.setdefault("vocab_size", bundle.table_size)
        d.setdefault("max_seq_len", max(32, bundle.spec.sentence_len[1]))
        try:
            cfg = EncoderConfig.from_dict(d)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        if cfg.vocab_size < bundle.table_size:
            raise ConfigError(f"vocab_size {cfg.vocab_size} < {bundle.table_size} ids used by the bundle")
        return cfg


def realignment_corpus(bundle, aligner="dictionary") -> list:
    """Aligned pairs for every target language, in language order."""
    out = []
    for lang in bundle.targets:
        d = bundle.dictionaries[lang]
        for ex in bundle.parallel[lang]:
            links = ex.gold if aligner == "gold" else dictionary_align(ex.pair, d)
            out.append(AlignedPair(ex.src_ids, ex.tgt_ids, links))
    return out


@dataclass
class RunResult:
    strategy: str
    seed: int
    scores: dict
    source_score: float
    realign_loss_evals: int = 0
    realign_loss_first: float | None = None
    realign_loss_last: float | None = None


def run_single(spec: ExperimentSpec, strategy: str, seed: int, bundle=None, corpus=None,
               return_model: bool = False):
    """One (strategy, seed) run: fresh model, optional realignment, fine-tune, evaluate."""
    bundle = bundle if bundle is not None else spec.load_bundle()
    strategy = parse_strategy(strategy)
    model = init_model(spec.encoder_config(bundle), seed)
    tcfg = TrainConfig.from_dict({**spec.train, "seed": seed})
    loss_cfg = LossConfig(**spec.loss)
    history: list = []
    if strategy != FINETUNE_ONLY:
        if corpus is None:
            corpus = realignment_corpus(bundle, spec.aligner)
        run_realignment(model, corpus, strategy, tcfg, loss_cfg, history)
    kind = "token_classifier" if spec.task_kind == "token" else "sentence_classifier"
    head = init_head(kind, model.config.hidden_dim, bundle.spec.num_tags, seed=[seed, 3])
    model, head = run_finetune(model, head, bundle.source_train, tcfg)
    evaluate = evaluate_token_task if spec.task_kind == "token" else evaluate_sentence_task
    scores = {lang: evaluate(model, head, bundle.target_eval[lang]) for lang in bundle.targets}
    k = min(50, len(history))
    result = RunResult(
        strategy=str(strategy),
        seed=seed,
        scores=scores,
        source_score=evaluate(model, head, bundle.source_eval),
        realign_loss_evals=len(history),
        realign_loss_first=float(np.mean(history[:k])) if history else None,
        realign_loss_last=float(np.mean(history[-k:])) if history else None,
    )
    log.info("%s seed %d: %s", result.strategy, seed, scores)
    if return_model:
        return result, model, head
    return result


def _run_job(args):
    spec, strategy, seed = args
    return run_single(spec, strategy, seed)


@dataclass
class ExperimentReport:
    config_hash: str
    metric: str
    baseline: str | None
    seeds: list
    strategies: list
    languages: list
    runs: list
    threshold_rule: str = "max"
    ddof: int = 1

    def run(self, strategy, seed) -> RunResult:
        for r in self.runs:
            if r.strategy == strategy and r.seed == seed:
                return r
        raise KeyError((strategy, seed))

    def stats(self, strategy, language) -> evalstats.RunStats:
        return evalstats.aggregate(
            [self.run(strategy, s).scores[language] for s in self.seeds], ddof=self.ddof
        )

    def average_stats(self, strategy) -> evalstats.RunStats:
        per_seed = [np.mean([self.run(strategy, s).scores[l] for l in self.languages]) for s in self.seeds]
        return evalstats.aggregate(per_seed, ddof=self.ddof)

    def verdict(self, strategy, language):
        if self.baseline is None:
            return None
        return evalstats.significance(
            self.stats(self.baseline, language), self.stats(strategy, language), self.threshold_rule
        )

    def to_dict(self) -> dict:
        results, summary = {}, {}
        for strat in self.strategies:
            per_lang, verdicts = {}, {}
            for lang in self.languages:
                st = self.stats(strat, lang)
                v = self.verdict(strat, lang)
                verdicts[lang] = v
                per_lang[lang] = {
                    "per_seed": [self.run(strat, s).scores[lang] for s in self.seeds],
                    "mean": st.mean,
                    "std": st.std,
                    "verdict": None if v is None else asdict(v),
                }
            results[strat] = per_lang
            avg = self.average_stats(strat)
            entry = {"mean": avg.mean, "std": avg.std}
            if self.baseline is not None:
                up, down, same = evalstats.count_verdicts(verdicts)
                entry.update(up=up, down=down, same=same)
            summary[strat] = entry
        return {
            "config_hash": self.config_hash,
            "metric": self.metric,
            "baseline": self.baseline,
            "seeds": self.seeds,
            "strategies": self.strategies,
            "languages": self.languages,
            "significance": {"threshold_rule": self.threshold_rule, "ddof": self.ddof},
            "results": results,
            "summary": summary,
            "runs": [asdict(r) for r in self.runs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        sig = d.get("significance", {})
        return cls(
            config_hash=d["config_hash"],
            metric=d["metric"],
            baseline=d["baseline"],
            seeds=list(d["seeds"]),
            strategies=list(d["strategies"]),
            languages=list(d["languages"]),
            runs=[RunResult(**r) for r in d["runs"]],
            threshold_rule=sig.get("threshold_rule", "max"),
            ddof=sig.get("ddof", 1),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["strategy", "language", "seed", "metric", "value"])
        for strat in self.strategies:
            for lang in self.languages:
                for s in self.seeds:
                    w.writerow([strat, lang, s, self.metric, repr(self.run(strat, s).scores[lang])])
        return buf.getvalue()

    def to_table(self) -> str:
        """Plain-text summary: averaged score ± std, #down, #up per strategy."""
        rows = [("strategy", self.metric, "#↓", "#↑")]
        summary = self.to_dict()["summary"]
        for strat in self.strategies:
            e = summary[strat]
            acc = f"{100 * e['mean']:.1f} ± {100 * e['std']:.1f}"
            if strat == self.baseline or self.baseline is None:
                rows.append((strat, acc, "-", "-"))
            else:
                rows.append((strat, acc, str(e["down"]), str(e["up"])))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec, seeds=None, workers: int = 1, bundle=None) -> ExperimentReport:
    """Run every (strategy, seed) combination and assemble the report.

    Verdicts compare each strategy with ``FinetuneOnly`` when that baseline is
    among the strategies.
    """
    seeds = list(spec.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("no seeds given")
    bundle = bundle if bundle is not None else spec.load_bundle()
    spec.encoder_config(bundle)  # fail fast on a bad model config
    jobs = [(spec, strat, seed) for strat in spec.strategies for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        corpus = realignment_corpus(bundle, spec.aligner)
        runs = [run_single(spec, strat, seed, bundle, corpus) for _, strat, seed in jobs]
    return ExperimentReport(
        config_hash=spec.config_hash(),
        metric="token_accuracy" if spec.task_kind == "token" else "sentence_accuracy",
        baseline=FINETUNE_ONLY if FINETUNE_ONLY in spec.strategies else None,
        seeds=seeds,
        strategies=list(spec.strategies),
        languages=list(bundle.targets),
        runs=runs,
        threshold_rule=spec.threshold_rule,
        ddof=spec.ddof,
    )
