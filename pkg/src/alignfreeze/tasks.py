"""Synthetic multilingual testbed.

A source language is sampled from a tag Markov chain with tag-conditioned
Zipfian unigram emissions; every word type carries exactly one tag.  Each
target language is a bijective cipher of the source vocabulary onto its own
id range, optionally with random adjacent swaps.  Translations keep the gold
permutation alignment, and the cipher doubles as a bilingual dictionary.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .align_extract import (
    AlignmentSet,
    BilingualDictionary,
    SentencePair,
    read_corpus,
    read_dictionary,
    read_pharaoh_file,
    write_corpus,
    write_dictionary,
    write_pharaoh_file,
)
from .errors import ConfigError, DataError, ParseError


@dataclass(frozen=True)
class TargetLanguage:
    name: str
    cipher_seed: int
    reorder_prob: float = 0.0


def _default_languages():
    return (TargetLanguage("lang_a", 101, 0.0), TargetLanguage("lang_b", 202, 0.3))


@dataclass(frozen=True)
class SyntheticSpec:
    vocab_size: int = 200
    num_tags: int = 6
    sentence_len: tuple = (5, 12)
    n_train: int = 2000
    n_eval: int = 500
    n_parallel: int = 2000
    languages: tuple = field(default_factory=_default_languages)
    master_seed: int = 0
    source_name: str = "src"
    zipf_exponent: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sentence_len", tuple(self.sentence_len))
        langs = tuple(
            l if isinstance(l, TargetLanguage) else TargetLanguage(**l) for l in self.languages
        )
        object.__setattr__(self, "languages", langs)
        lo, hi = self.sentence_len
        if self.num_tags < 1 or self.vocab_size < self.num_tags:
            raise ConfigError("need 1 <= num_tags <= vocab_size")
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad sentence_len {self.sentence_len}")
        for name in ("n_train", "n_eval", "n_parallel"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        names = [self.source_name] + [l.name for l in langs]
        if len(set(names)) != len(names):
            raise ConfigError("language names must be unique")
        for l in langs:
            if not 0.0 <= l.reorder_prob <= 1.0:
                raise ConfigError(f"reorder_prob of {l.name} outside [0, 1]")
        for name in names:
            if not name or any(c.isspace() for c in name):
                raise ConfigError(f"language name {name!r} is empty or contains whitespace")

    @property
    def table_size(self):
        """Embedding rows needed for the source plus every target language."""
        return self.vocab_size * (1 + len(self.languages))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        if "languages" in d:
            d["languages"] = tuple(TargetLanguage(**l) for l in d["languages"])
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["sentence_len"] = list(self.sentence_len)
        d["languages"] = [asdict(l) for l in self.languages]
        return d


@dataclass
class LabeledSentence:
    token_ids: np.ndarray
    tags: np.ndarray

    @property
    def label(self) -> int:
        """Majority tag; ties go to the smallest tag id."""
        return int(np.bincount(self.tags).argmax())

    def __len__(self):
        return len(self.token_ids)


@dataclass
class ParallelExample:
    pair: SentencePair
    src_ids: np.ndarray
    tgt_ids: np.ndarray
    gold: AlignmentSet


@dataclass
class TaskBundle:
    spec: SyntheticSpec
    source: str
    targets: list
    offsets: dict
    word_tags: np.ndarray
    source_train: list
    source_eval: list
    target_eval: dict
    parallel: dict
    dictionaries: dict

    @property
    def table_size(self):
        return self.spec.vocab_size * (1 + len(self.targets))

    def token(self, lang: str, local: int) -> str:
        return f"{lang}_{local}"

    def token_id(self, tok: str) -> int:
        lang, _, local = tok.rpartition("_")
        if lang not in self.offsets or not local.isdigit() or int(local) >= self.spec.vocab_size:
            raise DataError(f"unknown token {tok!r}")
        return self.offsets[lang] + int(local)

    def id_token(self, i: int) -> str:
        V = self.spec.vocab_size
        lang = ([self.source] + self.targets)[int(i) // V]
        return self.token(lang, int(i) % V)

    _inverse_cipher: dict = field(default_factory=dict, repr=False)

    def tag_oracle(self, data) -> float:
        """Accuracy of predicting each token's true tag from the word->tag map."""
        V = self.spec.vocab_size
        inverse = {self.source: np.arange(V)}
        inverse.update({lang: self._inverse_cipher[lang] for lang in self.targets})
        correct = total = 0
        langs = [self.source] + self.targets
        for s in data:
            lang_idx = s.token_ids // V
            local = s.token_ids % V
            src_words = np.array(
                [inverse[langs[li]][w] for li, w in zip(lang_idx, local)], dtype=np.int64
            )
            correct += int(np.sum(self.word_tags[src_words] == s.tags))
            total += len(s)
        return correct / total


def _zipf_weights(n, exponent, rng):
    w = 1.0 / np.arange(1, n + 1) ** exponent
    rng.shuffle(w)
    return w / w.sum()


def _reorder(n, p, rng):
    """Adjacent-swap permutation: ``perm[t]`` is the source position at target slot ``t``."""
    perm = np.arange(n)
    i = 0
    while i < n - 1:
        if rng.random() < p:
            perm[i], perm[i + 1] = perm[i + 1], perm[i]
            i += 2
        else:
            i += 1
    return perm


def generate_bundle(spec: SyntheticSpec, max_vocab: int | None = None) -> TaskBundle:
    """Build a fully deterministic bundle from ``spec.master_seed``.

    ``max_vocab`` is the size of the embedding table the ids must fit into.
    """
    if max_vocab is not None and spec.table_size > max_vocab:
        raise ConfigError(
            f"{1 + len(spec.languages)} languages x {spec.vocab_size} words need "
            f"{spec.table_size} ids, table has {max_vocab}"
        )
    V, K = spec.vocab_size, spec.num_tags
    rng = np.random.default_rng(spec.master_seed)

    word_tags = rng.permutation(np.arange(V) % K)
    words_by_tag = [np.flatnonzero(word_tags == k) for k in range(K)]
    emissions = [_zipf_weights(len(ws), spec.zipf_exponent, rng) for ws in words_by_tag]
    start = rng.dirichlet(np.ones(K))
    trans = rng.dirichlet(np.full(K, 0.5), size=K)
    lo, hi = spec.sentence_len

    def sample_sentence(r):
        n = int(r.integers(lo, hi + 1))
        tags = np.empty(n, dtype=np.int64)
        tags[0] = r.choice(K, p=start)
        for i in range(1, n):
            tags[i] = r.choice(K, p=trans[tags[i - 1]])
        words = np.array([words_by_tag[t][r.choice(len(words_by_tag[t]), p=emissions[t])] for t in tags])
        return LabeledSentence(words.astype(np.int64), tags)

    split_rngs = {name: np.random.default_rng([spec.master_seed, i]) for i, name in
                  enumerate(("train", "eval", "parallel", "target_eval"))}
    source_train = [sample_sentence(split_rngs["train"]) for _ in range(spec.n_train)]
    source_eval = [sample_sentence(split_rngs["eval"]) for _ in range(spec.n_eval)]
    parallel_src = [sample_sentence(split_rngs["parallel"]) for _ in range(spec.n_parallel)]
    eval_src = [sample_sentence(split_rngs["target_eval"]) for _ in range(spec.n_eval)]

    offsets = {spec.source_name: 0}
    bundle = TaskBundle(
        spec=spec,
        source=spec.source_name,
        targets=[l.name for l in spec.languages],
        offsets=offsets,
        word_tags=word_tags,
        source_train=source_train,
        source_eval=source_eval,
        target_eval={},
        parallel={},
        dictionaries={},
    )
    for j, lang in enumerate(spec.languages):
        offset = (j + 1) * V
        offsets[lang.name] = offset
        lrng = np.random.default_rng(lang.cipher_seed)
        cipher = lrng.permutation(V)
        inverse = np.argsort(cipher)
        bundle._inverse_cipher[lang.name] = inverse

        def translate(s, r):
            perm = _reorder(len(s), lang.reorder_prob, r)
            return cipher[s.token_ids[perm]] + offset, s.tags[perm], perm

        reorder_rng = np.random.default_rng([lang.cipher_seed, 1])
        examples = []
        for s in parallel_src:
            tgt_ids, _, perm = translate(s, reorder_rng)
            pair = SentencePair(
                tuple(bundle.id_token(i) for i in s.token_ids),
                tuple(bundle.id_token(i) for i in tgt_ids),
            )
            gold = AlignmentSet(frozenset((int(src), t) for t, src in enumerate(perm)), len(s), len(s))
            examples.append(ParallelExample(pair, s.token_ids, tgt_ids, gold))
        bundle.parallel[lang.name] = examples

        eval_rng = np.random.default_rng([lang.cipher_seed, 2])
        target_eval = []
        for s in eval_src:
            tgt_ids, tgt_tags, _ = translate(s, eval_rng)
            target_eval.append(LabeledSentence(tgt_ids.astype(np.int64), tgt_tags))
        bundle.target_eval[lang.name] = target_eval

        bundle.dictionaries[lang.name] = BilingualDictionary.from_pairs(
            (bundle.token(spec.source_name, w), bundle.token(lang.name, int(cipher[w])))
            for w in range(V)
        )
    return bundle


# --- evaluation -----------------------------------------------------------------


def _batched_logits(model, head, data, batch_size=256):
    """Yield ``(sentences, logits)`` grouped by sentence length."""
    from .pipeline import head_logits  # avoid import cycle at module load

    by_len = {}
    for s in data:
        by_len.setdefault(len(s), []).append(s)
    for n in sorted(by_len):
        group = by_len[n]
        for i in range(0, len(group), batch_size):
            chunk = group[i : i + batch_size]
            ids = np.stack([s.token_ids for s in chunk])
            yield chunk, head_logits(model, head, ids)


def evaluate_token_task(model, head, data) -> float:
    """Micro-averaged token accuracy of argmax predictions."""
    if not data:
        raise DataError("empty evaluation data")
    correct = total = 0
    for chunk, logits in _batched_logits(model, head, data):
        pred = logits.argmax(-1)
        gold = np.stack([s.tags for s in chunk])
        correct += int((pred == gold).sum())
        total += gold.size
    return correct / total


def evaluate_sentence_task(model, head, data) -> float:
    if not data:
        raise DataError("empty evaluation data")
    correct = 0
    for chunk, logits in _batched_logits(model, head, data):
        pred = logits.argmax(-1)
        correct += int(sum(int(p) == s.label for p, s in zip(pred, chunk)))
    return correct / len(data)


# --- serialization --------------------------------------------------------------


def write_labels(path, bundle: TaskBundle, data):
    """CoNLL-style ``token<TAB>tag`` lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in data:
            for i, t in zip(s.token_ids, s.tags):
                fh.write(f"{bundle.id_token(i)}\tT{int(t)}\n")
            fh.write("\n")


def read_labels(path, bundle: TaskBundle) -> list:
    out, ids, tags = [], [], []
    K = bundle.spec.num_tags

    def flush():
        if ids:
            out.append(LabeledSentence(np.array(ids, dtype=np.int64), np.array(tags, dtype=np.int64)))
            ids.clear()
            tags.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].startswith("T") or not parts[1][1:].isdigit():
                raise ParseError("expected token<TAB>T<tag>", line=lineno)
            tag = int(parts[1][1:])
            if tag >= K:
                raise DataError(f"{path}:{lineno}: tag {tag} out of range for {K} tags")
            ids.append(bundle.token_id(parts[0]))
            tags.append(tag)
    flush()
    return out


def save_bundle(bundle: TaskBundle, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "spec": bundle.spec.to_dict(),
        "source": bundle.source,
        "targets": bundle.targets,
        "offsets": bundle.offsets,
        "word_tags": [int(t) for t in bundle.word_tags],
        "inverse_cipher": {k: [int(x) for x in v] for k, v in bundle._inverse_cipher.items()},
    }
    (d / "bundle.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    write_labels(d / f"{bundle.source}.train.tsv", bundle, bundle.source_train)
    write_labels(d / f"{bundle.source}.eval.tsv", bundle, bundle.source_eval)
    for lang in bundle.targets:
        prefix = f"{bundle.source}-{lang}"
        write_labels(d / f"{lang}.eval.tsv", bundle, bundle.target_eval[lang])
        write_corpus(d / f"{prefix}.corpus.tsv", [ex.pair for ex in bundle.parallel[lang]])
        write_pharaoh_file(d / f"{prefix}.gold.pharaoh", [ex.gold for ex in bundle.parallel[lang]])
        write_dictionary(d / f"{prefix}.dict.tsv", bundle.dictionaries[lang])


def load_bundle(directory) -> TaskBundle:
    """Read a bundle written by :func:`save_bundle` through the text parsers."""
    d = Path(directory)
    try:
        meta = json.loads((d / "bundle.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no bundle.json in {d}") from None
    spec = SyntheticSpec.from_dict(meta["spec"])
    bundle = TaskBundle(
        spec=spec,
        source=meta["source"],
        targets=list(meta["targets"]),
        offsets=dict(meta["offsets"]),
        word_tags=np.array(meta["word_tags"], dtype=np.int64),
        source_train=[],
        source_eval=[],
        target_eval={},
        parallel={},
        dictionaries={},
    )
    bundle._inverse_cipher = {k: np.array(v) for k, v in meta["inverse_cipher"].items()}
    bundle.source_train = read_labels(d / f"{bundle.source}.train.tsv", bundle)
    bundle.source_eval = read_labels(d / f"{bundle.source}.eval.tsv", bundle)
    for lang in bundle.targets:
        prefix = f"{bundle.source}-{lang}"
        bundle.target_eval[lang] = read_labels(d / f"{lang}.eval.tsv", bundle)
        pairs = read_corpus(d / f"{prefix}.corpus.tsv")
        golds = read_pharaoh_file(d / f"{prefix}.gold.pharaoh", pairs)
        bundle.parallel[lang] = [
            ParallelExample(
                p,
                np.array([bundle.token_id(t) for t in p.src_tokens], dtype=np.int64),
                np.array([bundle.token_id(t) for t in p.tgt_tokens], dtype=np.int64),
                g,
            )
            for p, g in zip(pairs, golds)
        ]
        bundle.dictionaries[lang] = read_dictionary(d / f"{prefix}.dict.tsv")
    return bundle
