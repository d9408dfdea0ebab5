"""Word alignment extraction, parsing and symmetrization.

Alignments are sets of ``(s, t)`` links between 0-based source and target
token positions.  Three routes produce them:

* bilingual dictionary lookup (:func:`dictionary_align`),
* external aligner output in Pharaoh notation (:func:`parse_pharaoh`),
* symmetrization of two directional alignments (:func:`symmetrize_gdfa`).
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError, DimensionError, ParseError, SpanError

_LINK_RE = re.compile(r"^(\d+)-(\d+)$")

# Moses order: horizontal/vertical neighbours first, then diagonals.
NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


class SentencePair(NamedTuple):
    src_tokens: tuple
    tgt_tokens: tuple

    @classmethod
    def from_text(cls, src: str, tgt: str) -> "SentencePair":
        return cls(tuple(src.split()), tuple(tgt.split()))

    def validate(self):
        if not self.src_tokens or not self.tgt_tokens:
            raise DataError("sentence pair has an empty side")
        for tok in self.src_tokens + self.tgt_tokens:
            if not tok or any(c.isspace() for c in tok):
                raise DataError(f"token {tok!r} is empty or contains whitespace")
        return self


class AlignmentLink(NamedTuple):
    s: int
    t: int


@dataclass(frozen=True)
class AlignmentSet:
    links: frozenset
    src_len: int
    tgt_len: int

    def __post_init__(self):
        links = frozenset(AlignmentLink(int(s), int(t)) for s, t in self.links)
        object.__setattr__(self, "links", links)
        if self.src_len < 0 or self.tgt_len < 0:
            raise DimensionError("sentence lengths must be non-negative")
        for s, t in links:
            if not (0 <= s < self.src_len and 0 <= t < self.tgt_len):
                raise DimensionError(
                    f"link {s}-{t} outside a {self.src_len}x{self.tgt_len} sentence pair"
                )

    def __len__(self):
        return len(self.links)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, link):
        return tuple(link) in self.links

    def sorted(self) -> list:
        return sorted(self.links)

    def same_shape(self, other: "AlignmentSet") -> bool:
        return (self.src_len, self.tgt_len) == (other.src_len, other.tgt_len)


@dataclass
class BilingualDictionary:
    entries: dict = field(default_factory=dict)
    fold_case: bool = True

    def __post_init__(self):
        cleaned = defaultdict(set)
        for src, tgts in self.entries.items():
            for tgt in tgts:
                cleaned[self._norm(src)].add(self._norm(tgt))
        self.entries = dict(cleaned)

    def _norm(self, word: str) -> str:
        return word.casefold() if self.fold_case else word

    def add(self, src: str, tgt: str):
        self.entries.setdefault(self._norm(src), set()).add(self._norm(tgt))

    def lookup(self, word: str) -> set:
        return self.entries.get(self._norm(word), set())

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable, fold_case: bool = True) -> "BilingualDictionary":
        d = cls(fold_case=fold_case)
        for src, tgt in pairs:
            d.add(src, tgt)
        return d


def parse_pharaoh(text: str, src_len: int, tgt_len: int) -> AlignmentSet:
    """Parse one line of ``s-t`` links.

    Duplicate links collapse. A malformed token or an index beyond the declared
    lengths raises :class:`ParseError` naming the token and its 1-based column.
    """
    links = set()
    for m in re.finditer(r"\S+", text):
        tok = m.group(0)
        col = m.start() + 1
        mm = _LINK_RE.match(tok)
        if mm is None:
            raise ParseError("malformed alignment link", token=tok, column=col)
        s, t = int(mm.group(1)), int(mm.group(2))
        if s >= src_len or t >= tgt_len:
            raise ParseError(
                f"link index out of range for a {src_len}x{tgt_len} pair", token=tok, column=col
            )
        links.add((s, t))
    return AlignmentSet(frozenset(links), src_len, tgt_len)


def format_pharaoh(alignment: AlignmentSet) -> str:
    return " ".join(f"{s}-{t}" for s, t in alignment.sorted())


def symmetrize_gdfa(forward: AlignmentSet, backward: AlignmentSet) -> AlignmentSet:
    """Grow-diag-final-and symmetrization.

    Both inputs use source-target orientation. The result starts from their
    intersection, grows into union links adjacent (8-neighbourhood) to current
    links while either endpoint is unaligned, then adds forward links and
    finally backward links whose endpoints are both still unaligned.
    """
    if not forward.same_shape(backward):
        raise DimensionError(
            f"forward is {forward.src_len}x{forward.tgt_len}, "
            f"backward is {backward.src_len}x{backward.tgt_len}"
        )
    n_src, n_tgt = forward.src_len, forward.tgt_len
    union = forward.links | backward.links
    alignment = set(forward.links & backward.links)
    src_aligned = {s for s, _ in alignment}
    tgt_aligned = {t for _, t in alignment}

    def add(s, t):
        alignment.add((s, t))
        src_aligned.add(s)
        tgt_aligned.add(t)

    added = True
    while added:
        added = False
        for s in range(n_src):
            for t in range(n_tgt):
                if (s, t) not in alignment:
                    continue
                for ds, dt in NEIGHBOURS:
                    ns, nt = s + ds, t + dt
                    if (ns, nt) in union and (ns, nt) not in alignment and (
                        ns not in src_aligned or nt not in tgt_aligned
                    ):
                        add(ns, nt)
                        added = True

    for directional in (forward, backward):
        for s, t in directional.sorted():
            if s not in src_aligned and t not in tgt_aligned:
                add(s, t)

    return AlignmentSet(frozenset(alignment), n_src, n_tgt)


def candidate_links(pair: SentencePair, dictionary: BilingualDictionary) -> set:
    links = set()
    for s, src_tok in enumerate(pair.src_tokens):
        translations = dictionary.lookup(src_tok)
        if not translations:
            continue
        for t, tgt_tok in enumerate(pair.tgt_tokens):
            if dictionary._norm(tgt_tok) in translations:
                links.add((s, t))
    return links


def dictionary_align(pair: SentencePair, dictionary: BilingualDictionary) -> AlignmentSet:
    """Align a sentence pair by dictionary lookup.

    Any source or target position with more than one candidate link is
    dropped together with all of its links, then links joining identical
    (case-folded) surface strings are discarded.
    """
    cands = candidate_links(pair, dictionary)
    src_count = Counter(s for s, _ in cands)
    tgt_count = Counter(t for _, t in cands)
    kept = {(s, t) for s, t in cands if src_count[s] == 1 and tgt_count[t] == 1}
    kept = {
        (s, t)
        for s, t in kept
        if dictionary._norm(pair.src_tokens[s]) != dictionary._norm(pair.tgt_tokens[t])
    }
    return AlignmentSet(frozenset(kept), len(pair.src_tokens), len(pair.tgt_tokens))


def select_word_reps(hidden, spans, pooling: str = "mean") -> list:
    """Pool per-position vectors into one vector per word span."""
    hidden = np.asarray(hidden)
    if pooling not in ("first", "mean"):
        raise ValueError(f"unknown pooling {pooling!r}")
    out = []
    for span in spans:
        span = list(span)
        if not span:
            raise SpanError("empty span")
        if any(i < 0 or i >= len(hidden) for i in span):
            raise SpanError(f"span {span} out of bounds for sequence of length {len(hidden)}")
        if pooling == "first":
            out.append(hidden[span[0]])
        else:
            out.append(hidden[span].mean(axis=0))
    return out


# --- file formats -----------------------------------------------------------


def read_corpus(path) -> list:
    """Read a ``src<TAB>tgt`` parallel corpus."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected exactly one tab", line=lineno)
            pair = SentencePair.from_text(*parts)
            if not pair.src_tokens or not pair.tgt_tokens:
                raise ParseError("empty sentence side", line=lineno)
            pairs.append(pair)
    return pairs


def write_corpus(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(" ".join(p.src_tokens) + "\t" + " ".join(p.tgt_tokens) + "\n")


def read_pharaoh_file(path, pairs) -> list:
    """Read one alignment line per sentence pair; lengths come from ``pairs``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != len(pairs):
        raise DataError(f"{path}: {len(lines)} alignment lines for {len(pairs)} sentence pairs")
    out = []
    for lineno, (line, pair) in enumerate(zip(lines, pairs), 1):
        try:
            out.append(parse_pharaoh(line, len(pair.src_tokens), len(pair.tgt_tokens)))
        except ParseError as e:
            e.line = lineno
            e.args = (f"{path}:{lineno}: {e.args[0]}",)
            raise
    return out


def write_pharaoh_file(path, alignments):
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(format_pharaoh(a) + "\n")


def read_dictionary(path, fold_case: bool = True) -> BilingualDictionary:
    d = BilingualDictionary(fold_case=fold_case)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError("expected source_word<TAB>target_word", line=lineno)
            d.add(parts[0], parts[1])
    if not len(d):
        raise DataError(f"{path}: dictionary is empty")
    return d


def write_dictionary(path, dictionary: BilingualDictionary):
    with open(path, "w", encoding="utf-8") as fh:
        for src in sorted(dictionary.entries):
            for tgt in sorted(dictionary.entries[src]):
                fh.write(f"{src}\t{tgt}\n")
