"""Beam search and top-k sampling over a conditional next-token model.

``CountSeq2Seq`` is a small count-based stand-in for a neural query
generator: a mixture of a smoothed unigram model of the source document
(copying) and a smoothed bigram model of training queries.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from . import codec
from .rng import SplitMix64
from .text import DOC_TOKEN_LIMIT, QUERY_TOKEN_LIMIT, tokenize, truncate

__all__ = [
    "EOS",
    "ConditionalSequenceModel",
    "CountSeq2Seq",
    "DecodeParams",
    "Hypothesis",
    "ModelGenerator",
    "beam_search",
    "greedy_decode",
    "model_generator",
    "read_model",
    "score_sequence",
    "topk_sample",
    "train_count_model",
    "write_model",
]

EOS = "</s>"

MODEL_MAGIC = b"EXPCSM\x00\x01"
MODEL_VERSION = 1


class ConditionalSequenceModel(ABC):
    """Next-symbol distribution given a source and a decoded prefix.

    Symbols are the vocabulary tokens in order followed by ``EOS``; symbol
    ids index the arrays returned by :meth:`log_probs`.
    """

    vocab: tuple[str, ...]

    @property
    def symbols(self) -> tuple[str, ...]:
        return self.vocab + (EOS,)

    @property
    def eos_id(self) -> int:
        return len(self.vocab)

    @abstractmethod
    def log_probs(self, source: Sequence[str], prefix: Sequence[int]) -> np.ndarray:
        """Log-probabilities over all symbols; ``prefix`` holds symbol ids."""

    def bind(self, source: Sequence[str]) -> Callable[[Sequence[int]], np.ndarray]:
        """Return ``prefix -> log_probs(source, prefix)``; models may precompute here."""
        src = list(source)
        return lambda prefix: self.log_probs(src, prefix)

    def logprob(self, source: Sequence[str], prefix: Sequence[str]) -> dict[str, float]:
        ids = self.encode(prefix)
        lp = self.log_probs(source, ids)
        return dict(zip(self.symbols, lp.tolist()))

    def encode(self, tokens: Sequence[str]) -> list[int]:
        index = {t: i for i, t in enumerate(self.vocab)}
        try:
            return [index[t] for t in tokens]
        except KeyError as exc:
            raise KeyError(f"token {exc.args[0]!r} not in model vocabulary") from None


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    logprob: float

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class CountSeq2Seq(ConditionalSequenceModel):
    """``p(w | src, prev) = mix * p_copy(w | src) + (1 - mix) * p_bigram(w | prev)``.

    Both components are add-``alpha`` smoothed over vocabulary plus EOS.
    ``bigram`` maps a previous symbol (``None`` for the start of the query)
    to counts of the following symbol; ``EOS`` is a valid follower.
    """

    def __init__(
        self,
        vocab: Sequence[str],
        bigram: dict[str | None, Counter],
        mix: float = 0.7,
        alpha: float = 0.1,
    ) -> None:
        if not 0.0 <= mix <= 1.0:
            raise ValueError(f"mix must be in [0, 1], got {mix}")
        if not alpha > 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.vocab = tuple(vocab)
        if list(self.vocab) != sorted(set(self.vocab)):
            raise ValueError("vocabulary must be sorted and unique")
        self.mix = float(mix)
        self.alpha = float(alpha)
        self._index = {t: i for i, t in enumerate(self.vocab)}
        n_sym = len(self.vocab) + 1
        # rows keyed by previous symbol id; -1 is the start state
        self._rows: dict[int, np.ndarray] = {}
        for prev, followers in bigram.items():
            pid = -1 if prev is None else self._index[prev]
            row = np.zeros(n_sym, dtype=np.float64)
            for nxt, c in followers.items():
                row[self.eos_id if nxt == EOS else self._index[nxt]] += c
            self._rows[pid] = row
        self.bigram = {p: Counter(c) for p, c in bigram.items()}
        self._uniform = np.full(n_sym, 1.0 / n_sym)

    def _bigram_probs(self, prev: int) -> np.ndarray:
        row = self._rows.get(prev)
        if row is None:
            return self._uniform
        n_sym = len(row)
        return (row + self.alpha) / (row.sum() + self.alpha * n_sym)

    def _copy_probs(self, source: Sequence[str]) -> np.ndarray:
        n_sym = len(self.vocab) + 1
        counts = np.zeros(n_sym, dtype=np.float64)
        ids = [self._index[t] for t in source if t in self._index]
        if ids:
            np.add.at(counts, ids, 1.0)
        return (counts + self.alpha) / (len(ids) + self.alpha * n_sym)

    def log_probs(self, source: Sequence[str], prefix: Sequence[int]) -> np.ndarray:
        return self.bind(source)(prefix)

    def bind(self, source: Sequence[str]) -> Callable[[Sequence[int]], np.ndarray]:
        copy = self.mix * self._copy_probs(source)
        cache: dict[int, np.ndarray] = {}
        mix = self.mix

        def step(prefix: Sequence[int]) -> np.ndarray:
            prev = prefix[-1] if len(prefix) else -1
            out = cache.get(prev)
            if out is None:
                out = np.log(copy + (1.0 - mix) * self._bigram_probs(prev))
                cache[prev] = out
            return out

        return step


def train_count_model(
    pairs: Iterable[tuple[str, str]], mix: float = 0.7, alpha: float = 0.1
) -> CountSeq2Seq:
    """Fit bigram counts from ``(doc_text, query_text)`` pairs.

    The vocabulary is every token seen in queries or (400-token truncated)
    documents, so the copy component can reproduce document words.
    """
    vocab: set[str] = set()
    bigram: dict[str | None, Counter] = {}
    n = 0
    for doc_text, query_text in pairs:
        n += 1
        vocab.update(truncate(tokenize(doc_text), DOC_TOKEN_LIMIT))
        q = truncate(tokenize(query_text), QUERY_TOKEN_LIMIT)
        vocab.update(q)
        prev: str | None = None
        for tok in q + [EOS]:
            bigram.setdefault(prev, Counter())[tok] += 1
            prev = tok
    if n == 0:
        raise ValueError("no training pairs")
    return CountSeq2Seq(sorted(vocab), bigram, mix=mix, alpha=alpha)


# -- decoding -------------------------------------------------------------------


def _ids_to_tokens(model: ConditionalSequenceModel, ids: Sequence[int]) -> tuple[str, ...]:
    return tuple(model.vocab[i] for i in ids)


def score_sequence(model: ConditionalSequenceModel, source: Sequence[str], tokens: Sequence[str]) -> float:
    """Log-probability of ``tokens`` followed by EOS."""
    step = model.bind(source)
    ids = model.encode(tokens)
    total = 0.0
    for t in range(len(ids) + 1):
        lp = step(ids[:t])
        total += float(lp[ids[t]] if t < len(ids) else lp[model.eos_id])
    return total


def greedy_decode(model: ConditionalSequenceModel, source: Sequence[str], max_len: int) -> Hypothesis:
    """Argmax at every step; ties go to the lower symbol id."""
    step = model.bind(source)
    eos = model.eos_id
    seq: list[int] = []
    total = 0.0
    while len(seq) < max_len:
        lp = step(seq)
        s = int(np.argmax(lp))
        total += float(lp[s])
        if s == eos:
            return Hypothesis(_ids_to_tokens(model, seq), total)
        seq.append(s)
    total += float(step(seq)[eos])
    return Hypothesis(_ids_to_tokens(model, seq), total)


def beam_search(
    model: ConditionalSequenceModel, source: Sequence[str], beam: int, max_len: int
) -> list[Hypothesis]:
    """Best-``beam`` completed hypotheses by cumulative log-probability.

    At each step every live hypothesis is extended by every symbol; the pool
    of those extensions plus already-finished hypotheses is cut to the
    ``beam`` best (ties: lexicographic symbol-id order). Search ends when the
    kept set holds no live hypothesis. Prefixes of length ``max_len`` may only
    be extended by EOS. No length normalization.
    """
    if beam < 1 or max_len < 1:
        raise ValueError("beam and max_len must be >= 1")
    step = model.bind(source)
    eos = model.eos_id
    # (neg_logprob, ids, finished)
    kept: list[tuple[float, tuple[int, ...], bool]] = [(0.0, (), False)]
    while any(not fin for _, _, fin in kept):
        pool = []
        rows, row_hyps = [], []
        for neg, ids, fin in kept:
            if fin:
                pool.append((neg, ids, True))
                continue
            lp = step(ids)
            if len(ids) >= max_len:
                pool.append((neg - float(lp[eos]), ids + (eos,), True))
                continue
            rows.append(neg - lp)
            row_hyps.append(ids)
        if rows:
            cand = np.concatenate(rows)
            if len(cand) > beam:
                # anything tied with the beam-th score survives to the exact sort below
                cut = np.partition(cand, beam - 1)[beam - 1]
                flat = np.flatnonzero(cand <= cut)
            else:
                flat = np.arange(len(cand))
            n_sym = len(rows[0])
            for f in flat.tolist():
                r, s = divmod(f, n_sym)
                pool.append((float(cand[f]), row_hyps[r] + (s,), s == eos))
        pool.sort(key=lambda h: (h[0], h[1]))
        kept = pool[:beam]
    return [Hypothesis(_ids_to_tokens(model, ids[:-1]), -neg) for neg, ids, _ in kept]


def _topk_ids(probs: np.ndarray, k: int) -> np.ndarray:
    # stable sort: equal probabilities keep symbol-id order
    return np.argsort(-probs, kind="stable")[:k]


def topk_sample(
    model: ConditionalSequenceModel, source: Sequence[str], k: int, max_len: int, seed: int
) -> Hypothesis:
    """Ancestral sampling restricted to the ``k`` most probable symbols per step.

    Candidates are ordered by probability (ties by symbol id) and one is drawn
    by inverse CDF from a :class:`SplitMix64` stream seeded with ``seed``.
    The returned log-probability is under the unrestricted model.
    """
    if k < 1 or max_len < 1:
        raise ValueError("k and max_len must be >= 1")
    rng = SplitMix64(seed)
    step = model.bind(source)
    eos = model.eos_id
    seq: list[int] = []
    total = 0.0
    while len(seq) < max_len:
        lp = step(seq)
        p = np.exp(lp)
        cand = _topk_ids(p, k)
        s = int(cand[rng.choice_index(p[cand].tolist())])
        total += float(lp[s])
        if s == eos:
            return Hypothesis(_ids_to_tokens(model, seq), total)
        seq.append(s)
    total += float(step(seq)[eos])
    return Hypothesis(_ids_to_tokens(model, seq), total)


@dataclass(frozen=True)
class DecodeParams:
    method: Literal["topk", "beam"] = "topk"
    topk: int = 10
    max_len: int = 32

    def __post_init__(self):
        if self.method not in ("topk", "beam"):
            raise ValueError(f"unknown decoding method {self.method!r}")
        if self.topk < 1 or self.max_len < 1:
            raise ValueError("topk and max_len must be >= 1")


class ModelGenerator:
    """Query generator that decodes from a sequence model."""

    def __init__(self, model: ConditionalSequenceModel, params: DecodeParams = DecodeParams()):
        self.model = model
        self.params = params

    def generate(self, doc_text: str, n: int, seed: int, ext_id: str | None = None) -> list[str]:
        if n <= 0:
            return []
        source = truncate(tokenize(doc_text), DOC_TOKEN_LIMIT)
        p = self.params
        if p.method == "beam":
            hyps = beam_search(self.model, source, beam=n, max_len=p.max_len)
        else:
            hyps = [topk_sample(self.model, source, p.topk, p.max_len, seed + i) for i in range(n)]
        return [" ".join(truncate(list(h.tokens), QUERY_TOKEN_LIMIT)) for h in hyps]


def model_generator(model: ConditionalSequenceModel, params: DecodeParams = DecodeParams()) -> ModelGenerator:
    return ModelGenerator(model, params)


# -- persistence ------------------------------------------------------------------


def write_model(model: CountSeq2Seq, path: str | Path) -> None:
    meta = bytearray()
    meta += np.array([model.mix, model.alpha], dtype="<f8").tobytes()
    codec.put_varint(meta, len(model.vocab))
    vocab = bytearray()
    for t in model.vocab:
        codec.put_str(vocab, t)
    # bigram rows: prev id + 1 (0 = start), n followers, then (next id, count) pairs
    rows = bytearray()
    index = {t: i for i, t in enumerate(model.vocab)}
    eos = model.eos_id
    keyed = sorted(
        ((0 if p is None else index[p] + 1), c) for p, c in model.bigram.items()
    )
    codec.put_varint(rows, len(keyed))
    for pid, followers in keyed:
        items = sorted((eos if t == EOS else index[t], n) for t, n in followers.items())
        codec.put_varint(rows, pid)
        codec.put_varint(rows, len(items))
        for nid, n in items:
            codec.put_varint(rows, nid)
            codec.put_varint(rows, n)
    with open(path, "wb") as fh:
        codec.write_container(fh, MODEL_MAGIC, MODEL_VERSION, [(b"META", meta), (b"VOCB", vocab), (b"BIGR", rows)])


def read_model(path: str | Path) -> CountSeq2Seq:
    sec = codec.read_container(Path(path).read_bytes(), MODEL_MAGIC, MODEL_VERSION)
    for tag in (b"META", b"VOCB", b"BIGR"):
        if tag not in sec:
            raise codec.TruncatedFileError(f"missing section {tag.decode()}")
    meta = codec.ByteReader(sec[b"META"], "META")
    mix = meta.f64()
    alpha = meta.f64()
    n_vocab = meta.varint()
    vr = codec.ByteReader(sec[b"VOCB"], "VOCB")
    vocab = [vr.string() for _ in range(n_vocab)]
    symbols = vocab + [EOS]
    br = codec.ByteReader(sec[b"BIGR"], "BIGR")
    bigram: dict[str | None, Counter] = {}
    for _ in range(br.varint()):
        pid = br.varint()
        prev = None if pid == 0 else vocab[pid - 1]
        c = Counter()
        for _ in range(br.varint()):
            nid = br.varint()
            c[symbols[nid]] = br.varint()
        bigram[prev] = c
    return CountSeq2Seq(vocab, bigram, mix=mix, alpha=alpha)


def read_pairs(path: str | Path) -> Iterable[tuple[str, str]]:
    """Yield ``(doc_text, query)`` from ``query<TAB>doc_text`` lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            query, sep, doc = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'query<TAB>doc_text'")
            yield doc, query
