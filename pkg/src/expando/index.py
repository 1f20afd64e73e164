"""Immutable in-memory inverted index and its on-disk format.

The byte layout is documented in ``docs/index-format.md``.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import codec
from .text import tokenize

__all__ = [
    "Document",
    "InvertedIndex",
    "CorpusError",
    "build_index",
    "read_corpus",
    "read_index",
    "write_index",
]

INDEX_MAGIC = b"EXPIDX\x00\x01"
INDEX_VERSION = 1


class CorpusError(ValueError):
    """Bad corpus input or an invalid lookup."""


@dataclass(frozen=True)
class Document:
    ext_id: str
    text: str


class InvertedIndex:
    """Term dictionary, postings and document lengths.

    Postings for each term are two parallel ``int64`` arrays: strictly
    increasing document ordinals and their term frequencies. Instances are
    never mutated after construction, so they can be shared between threads.
    """

    def __init__(
        self,
        ext_ids: list[str],
        doclen: np.ndarray,
        postings: Mapping[str, tuple[np.ndarray, np.ndarray]],
    ) -> None:
        self.ext_ids = list(ext_ids)
        self.doclen = np.asarray(doclen, dtype=np.int64)
        self.n_docs = len(self.ext_ids)
        self.avg_doclen = float(self.doclen.sum()) / self.n_docs if self.n_docs else 0.0
        # dictionary order is sorted so persisted files are reproducible
        self._postings = {t: postings[t] for t in sorted(postings)}
        self._ord_of = {e: i for i, e in enumerate(self.ext_ids)}
        # rank of each ordinal among ext_ids sorted ascending (tie-break key)
        order = sorted(range(self.n_docs), key=self.ext_ids.__getitem__)
        self.id_rank = np.empty(self.n_docs, dtype=np.int64)
        self.id_rank[order] = np.arange(self.n_docs)
        self._forward = None
        self._forward_lock = threading.Lock()

    # -- lookups -----------------------------------------------------------

    @property
    def vocabulary(self) -> list[str]:
        return list(self._postings)

    def __contains__(self, term: str) -> bool:
        return term in self._postings

    def __len__(self) -> int:
        return self.n_docs

    def df(self, term: str) -> int:
        p = self._postings.get(term)
        return 0 if p is None else len(p[0])

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """``(doc_ords, tfs)`` for ``term``; empty arrays when unseen."""
        p = self._postings.get(term)
        if p is None:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        return p

    def tf(self, term: str, ord_: int) -> int:
        ords, tfs = self.postings(term)
        i = int(np.searchsorted(ords, ord_))
        if i < len(ords) and ords[i] == ord_:
            return int(tfs[i])
        return 0

    def doc_length(self, ord_: int) -> int:
        self._check_ord(ord_)
        return int(self.doclen[ord_])

    def ordinal(self, ext_id: str) -> int:
        try:
            return self._ord_of[ext_id]
        except KeyError:
            raise CorpusError(f"unknown document id {ext_id!r}") from None

    def _check_ord(self, ord_: int) -> None:
        if not 0 <= ord_ < self.n_docs:
            raise CorpusError(f"document ordinal {ord_} out of range [0, {self.n_docs})")

    def items(self) -> Iterator[tuple[str, tuple[np.ndarray, np.ndarray]]]:
        return iter(self._postings.items())

    # -- forward view (derived, for relevance feedback) ----------------------

    def doc_terms(self, ord_: int) -> dict[str, int]:
        """Term frequencies of one document, reconstructed from postings."""
        self._check_ord(ord_)
        vocab, starts, term_ids, tfs = self._forward_view()
        lo, hi = starts[ord_], starts[ord_ + 1]
        return {vocab[t]: int(f) for t, f in zip(term_ids[lo:hi], tfs[lo:hi])}

    def _forward_view(self):
        if self._forward is None:
            with self._forward_lock:
                if self._forward is None:
                    self._forward = self._build_forward()
        return self._forward

    def _build_forward(self):
        vocab = list(self._postings)
        if vocab:
            ords = np.concatenate([p[0] for p in self._postings.values()])
            tfs = np.concatenate([p[1] for p in self._postings.values()])
            term_ids = np.repeat(np.arange(len(vocab)), [len(p[0]) for p in self._postings.values()])
        else:
            ords = tfs = term_ids = np.zeros(0, dtype=np.int64)
        order = np.argsort(ords, kind="stable")
        counts = np.bincount(ords, minlength=self.n_docs)
        starts = np.zeros(self.n_docs + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        return vocab, starts, term_ids[order], tfs[order]

    # -- equality (observational) -----------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        if self.ext_ids != other.ext_ids or not np.array_equal(self.doclen, other.doclen):
            return False
        if list(self._postings) != list(other._postings):
            return False
        return all(
            np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            for a, b in zip(self._postings.values(), other._postings.values())
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"InvertedIndex(n_docs={self.n_docs}, terms={len(self._postings)}, avg_doclen={self.avg_doclen:.3f})"


def build_index(corpus: Iterable[Document]) -> InvertedIndex:
    """Index a finite stream of documents; ordinals follow stream order."""
    ext_ids: list[str] = []
    seen: set[str] = set()
    lengths: list[int] = []
    acc: dict[str, tuple[list[int], list[int]]] = {}
    for ord_, doc in enumerate(corpus):
        if not doc.ext_id:
            raise CorpusError(f"document #{ord_} has an empty id")
        if doc.ext_id in seen:
            raise CorpusError(f"duplicate document id {doc.ext_id!r}")
        seen.add(doc.ext_id)
        ext_ids.append(doc.ext_id)
        toks = tokenize(doc.text)
        lengths.append(len(toks))
        for term, tf in Counter(toks).items():
            entry = acc.get(term)
            if entry is None:
                acc[term] = ([ord_], [tf])
            else:
                entry[0].append(ord_)
                entry[1].append(tf)
    if not ext_ids:
        raise CorpusError("cannot index an empty corpus")
    postings = {
        t: (np.asarray(o, dtype=np.int64), np.asarray(f, dtype=np.int64))
        for t, (o, f) in acc.items()
    }
    return InvertedIndex(ext_ids, np.asarray(lengths, dtype=np.int64), postings)


def read_corpus(path: str | Path) -> Iterator[Document]:
    """Stream ``ext_id<TAB>text`` lines (MS MARCO collection layout)."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            ext_id, sep, text = line.partition("\t")
            if not sep or not ext_id:
                raise CorpusError(f"{path}:{lineno}: expected 'id<TAB>text'")
            yield Document(ext_id, text)


# -- persistence --------------------------------------------------------------


def write_index(index: InvertedIndex, path: str | Path) -> None:
    meta = bytearray()
    codec.put_varint(meta, index.n_docs)
    codec.put_varint(meta, len(index.vocabulary))

    docs = bytearray()
    for e in index.ext_ids:
        codec.put_str(docs, e)
    docs += codec.encode_varints(index.doclen)

    post = bytearray()
    dic = bytearray()
    for term, (ords, tfs) in index.items():
        codec.put_str(dic, term)
        codec.put_varint(dic, len(ords))
        codec.put_varint(dic, len(post))
        deltas = np.diff(ords, prepend=0)
        post += codec.encode_varints(deltas)
        post += codec.encode_varints(tfs)

    with open(path, "wb") as fh:
        codec.write_container(
            fh, INDEX_MAGIC, INDEX_VERSION,
            [(b"META", meta), (b"DOCS", docs), (b"DICT", dic), (b"POST", post)],
        )


def read_index(path: str | Path) -> InvertedIndex:
    data = Path(path).read_bytes()
    sec = codec.read_container(data, INDEX_MAGIC, INDEX_VERSION)
    for tag in (b"META", b"DOCS", b"DICT", b"POST"):
        if tag not in sec:
            raise codec.TruncatedFileError(f"missing section {tag.decode()}")

    meta = codec.ByteReader(sec[b"META"], "META")
    n_docs = meta.varint()
    n_terms = meta.varint()

    docs = codec.ByteReader(sec[b"DOCS"], "DOCS")
    ext_ids = [docs.string() for _ in range(n_docs)]
    doclen = codec.decode_varints(docs.rest(), n_docs)

    dic = codec.ByteReader(sec[b"DICT"], "DICT")
    entries = []
    for _ in range(n_terms):
        entries.append((dic.string(), dic.varint(), dic.varint()))
    if not dic.done():
        raise codec.FormatError("trailing bytes in DICT")

    post_bytes = sec[b"POST"]
    postings = {}
    prev_term = None
    for i, (term, df, off) in enumerate(entries):
        if prev_term is not None and term <= prev_term:
            raise codec.FormatError(f"dictionary not sorted at {term!r}")
        prev_term = term
        end = entries[i + 1][2] if i + 1 < len(entries) else len(post_bytes)
        vals = codec.decode_varints(post_bytes[off:end], 2 * df)
        ords = np.cumsum(vals[:df])
        tfs = vals[df:]
        postings[term] = (ords, tfs)
    if n_docs == 0:
        raise codec.FormatError("index holds no documents")
    return InvertedIndex(ext_ids, doclen, postings)
