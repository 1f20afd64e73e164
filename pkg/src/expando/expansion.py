"""Document expansion: append predicted queries to documents before indexing."""

from __future__ import annotations

import json
import logging
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Literal, Mapping, Protocol, Sequence

from .index import Document
from .rng import SplitMix64
from .text import DOC_TOKEN_LIMIT, QUERY_TOKEN_LIMIT, StopwordList, default_stopwords, tokenize, truncate

__all__ = [
    "ExpansionError",
    "ExpansionRecord",
    "ExpansionSummary",
    "FileBackedGenerator",
    "QueryGenerator",
    "TokenPartition",
    "apply_expansions",
    "copy_generator",
    "CopyGenerator",
    "expand_corpus",
    "expand_document",
    "filter_expansion",
    "generate_queries",
    "partition_tokens",
    "read_expansions",
    "write_expansions",
]

log = logging.getLogger(__name__)

FilterMode = Literal["all", "copied_only", "new_only"]
FILTER_MODES = ("all", "copied_only", "new_only")


class ExpansionError(RuntimeError):
    def __init__(self, ext_id: str, cause: BaseException | str):
        super().__init__(f"query generation failed for document {ext_id!r}: {cause}")
        self.ext_id = ext_id


@dataclass
class ExpansionRecord:
    ext_id: str
    queries: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TokenPartition:
    copied: frozenset[str]
    new: frozenset[str]
    stop: frozenset[str]


class QueryGenerator(Protocol):
    """Anything that predicts ``n`` queries for a document.

    ``ext_id`` is passed for generators backed by precomputed predictions;
    model-based generators ignore it. Output must be deterministic in
    ``(doc_text, n, seed)``.
    """

    def generate(self, doc_text: str, n: int, seed: int, ext_id: str | None = None) -> list[str]:
        ...


@dataclass
class ExpansionSummary:
    documents: int = 0
    expanded: int = 0
    missing: int = 0
    short: int = 0
    queries: int = 0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def _cap_query(q: str) -> str:
    toks = tokenize(q)
    if len(toks) <= QUERY_TOKEN_LIMIT:
        return q
    return " ".join(truncate(toks, QUERY_TOKEN_LIMIT))


def expand_document(doc: Document, queries: Sequence[str]) -> Document:
    """Append ``queries`` to the document text, separated by single spaces."""
    if not queries:
        return doc
    return Document(doc.ext_id, doc.text + " " + " ".join(queries))


def generate_queries(
    corpus: Iterable[Document],
    gen: QueryGenerator,
    n: int = 10,
    seed: int = 0,
    summary: ExpansionSummary | None = None,
) -> Iterator[tuple[Document, list[str]]]:
    """Yield ``(doc, predicted queries)`` for each document, in input order.

    The generator sees the document truncated to 400 tokens. A generator
    exception aborts with the offending document id.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    for doc in corpus:
        if summary is not None:
            summary.documents += 1
        if n == 0:
            yield doc, []
            continue
        src = " ".join(truncate(tokenize(doc.text), DOC_TOKEN_LIMIT))
        try:
            queries = gen.generate(src, n, seed, ext_id=doc.ext_id)
        except ExpansionError:
            raise
        except Exception as exc:
            raise ExpansionError(doc.ext_id, exc) from exc
        queries = [_cap_query(q) for q in queries]
        if summary is not None:
            summary.queries += len(queries)
            if not queries:
                summary.missing += 1
            else:
                summary.expanded += 1
                if len(queries) < n:
                    summary.short += 1
        yield doc, queries
    if summary is not None and summary.missing:
        log.warning("%d documents received no predicted queries", summary.missing)


def expand_corpus(
    corpus: Iterable[Document],
    gen: QueryGenerator,
    n: int = 10,
    seed: int = 0,
    summary: ExpansionSummary | None = None,
) -> Iterator[Document]:
    """Expand every document with ``n`` generated queries, keeping input order.

    The indexed text keeps the full original document; only the generator
    input is truncated.
    """
    for doc, queries in generate_queries(corpus, gen, n, seed, summary):
        yield expand_document(doc, queries)


def apply_expansions(
    corpus: Iterable[Document],
    records: Mapping[str, ExpansionRecord] | Iterable[ExpansionRecord],
    summary: ExpansionSummary | None = None,
    n: int | None = None,
) -> Iterator[Document]:
    """Append precomputed queries verbatim; documents without a record pass through."""
    if not isinstance(records, Mapping):
        records = {r.ext_id: r for r in records}
    for doc in corpus:
        rec = records.get(doc.ext_id)
        queries = [] if rec is None else rec.queries[:n] if n is not None else rec.queries
        if summary is not None:
            summary.documents += 1
            if rec is None:
                summary.missing += 1
            elif queries:
                summary.expanded += 1
            summary.queries += len(queries)
        yield expand_document(doc, queries)
    if summary is not None and summary.missing:
        log.warning("%d documents had no expansion record and were indexed unexpanded", summary.missing)


class FileBackedGenerator:
    """Serves queries predicted offline, keyed by document id.

    Returns the first ``n`` stored queries (fewer if the record is short;
    none if the document has no record). The seed is ignored.
    """

    def __init__(self, records: Mapping[str, ExpansionRecord] | Iterable[ExpansionRecord]):
        if not isinstance(records, Mapping):
            records = {r.ext_id: r for r in records}
        self.records = dict(records)

    @classmethod
    def from_file(cls, path: str | Path) -> "FileBackedGenerator":
        return cls(read_expansions(path))

    def generate(self, doc_text: str, n: int, seed: int, ext_id: str | None = None) -> list[str]:
        if ext_id is None:
            raise ValueError("file-backed generation needs the document id")
        rec = self.records.get(ext_id)
        if rec is None:
            return []
        return [_cap_query(q) for q in rec.queries[:n]]


# -- copied / new analysis ----------------------------------------------------


def partition_tokens(
    doc_text: str, queries: Sequence[str], stops: StopwordList | None = None
) -> TokenPartition:
    """Split distinct predicted-query tokens into stop / copied / new."""
    if stops is None:
        stops = default_stopwords()
    doc_vocab = set(tokenize(doc_text))
    copied, new, stop = set(), set(), set()
    for q in queries:
        for t in tokenize(q):
            if t in stops:
                stop.add(t)
            elif t in doc_vocab:
                copied.add(t)
            else:
                new.add(t)
    return TokenPartition(frozenset(copied), frozenset(new), frozenset(stop))


def filter_expansion(
    record: ExpansionRecord,
    doc_text: str,
    stops: StopwordList | None = None,
    mode: FilterMode = "all",
) -> ExpansionRecord:
    """Keep only copied or only new tokens of each predicted query."""
    if mode not in FILTER_MODES:
        raise ValueError(f"unknown filter mode {mode!r}")
    if mode == "all":
        return record
    if stops is None:
        stops = default_stopwords()
    doc_vocab = set(tokenize(doc_text))
    want_copied = mode == "copied_only"
    out = []
    for q in record.queries:
        kept = [
            t for t in tokenize(q)
            if t not in stops and ((t in doc_vocab) == want_copied)
        ]
        if kept:
            out.append(" ".join(kept))
    return ExpansionRecord(record.ext_id, out)


# -- baseline generator ---------------------------------------------------------


def copy_generator(
    doc_text: str, n: int, seed: int, stops: StopwordList | None = None, length: int = 5
) -> list[str]:
    """Queries of up to ``length`` distinct document terms drawn by tf, without replacement.

    Query ``i`` uses the stream seeded with ``seed + i``.
    """
    if stops is None:
        stops = default_stopwords()
    counts = Counter(t for t in tokenize(doc_text) if t not in stops)
    # first-occurrence order keeps sampling independent of hash seeds
    terms = list(counts)
    out = []
    for i in range(n):
        rng = SplitMix64(seed + i)
        pool = terms[:]
        weights = [counts[t] for t in pool]
        picked = []
        while pool and len(picked) < length:
            j = rng.choice_index(weights)
            picked.append(pool.pop(j))
            weights.pop(j)
        out.append(" ".join(picked))
    return out


class CopyGenerator:
    """:func:`copy_generator` behind the generator interface."""

    def __init__(self, stops: StopwordList | None = None, length: int = 5):
        self.stops = stops
        self.length = length

    def generate(self, doc_text: str, n: int, seed: int, ext_id: str | None = None) -> list[str]:
        return copy_generator(doc_text, n, seed, self.stops, self.length)


# -- expansion TSV --------------------------------------------------------------


def read_expansions(path: str | Path) -> "OrderedDict[str, ExpansionRecord]":
    """Read ``ext_id<TAB>query`` lines; repeated ids accumulate in file order."""
    records: OrderedDict[str, ExpansionRecord] = OrderedDict()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            ext_id, sep, query = line.partition("\t")
            if not sep or not ext_id:
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>query'")
            rec = records.get(ext_id)
            if rec is None:
                rec = records[ext_id] = ExpansionRecord(ext_id)
            rec.queries.append(query)
    return records


def write_expansions(records: Iterable[ExpansionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            for q in rec.queries:
                if "\t" in q or "\n" in q:
                    raise ValueError(f"query for {rec.ext_id!r} contains a tab or newline")
                fh.write(f"{rec.ext_id}\t{q}\n")
