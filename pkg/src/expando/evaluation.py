"""Run/qrels I/O, ranking metrics, re-rank merging and expansion statistics.

Metric conventions follow ``trec_eval -c``: every query in the qrels counts
toward the mean, and a query missing from the run scores zero. Ranks are
recomputed from scores (descending, ties by ascending document id) rather
than taken from the run file.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .expansion import ExpansionRecord
from .index import Document
from .text import StopwordList, default_stopwords, tokenize

__all__ = [
    "FormatError",
    "MetricReport",
    "Qrels",
    "Run",
    "expansion_stats",
    "map_metric",
    "mrr_at_k",
    "read_external_scores",
    "read_qrels",
    "read_run",
    "recall_at_k",
    "rerank_merge",
    "sorted_ranking",
    "write_run",
]

log = logging.getLogger(__name__)

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]


class FormatError(ValueError):
    pass


@dataclass
class MetricReport:
    name: str
    per_query: dict[str, float]
    mean: float
    warnings: int = 0

    def __getitem__(self, qid: str) -> float:
        return self.per_query[qid]


def sorted_ranking(docs: Iterable[tuple[str, float]]) -> list[str]:
    return [d for d, _ in sorted(docs, key=lambda x: (-x[1], x[0]))]


def _report(name: str, qrels: Qrels, values: dict[str, float], warnings: int = 0) -> MetricReport:
    per_query = {qid: values.get(qid, 0.0) for qid in qrels}
    mean = math.fsum(per_query.values()) / len(per_query) if per_query else 0.0
    return MetricReport(name, per_query, mean, warnings)


def _relevant(judged: Mapping[str, int]) -> set[str]:
    return {d for d, g in judged.items() if g > 0}


def mrr_at_k(run: Run, qrels: Qrels, k: int = 10) -> MetricReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    values = {}
    for qid, judged in qrels.items():
        rel = _relevant(judged)
        for rank, doc in enumerate(sorted_ranking(run.get(qid, ()))[:k], 1):
            if doc in rel:
                values[qid] = 1.0 / rank
                break
    return _report(f"mrr@{k}", qrels, values)


def map_metric(run: Run, qrels: Qrels, depth: int = 1000) -> MetricReport:
    """Mean average precision with binary relevance (grade > 0)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    values = {}
    warnings = 0
    for qid, judged in qrels.items():
        rel = _relevant(judged)
        if not rel:
            warnings += 1
            continue
        hits = 0
        total = 0.0
        for rank, doc in enumerate(sorted_ranking(run.get(qid, ()))[:depth], 1):
            if doc in rel:
                hits += 1
                total += hits / rank
        values[qid] = total / len(rel)
    if warnings:
        log.warning("map: %d queries have no relevant documents", warnings)
    return _report("map", qrels, values, warnings)


def recall_at_k(run: Run, qrels: Qrels, k: int = 1000) -> MetricReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    values = {}
    warnings = 0
    for qid, judged in qrels.items():
        rel = _relevant(judged)
        if not rel:
            warnings += 1
            continue
        top = set(sorted_ranking(run.get(qid, ()))[:k])
        values[qid] = len(rel & top) / len(rel)
    if warnings:
        log.warning("recall: %d queries have no relevant documents", warnings)
    return _report(f"recall@{k}", qrels, values, warnings)


# -- file formats ------------------------------------------------------------------


def write_run(run: Run, path: str | Path, tag: str = "expando") -> None:
    """Write 6-column TREC format, ranks renumbered from score order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, docs in run.items():
            ordered = sorted(docs, key=lambda x: (-x[1], x[0]))
            for rank, (doc, score) in enumerate(ordered, 1):
                fh.write(f"{qid} Q0 {doc} {rank} {score:.6f} {tag}\n")


def read_run(path: str | Path) -> Run:
    run: Run = OrderedDict()
    seen: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _, doc, rank, score, _ = parts
            try:
                int(rank)
                value = float(score)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad rank or score") from None
            docs = seen.setdefault(qid, set())
            if doc in docs:
                raise FormatError(f"{path}:{lineno}: duplicate document {doc!r} for query {qid!r}")
            docs.add(doc)
            run.setdefault(qid, []).append((doc, value))
    return run


def read_qrels(path: str | Path) -> Qrels:
    """Read TREC qrels (``qid 0 doc grade``) or MS MARCO TSV (``qid<TAB>doc``)."""
    qrels: Qrels = OrderedDict()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 4:
                qid, _, doc, grade_s = parts
                try:
                    grade = int(grade_s)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: grade {grade_s!r} is not an integer") from None
                if grade < 0:
                    # trec_eval treats negative grades as unjudged-nonrelevant
                    grade = 0
            elif len(parts) == 2:
                qid, doc = parts
                grade = 1
            else:
                raise FormatError(f"{path}:{lineno}: expected 'qid 0 doc grade' or 'qid<TAB>doc'")
            judged = qrels.setdefault(qid, {})
            if doc in judged:
                raise FormatError(f"{path}:{lineno}: duplicate judgment for ({qid}, {doc})")
            judged[doc] = grade
    return qrels


def read_external_scores(path: str | Path) -> dict[tuple[str, str], float]:
    scores = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'qid<TAB>doc<TAB>score'")
            try:
                scores[(parts[0], parts[1])] = float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad score {parts[2]!r}") from None
    return scores


# -- re-ranking hook -------------------------------------------------------------------


def rerank_merge(run: Run, scores: Mapping[tuple[str, str], float], depth: int = 1000) -> Run:
    """Re-order each query's top ``depth`` by external scores.

    Unscored documents sink below scored ones and keep their relative order;
    documents below ``depth`` are untouched. When the order changes, the
    re-ranked head gets rank-derived scores placed above the tail's best
    score, so score order always equals the merged order.
    """
    out: Run = OrderedDict()
    for qid, docs in run.items():
        ordered = sorted(docs, key=lambda x: (-x[1], x[0]))
        head, tail = ordered[:depth], ordered[depth:]
        new_head = sorted(head, key=lambda x: -scores.get((qid, x[0]), -math.inf))
        if [d for d, _ in new_head] == [d for d, _ in head]:
            out[qid] = ordered
            continue
        floor = tail[0][1] if tail else 0.0
        n = len(new_head)
        out[qid] = [(d, floor + float(n - i)) for i, (d, _) in enumerate(new_head)] + tail
    return out


# -- expansion statistics -----------------------------------------------------------------


@dataclass
class ExpansionStats:
    stop_frac: float = 0.0
    copied_frac: float = 0.0
    new_frac: float = 0.0
    tokens: int = 0
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "stop_frac": self.stop_frac,
            "copied_frac": self.copied_frac,
            "new_frac": self.new_frac,
            "tokens": self.tokens,
        }


def expansion_stats(
    corpus: Iterable[Document] | Mapping[str, str],
    records: Iterable[ExpansionRecord],
    stops: StopwordList | None = None,
    by_type: bool = False,
) -> ExpansionStats:
    """Fractions of predicted-query tokens that are stopwords, copied or new.

    ``stop_frac`` is over all predicted tokens; ``copied_frac`` and
    ``new_frac`` are over non-stopword tokens. Counts are token occurrences
    unless ``by_type`` is set, in which case each distinct token counts once
    per document.
    """
    if stops is None:
        stops = default_stopwords()
    if isinstance(corpus, Mapping):
        texts = dict(corpus)
    else:
        texts = {d.ext_id: d.text for d in corpus}
    n_stop = n_copied = n_new = 0
    for rec in records:
        if rec.ext_id not in texts:
            raise KeyError(f"expansion record references unknown document {rec.ext_id!r}")
        doc_vocab = set(tokenize(texts[rec.ext_id]))
        toks = [t for q in rec.queries for t in tokenize(q)]
        if by_type:
            toks = list(dict.fromkeys(toks))
        for t in toks:
            if t in stops:
                n_stop += 1
            elif t in doc_vocab:
                n_copied += 1
            else:
                n_new += 1
    total = n_stop + n_copied + n_new
    stats = ExpansionStats(tokens=total)
    if total == 0:
        stats.warnings.append("no predicted-query tokens")
        log.warning("expansion_stats: no predicted-query tokens")
        return stats
    stats.stop_frac = n_stop / total
    content = n_copied + n_new
    if content:
        stats.copied_frac = n_copied / content
        stats.new_frac = n_new / content
    return stats
