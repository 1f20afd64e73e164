"""Per-query latency measurement and the number-of-queries sweep."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .evaluation import Qrels, Run, mrr_at_k
from .expansion import QueryGenerator, expand_corpus
from .index import Document, InvertedIndex, build_index
from .retrieval import BM25Params, RM3Params, search, search_rm3

__all__ = [
    "LatencyReport",
    "SweepError",
    "SweepPoint",
    "measure_latency",
    "retrieve_all",
    "sweep_num_queries",
    "write_sweep_tsv",
]


@dataclass
class LatencyReport:
    label: str
    n_queries: int
    mean_ms: float
    p50_ms: float
    p95_ms: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class SweepPoint:
    n_appended: int
    mrr10: float
    run: Run | None = field(default=None, repr=False, compare=False)


class SweepError(RuntimeError):
    def __init__(self, n: int, cause: BaseException):
        super().__init__(f"sweep failed at n={n}: {cause}")
        self.n = n


def retrieve_all(
    index: InvertedIndex,
    queries: Mapping[str, str],
    k: int = 1000,
    bm25: BM25Params = BM25Params(),
    rm3: RM3Params | None = None,
) -> Run:
    """Run every query; ``rm3`` switches on two-pass feedback retrieval."""
    run: Run = {}
    for qid, text in queries.items():
        if rm3 is None:
            hits = search(index, text, k, bm25)
        else:
            hits = search_rm3(index, text, k, bm25, rm3)
        run[qid] = [(h.ext_id, h.score) for h in hits]
    return run


def measure_latency(
    index: InvertedIndex,
    queries: Sequence[str],
    k: int = 1000,
    warmup: int = 1,
    reps: int = 3,
    bm25: BM25Params = BM25Params(),
    rm3: RM3Params | None = None,
    label: str = "index",
) -> LatencyReport:
    """Wall-clock milliseconds per query (tokenize + retrieve), single-threaded.

    ``warmup`` passes over the query set are discarded; each of the ``reps``
    timed passes contributes one sample per query.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not queries:
        raise ValueError("no queries to time")

    def once(q: str) -> None:
        if rm3 is None:
            search(index, q, k, bm25)
        else:
            search_rm3(index, q, k, bm25, rm3)

    for _ in range(warmup):
        for q in queries:
            once(q)
    samples = []
    clock = time.perf_counter
    for _ in range(reps):
        for q in queries:
            t0 = clock()
            once(q)
            samples.append((clock() - t0) * 1000.0)
    arr = np.asarray(samples)
    return LatencyReport(
        label=label,
        n_queries=len(queries),
        mean_ms=float(statistics.fmean(samples)),
        p50_ms=float(np.percentile(arr, 50)),
        p95_ms=float(np.percentile(arr, 95)),
    )


def sweep_num_queries(
    corpus: Sequence[Document],
    generator: QueryGenerator,
    queries: Mapping[str, str],
    qrels: Qrels,
    ns: Sequence[int] = (0, 1, 5, 10, 20),
    seed: int = 0,
    k: int = 1000,
    bm25: BM25Params = BM25Params(),
    keep_runs: bool = False,
) -> list[SweepPoint]:
    """MRR@10 after expanding with ``n`` queries, rebuilding the index per point."""
    if not ns:
        raise ValueError("ns must be non-empty")
    corpus = list(corpus)
    points = []
    for n in ns:
        try:
            index = build_index(expand_corpus(corpus, generator, n, seed))
            run = retrieve_all(index, queries, k, bm25)
            value = mrr_at_k(run, qrels, 10).mean
        except Exception as exc:
            raise SweepError(n, exc) from exc
        points.append(SweepPoint(n, value, run if keep_runs else None))
    return points


def write_sweep_tsv(points: Sequence[SweepPoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n\tmrr10\n")
        for p in points:
            fh.write(f"{p.n_appended}\t{p.mrr10:.6f}\n")
