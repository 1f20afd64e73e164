"""The four retrieval conditions and the copied/new expansion ablation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .bench import retrieve_all
from .config import PRESETS, Config, load_preset
from .evaluation import Qrels, Run, map_metric, mrr_at_k, recall_at_k
from .expansion import ExpansionRecord, apply_expansions, filter_expansion
from .index import Document, InvertedIndex, build_index
from .text import StopwordList

__all__ = ["ConditionRow", "compare_presets", "expansion_ablation", "write_report_tsv"]


@dataclass
class ConditionRow:
    name: str
    mrr10: float
    map: float
    recall100: float
    recall1000: float
    run: Run | None = None

    HEADER = ("condition", "mrr10", "map", "recall100", "recall1000")

    def cells(self) -> list[str]:
        return [self.name] + [f"{v:.6f}" for v in (self.mrr10, self.map, self.recall100, self.recall1000)]


def _row(name: str, run: Run, qrels: Qrels, keep_run: bool) -> ConditionRow:
    return ConditionRow(
        name,
        mrr_at_k(run, qrels, 10).mean,
        map_metric(run, qrels, 1000).mean,
        recall_at_k(run, qrels, 100).mean,
        recall_at_k(run, qrels, 1000).mean,
        run if keep_run else None,
    )


def compare_presets(
    docs: Sequence[Document],
    expansions: Mapping[str, ExpansionRecord],
    queries: Mapping[str, str],
    qrels: Qrels,
    base: Config | None = None,
    presets: Sequence[str] = PRESETS,
    keep_runs: bool = False,
) -> list[ConditionRow]:
    """One report row per preset; each index is built once and shared."""
    base = base or Config()
    indexes: dict[bool, InvertedIndex] = {}
    rows = []
    for name in presets:
        cfg = load_preset(name, base)
        if cfg.expand not in indexes:
            if cfg.expand:
                trimmed = {e: ExpansionRecord(e, r.queries[: cfg.num_queries]) for e, r in expansions.items()}
                indexes[True] = build_index(apply_expansions(docs, trimmed))
            else:
                indexes[False] = build_index(docs)
        run = retrieve_all(indexes[cfg.expand], queries, cfg.depth, cfg.bm25, cfg.rm3_params)
        rows.append(_row(name, run, qrels, keep_runs))
    return rows


def expansion_ablation(
    docs: Sequence[Document],
    expansions: Mapping[str, ExpansionRecord],
    queries: Mapping[str, str],
    qrels: Qrels,
    stops: StopwordList | None = None,
    config: Config | None = None,
    keep_runs: bool = False,
) -> list[ConditionRow]:
    """BM25 with no expansion, then all / copied-only / new-only expansions."""
    cfg = config or Config()
    texts = {d.ext_id: d.text for d in docs}
    rows = [_row("none", retrieve_all(build_index(docs), queries, cfg.depth, cfg.bm25), qrels, keep_runs)]
    for mode in ("all", "copied_only", "new_only"):
        filtered = {}
        for e, r in expansions.items():
            if e not in texts:
                continue
            trimmed = ExpansionRecord(e, r.queries[: cfg.num_queries])
            filtered[e] = filter_expansion(trimmed, texts[e], stops, mode)
        index = build_index(apply_expansions(docs, filtered))
        rows.append(_row(mode, retrieve_all(index, queries, cfg.depth, cfg.bm25), qrels, keep_runs))
    return rows


def write_report_tsv(rows: Sequence[ConditionRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(ConditionRow.HEADER) + "\n")
        for r in rows:
            fh.write("\t".join(r.cells()) + "\n")
