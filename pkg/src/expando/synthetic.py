"""Generated vocabulary-mismatch benchmark with a known synonym map.

Each concept has a *document form* (``cd17``) and a *query form*
(``cq5``). Query forms are coarser than document forms: ``class_size``
concepts share one query form, as "car" covers "sedan" and "hatchback".
Documents are written with document forms only; user queries mix the two,
so some relevant documents share no term with their query.
The oracle expansion predicts queries the way a well-trained generator
would: a blend of document forms (copied words) and query forms (new
words) for the document's main concepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expansion import ExpansionRecord, write_expansions
from .index import Document

__all__ = ["SyntheticBenchmark", "make_benchmark", "make_latency_corpus"]

_FILLER_STOPS = ("the", "of", "and", "in", "a", "is", "to", "for")
_QUERY_LEADS = ("what is", "where is the", "how to", "define", "")


@dataclass
class SyntheticBenchmark:
    docs: list[Document]
    queries: dict[str, str]
    qrels: dict[str, dict[str, int]]
    expansions: list[ExpansionRecord]
    synonyms: dict[str, str] = field(default_factory=dict)

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Write corpus/queries/qrels/expansion/synonym TSVs; return their paths."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": d / "corpus.tsv",
            "queries": d / "queries.tsv",
            "qrels": d / "qrels.tsv",
            "expansions": d / "expansions.tsv",
            "synonyms": d / "synonyms.tsv",
        }
        with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
            for doc in self.docs:
                fh.write(f"{doc.ext_id}\t{doc.text}\n")
        with open(paths["queries"], "w", encoding="utf-8", newline="\n") as fh:
            for qid, text in self.queries.items():
                fh.write(f"{qid}\t{text}\n")
        with open(paths["qrels"], "w", encoding="utf-8", newline="\n") as fh:
            for qid, judged in self.qrels.items():
                for doc_id in judged:
                    fh.write(f"{qid}\t{doc_id}\n")
        write_expansions(self.expansions, paths["expansions"])
        with open(paths["synonyms"], "w", encoding="utf-8", newline="\n") as fh:
            for k, v in self.synonyms.items():
                fh.write(f"{k}\t{v}\n")
        return paths


def _doc_form(c: int) -> str:
    return f"cd{c}"


def _query_form(c: int, class_size: int) -> str:
    return f"cq{c // class_size}"


def _background(rng: np.random.Generator, size: int, vocab: int) -> np.ndarray:
    # Zipf-like background vocabulary, truncated to ``vocab`` words
    ranks = np.arange(1, vocab + 1)
    p = 1.0 / ranks
    p /= p.sum()
    return rng.choice(vocab, size=size, p=p)


def _make_docs(rng, n_docs, n_concepts, n_background, doc_len):
    topics = np.stack([rng.choice(n_concepts, size=3, replace=False) for _ in range(n_docs)])
    incidental = rng.integers(0, n_concepts, size=(n_docs, 2))
    bg = _background(rng, n_docs * doc_len, n_background).reshape(n_docs, doc_len)
    stop_ix = rng.integers(0, len(_FILLER_STOPS), size=(n_docs, doc_len // 4))
    reps = rng.integers(1, 4, size=(n_docs, 3))
    docs = []
    for i in range(n_docs):
        words = [f"w{b}" for b in bg[i]]
        words += [_FILLER_STOPS[s] for s in stop_ix[i]]
        for c, r in zip(topics[i], reps[i]):
            words += [_doc_form(c)] * int(r)
        words += [_doc_form(c) for c in incidental[i]]
        order = rng.permutation(len(words))
        docs.append(Document(f"D{i}", " ".join(words[j] for j in order)))
    return docs, topics


def _oracle_queries(rng, topics_row, n_pred, p_new, class_size, p_wrong, n_concepts):
    out = []
    for _ in range(n_pred):
        k = int(rng.integers(1, 3))
        picked = rng.choice(topics_row, size=k, replace=False)
        words = []
        lead = _QUERY_LEADS[int(rng.integers(0, len(_QUERY_LEADS)))]
        if lead:
            words.append(lead)
        for c in picked:
            if rng.random() < p_new:
                if rng.random() < p_wrong:
                    # plausible but wrong prediction
                    c = int(rng.integers(0, n_concepts))
                words.append(_query_form(c, class_size))
            else:
                words.append(_doc_form(c))
        out.append(" ".join(words))
    return out


def make_benchmark(
    seed: int = 0,
    n_docs: int = 500,
    n_queries: int = 100,
    n_concepts: int = 250,
    n_background: int = 2000,
    doc_len: int = 30,
    p_synonym: float = 0.6,
    n_predicted: int = 20,
    p_new: float = 0.5,
    class_size: int = 3,
    p_wrong: float = 0.3,
) -> SyntheticBenchmark:
    """Build corpus, queries (one relevant document each), qrels and oracle expansions."""
    if n_queries > n_docs:
        raise ValueError("need at least as many documents as queries")
    rng = np.random.default_rng(seed)
    docs, topics = _make_docs(rng, n_docs, n_concepts, n_background, doc_len)

    targets = rng.choice(n_docs, size=n_queries, replace=False)
    queries: dict[str, str] = {}
    qrels: dict[str, dict[str, int]] = {}
    for j, t in enumerate(targets):
        picked = rng.choice(topics[t], size=2, replace=False)
        words = [
            _query_form(c, class_size) if rng.random() < p_synonym else _doc_form(c) for c in picked
        ]
        lead = _QUERY_LEADS[int(rng.integers(0, len(_QUERY_LEADS)))]
        qid = f"Q{j}"
        queries[qid] = " ".join(([lead] if lead else []) + words)
        qrels[qid] = {docs[t].ext_id: 1}

    expansions = [
        ExpansionRecord(docs[i].ext_id, _oracle_queries(
            rng, topics[i], n_predicted, p_new, class_size, p_wrong, n_concepts
        ))
        for i in range(n_docs)
    ]
    synonyms = {_doc_form(c): _query_form(c, class_size) for c in range(n_concepts)}
    return SyntheticBenchmark(docs, queries, qrels, expansions, synonyms)


def make_latency_corpus(
    n_docs: int = 100_000, n_queries: int = 200, seed: int = 0, n_predicted: int = 10
) -> SyntheticBenchmark:
    """Large corpus for timing: same generator, scaled vocabulary."""
    n_concepts = max(250, n_docs // 2)
    return make_benchmark(
        seed=seed,
        n_docs=n_docs,
        n_queries=min(n_queries, n_docs),
        n_concepts=n_concepts,
        n_background=20_000,
        n_predicted=n_predicted,
    )
