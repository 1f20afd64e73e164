"""BM25 ranking and RM3 pseudo-relevance feedback."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .index import InvertedIndex
from .text import StopwordList, tokenize

__all__ = [
    "BM25Params",
    "QueryRep",
    "RM3Params",
    "ScoredDoc",
    "bm25_term_score",
    "idf",
    "read_queries",
    "rm3_expand",
    "search",
    "search_rm3",
]


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class RM3Params:
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5
    drop_stopwords: bool = False

    def __post_init__(self):
        if self.fb_docs < 1 or self.fb_terms < 1:
            raise ValueError("fb_docs and fb_terms must be >= 1")
        if not 0.0 <= self.orig_weight <= 1.0:
            raise ValueError(f"orig_weight must be in [0, 1], got {self.orig_weight}")


@dataclass(frozen=True)
class QueryRep:
    """Weighted bag of query terms; every weight is strictly positive."""

    terms: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for t, w in self.terms.items():
            if not w > 0:
                raise ValueError(f"term {t!r} has non-positive weight {w}")

    @classmethod
    def parse(cls, text: str) -> "QueryRep":
        """Plain query: each distinct token weighted by its count."""
        return cls(dict(Counter(tokenize(text))))

    def normalized(self) -> dict[str, float]:
        total = sum(self.terms.values())
        return {t: w / total for t, w in self.terms.items()}

    def scaled(self, c: float) -> "QueryRep":
        return QueryRep({t: w * c for t, w in self.terms.items()})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class ScoredDoc:
    ext_id: str
    score: float


def idf(index: InvertedIndex, term: str) -> float:
    df = index.df(term)
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def _length_norm(index: InvertedIndex, params: BM25Params) -> np.ndarray:
    # k1 * (1 - b + b * dl / avgdl), one entry per document
    avg = index.avg_doclen if index.avg_doclen > 0 else 1.0
    return params.k1 * (1.0 - params.b + params.b * index.doclen / avg)


def bm25_term_score(
    index: InvertedIndex, term: str, tf: int, doc_ord: int, params: BM25Params = BM25Params()
) -> float:
    """Contribution of one (term, document) pair to the BM25 sum."""
    if term not in index:
        raise KeyError(f"term {term!r} not in index")
    if tf < 1:
        raise ValueError("tf must be >= 1")
    dl = index.doc_length(doc_ord)
    avg = index.avg_doclen if index.avg_doclen > 0 else 1.0
    norm = params.k1 * (1.0 - params.b + params.b * dl / avg)
    return idf(index, term) * tf * (params.k1 + 1.0) / (tf + norm)


def _score_all(index: InvertedIndex, query: QueryRep, params: BM25Params):
    """Dense score accumulator plus mask of documents matching any term."""
    scores = np.zeros(index.n_docs, dtype=np.float64)
    hit = np.zeros(index.n_docs, dtype=bool)
    norm = None
    k1p1 = params.k1 + 1.0
    for term, weight in query.terms.items():
        ords, tfs = index.postings(term)
        if len(ords) == 0:
            continue
        if norm is None:
            norm = _length_norm(index, params)
        tf = tfs.astype(np.float64)
        scores[ords] += weight * (idf(index, term) * tf * k1p1 / (tf + norm[ords]))
        hit[ords] = True
    return scores, hit


def _rank(index: InvertedIndex, scores: np.ndarray, cand: np.ndarray, k: int) -> np.ndarray:
    """Top-k candidate ordinals: score descending, then ext_id ascending."""
    if len(cand) > 4 * k:
        cs = scores[cand]
        kth = np.partition(cs, len(cs) - k)[len(cs) - k]
        cand = cand[cs >= kth]
    order = np.lexsort((index.id_rank[cand], -scores[cand]))
    return cand[order[:k]]


def search(
    index: InvertedIndex,
    query: QueryRep | str,
    k: int = 1000,
    params: BM25Params = BM25Params(),
) -> list[ScoredDoc]:
    """Rank documents sharing at least one term with ``query``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(query, str):
        query = QueryRep.parse(query)
    if not query:
        return []
    scores, hit = _score_all(index, query, params)
    cand = np.flatnonzero(hit)
    if len(cand) == 0:
        return []
    top = _rank(index, scores, cand, k)
    return [ScoredDoc(index.ext_ids[o], float(scores[o])) for o in top]


def rm3_expand(
    index: InvertedIndex,
    original: QueryRep,
    feedback: Sequence[ScoredDoc],
    params: RM3Params = RM3Params(),
    stops: StopwordList | None = None,
) -> QueryRep:
    """Interpolate ``original`` with a relevance model from ``feedback``.

    Feedback documents are weighted by a softmax over their retrieval scores;
    each contributes its maximum-likelihood unigram model. The top
    ``fb_terms`` relevance-model terms are kept and renormalized before
    interpolation. Weights of the result sum to one.
    """
    if not feedback:
        raise ValueError("no feedback documents")
    if not original:
        raise ValueError("original query is empty")
    fb = list(feedback[: params.fb_docs])
    raw = np.array([d.score for d in fb], dtype=np.float64)
    w = np.exp(raw - raw.max())
    w /= w.sum()

    rm: dict[str, float] = {}
    for doc, sd in zip(fb, w):
        ord_ = index.ordinal(doc.ext_id)
        dl = index.doc_length(ord_)
        if dl == 0:
            continue
        for term, tf in index.doc_terms(ord_).items():
            if params.drop_stopwords and stops is not None and term in stops:
                continue
            rm[term] = rm.get(term, 0.0) + (tf / dl) * sd

    top = sorted(rm.items(), key=lambda kv: (-kv[1], kv[0]))[: params.fb_terms]
    total = sum(v for _, v in top)
    rm_top = {t: v / total for t, v in top} if total > 0 else {}

    q_hat = original.normalized()
    lam = params.orig_weight
    out: dict[str, float] = {}
    for t in sorted(set(q_hat) | set(rm_top)):
        v = lam * q_hat.get(t, 0.0) + (1.0 - lam) * rm_top.get(t, 0.0)
        if v > 0:
            out[t] = v
    if not out:
        # relevance model empty (e.g. all feedback docs have length 0) and lam == 0
        out = q_hat
    return QueryRep(out)


def search_rm3(
    index: InvertedIndex,
    query: QueryRep | str,
    k: int = 1000,
    bm25: BM25Params = BM25Params(),
    rm3: RM3Params = RM3Params(),
    stops: StopwordList | None = None,
) -> list[ScoredDoc]:
    """Two-pass retrieval with an RM3-expanded second query."""
    if isinstance(query, str):
        query = QueryRep.parse(query)
    first = search(index, query, max(k, rm3.fb_docs), bm25) if query else []
    if not first:
        return first
    expanded = rm3_expand(index, query, first[: rm3.fb_docs], rm3, stops)
    return search(index, expanded, k, bm25)


def read_queries(path) -> dict[str, str]:
    """Read ``qid<TAB>query text`` lines, keeping file order."""
    queries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            qid, sep, text = line.partition("\t")
            if not sep or not qid:
                raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>query'")
            if qid in queries:
                raise ValueError(f"{path}:{lineno}: duplicate query id {qid!r}")
            queries[qid] = text
    return queries
