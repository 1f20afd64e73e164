"""Document expansion by predicted queries, BM25/RM3 retrieval and IR evaluation."""

from .index import Document, InvertedIndex, build_index, read_index, write_index
from .retrieval import BM25Params, QueryRep, RM3Params, ScoredDoc, search, search_rm3
from .text import tokenize

__version__ = "0.1.0"

__all__ = [
    "BM25Params",
    "Document",
    "InvertedIndex",
    "QueryRep",
    "RM3Params",
    "ScoredDoc",
    "build_index",
    "read_index",
    "search",
    "search_rm3",
    "tokenize",
    "write_index",
]
