"""Tokenization, truncation and stopword handling.

One tokenizer is used everywhere (indexing, query generation, analysis) so
that a token "copied" from a document means the same thing in every module.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "DOC_TOKEN_LIMIT",
    "QUERY_TOKEN_LIMIT",
    "StopwordList",
    "default_stopwords",
    "is_stopword",
    "load_stopwords",
    "tokenize",
    "truncate",
]

DOC_TOKEN_LIMIT = 400
QUERY_TOKEN_LIMIT = 100

# Unicode letters and digits; underscore is excluded from \w on purpose.
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into maximal letter/digit runs.

    >>> tokenize("27°C (80°F)")
    ['27', 'c', '80', 'f']
    """
    return _TOKEN_RE.findall(text.lower())


def truncate(tokens: Sequence[str], limit: int) -> list[str]:
    if limit < 0:
        raise ValueError(f"limit must be >= 0, got {limit}")
    return list(tokens[:limit])


class StopwordList:
    """Immutable, sorted, de-duplicated set of stopwords."""

    __slots__ = ("_words", "_set")

    def __init__(self, words: Iterable[str]) -> None:
        cleaned = set()
        for w in words:
            toks = tokenize(w)
            if len(toks) != 1:
                raise ValueError(f"invalid stopword {w!r}")
            cleaned.add(toks[0])
        self._words = tuple(sorted(cleaned))
        self._set = frozenset(cleaned)

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    def __contains__(self, token: object) -> bool:
        return token in self._set

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self):
        return iter(self._words)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StopwordList) and self._words == other._words

    def __hash__(self) -> int:
        return hash(self._words)

    def __repr__(self) -> str:
        return f"StopwordList({len(self)} words)"


def _parse_stopword_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(line)
    return out


def load_stopwords(path: str | Path) -> StopwordList:
    """Read a stopword file: UTF-8, one word per line, ``#`` lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return StopwordList(_parse_stopword_lines(fh))


_DEFAULT: StopwordList | None = None


def default_stopwords() -> StopwordList:
    """The bundled 33-word English list (Lucene ``StopAnalyzer`` set)."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("expando").joinpath("data/stopwords.txt").read_text("utf-8")
        _DEFAULT = StopwordList(_parse_stopword_lines(text.splitlines()))
    return _DEFAULT


def is_stopword(token: str, stops: StopwordList | None = None) -> bool:
    if stops is None:
        stops = default_stopwords()
    return token in stops
