"""Inverted index and Okapi BM25 scoring.

The index is immutable once built: postings map each token to (ordinal, tf)
pairs sorted by document ordinal, and document ids live in an ordinal <-> id
map so postings stay compact.

Scoring uses the non-negative idf variant

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))

so that very common tokens can never push a document's score below zero.
A query is a token sequence, not a set: repeated tokens contribute once per
occurrence, matching the plain reading of the scoring formula's sum.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TokenizedDocument
from .results import ResultSet, ranked_result_set

SNAPSHOT_FORMAT = "causalir-lexical"
SNAPSHOT_VERSION = 1


class DuplicateDocumentError(ValueError):
    pass


class SnapshotFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class LexicalIndex:
    ids: list[str]
    doc_lengths: list[int]
    postings: dict[str, list[tuple[int, int]]]
    doc_frequency: dict[str, int]
    num_docs: int
    avg_doc_length: float
    _ordinals: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self._ordinals:
            self._ordinals = {doc_id: i for i, doc_id in enumerate(self.ids)}

    def ordinal(self, doc_id: str) -> int:
        return self._ordinals[doc_id]

    def doc_id(self, ordinal: int) -> str:
        return self.ids[ordinal]

    def term_frequency(self, token: str, ordinal: int) -> int:
        plist = self.postings.get(token)
        if not plist:
            return 0
        pos = bisect_left(plist, (ordinal,))
        if pos < len(plist) and plist[pos][0] == ordinal:
            return plist[pos][1]
        return 0

    def vocabulary_size(self) -> int:
        return len(self.postings)


def build_lexical_index(docs: Iterable[TokenizedDocument]) -> LexicalIndex:
    ids: list[str] = []
    seen: dict[str, int] = {}
    doc_lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for doc in docs:
        if doc.doc_id in seen:
            raise DuplicateDocumentError(f"duplicate document id {doc.doc_id!r}")
        ordinal = len(ids)
        seen[doc.doc_id] = ordinal
        ids.append(doc.doc_id)
        doc_lengths.append(doc.length)
        counts: dict[str, int] = {}
        for token in doc.tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            postings.setdefault(token, []).append((ordinal, tf))
    num_docs = len(ids)
    avg = (sum(doc_lengths) / num_docs) if num_docs else 0.0
    doc_frequency = {token: len(plist) for token, plist in postings.items()}
    return LexicalIndex(
        ids=ids,
        doc_lengths=doc_lengths,
        postings=postings,
        doc_frequency=doc_frequency,
        num_docs=num_docs,
        avg_doc_length=avg,
        _ordinals=seen,
    )


def idf(index: LexicalIndex, token: str) -> float:
    if index.num_docs == 0:
        return 0.0
    df = index.doc_frequency.get(token, 0)
    return math.log(1.0 + (index.num_docs - df + 0.5) / (df + 0.5))


def _length_norm(index: LexicalIndex, params: Bm25Params, ordinal: int) -> float:
    if index.avg_doc_length <= 0.0:
        return 1.0
    return 1.0 - params.b + params.b * (index.doc_lengths[ordinal] / index.avg_doc_length)


def bm25_score(
    index: LexicalIndex,
    params: Bm25Params,
    query_tokens: Sequence[str],
    ordinal: int,
) -> float:
    """BM25 score of one document against a query token sequence.

    The accumulation order (query tokens left to right) is shared with
    lexical_search so both paths produce bit-identical floats.
    """
    score = 0.0
    norm = params.k1 * _length_norm(index, params, ordinal)
    for token in query_tokens:
        tf = index.term_frequency(token, ordinal)
        if tf == 0:
            continue
        score += idf(index, token) * (tf * (params.k1 + 1.0)) / (tf + norm)
    return score


def lexical_search(
    index: LexicalIndex,
    params: Bm25Params,
    query_tokens: Sequence[str],
    k: int,
    topic_id: str = "",
    label: str = "lexical",
) -> ResultSet:
    """Top-k BM25 retrieval; only documents with positive scores are returned."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    accumulator: dict[int, float] = {}
    for token in query_tokens:
        plist = index.postings.get(token)
        if not plist:
            continue
        token_idf = idf(index, token)
        k1 = params.k1
        for ordinal, tf in plist:
            contribution = token_idf * (tf * (k1 + 1.0)) / (
                tf + k1 * _length_norm(index, params, ordinal)
            )
            accumulator[ordinal] = accumulator.get(ordinal, 0.0) + contribution
    scored = (
        (index.ids[ordinal], score)
        for ordinal, score in accumulator.items()
        if score > 0.0
    )
    return ranked_result_set(topic_id, scored, k=k, label=label)


# --- snapshot ---------------------------------------------------------------


def save_lexical_index(index: LexicalIndex, path: str | Path) -> None:
    """Write a portable JSON snapshot (integers only, so scores reload bit-identical)."""
    payload = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "ids": index.ids,
        "doc_lengths": index.doc_lengths,
        "postings": {token: [[o, tf] for o, tf in plist] for token, plist in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def load_lexical_index(path: str | Path) -> LexicalIndex:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict) or payload.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotFormatError(f"{path}: not a lexical index snapshot")
    if payload.get("version") != SNAPSHOT_VERSION:
        raise SnapshotFormatError(
            f"{path}: unsupported snapshot version {payload.get('version')!r}"
            f" (expected {SNAPSHOT_VERSION})"
        )
    ids = list(payload["ids"])
    doc_lengths = [int(n) for n in payload["doc_lengths"]]
    if len(ids) != len(doc_lengths):
        raise SnapshotFormatError(f"{path}: ids and doc_lengths disagree in length")
    postings = {
        token: [(int(o), int(tf)) for o, tf in plist]
        for token, plist in payload["postings"].items()
    }
    num_docs = len(ids)
    avg = (sum(doc_lengths) / num_docs) if num_docs else 0.0
    doc_frequency = {token: len(plist) for token, plist in postings.items()}
    return LexicalIndex(
        ids=ids,
        doc_lengths=doc_lengths,
        postings=postings,
        doc_frequency=doc_frequency,
        num_docs=num_docs,
        avg_doc_length=avg,
    )
