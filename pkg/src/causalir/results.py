"""Ranked retrieval results shared by the lexical, semantic and fusion layers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class ScoredHit:
    doc_id: str
    score: float
    sources: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class ResultSet:
    """A ranked list of unique documents for one topic.

    Hits are ordered by descending score with ties broken by ascending
    doc_id, which keeps every ranking in the system deterministic.
    """

    topic_id: str
    hits: tuple[ScoredHit, ...] = ()

    def doc_ids(self) -> list[str]:
        return [hit.doc_id for hit in self.hits]

    def __len__(self) -> int:
        return len(self.hits)

    def validate(self) -> None:
        seen = set()
        for hit in self.hits:
            if hit.doc_id in seen:
                raise ValueError(f"duplicate doc_id {hit.doc_id!r} in result set")
            seen.add(hit.doc_id)
        for prev, cur in zip(self.hits, self.hits[1:]):
            if cur.score > prev.score:
                raise ValueError("hits are not sorted by descending score")
            if cur.score == prev.score and cur.doc_id < prev.doc_id:
                raise ValueError("score ties are not sorted by ascending doc_id")


def ranked_result_set(
    topic_id: str,
    scored: Iterable[tuple[str, float]],
    k: int | None = None,
    label: str | None = None,
) -> ResultSet:
    """Order (doc_id, score) pairs into a ResultSet, truncating to k if given."""
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    if k is not None:
        ordered = ordered[:k]
    sources = frozenset((label,)) if label else frozenset()
    hits = tuple(ScoredHit(doc_id=d, score=s, sources=sources) for d, s in ordered)
    return ResultSet(topic_id=topic_id, hits=hits)
