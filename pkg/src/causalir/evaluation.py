"""TREC-style evaluation: qrels, run files, average precision and P@k.

Conventions follow standard adhoc evaluation: graded judgments collapse to
binary (grade > 0 is relevant), a topic with no relevant documents scores
zero and still counts in the mean, and topics present in the qrels but
missing from a run contribute zero rather than being skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .results import ResultSet

log = logging.getLogger(__name__)

DEFAULT_RUN_TAG = "causalir"


class QrelsFormatError(ValueError):
    pass


class RunFormatError(ValueError):
    pass


@dataclass
class Qrels:
    """Graded relevance judgments keyed by topic, then document."""

    grades: dict[str, dict[str, int]] = field(default_factory=dict)

    def topics(self) -> list[str]:
        return list(self.grades)

    def relevant(self, topic_id: str) -> set[str]:
        return {d for d, g in self.grades.get(topic_id, {}).items() if g > 0}

    def num_relevant(self, topic_id: str) -> int:
        return len(self.relevant(topic_id))


def read_qrels(path: str | Path) -> Qrels:
    """Parse 'topic_id 0 doc_id grade' lines (whitespace separated)."""
    grades: dict[str, dict[str, int]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise QrelsFormatError(
                    f"{path}:{lineno}: expected 4 fields, got {len(fields)}"
                )
            topic_id, _iteration, doc_id, grade_text = fields
            try:
                grade = int(grade_text)
            except ValueError as exc:
                raise QrelsFormatError(
                    f"{path}:{lineno}: grade {grade_text!r} is not an integer"
                ) from exc
            if grade < 0:
                raise QrelsFormatError(f"{path}:{lineno}: negative grade {grade}")
            per_topic = grades.setdefault(topic_id, {})
            if doc_id in per_topic:
                raise QrelsFormatError(
                    f"{path}:{lineno}: duplicate judgment for ({topic_id}, {doc_id})"
                )
            per_topic[doc_id] = grade
    return Qrels(grades=grades)


@dataclass
class RunFile:
    """Ranked retrieval output: per topic, documents with rank and score."""

    tag: str = DEFAULT_RUN_TAG
    topics: dict[str, list[tuple[str, int, float]]] = field(default_factory=dict)

    def ranking(self, topic_id: str) -> list[str]:
        return [doc_id for doc_id, _rank, _score in self.topics.get(topic_id, [])]

    @classmethod
    def from_result_sets(
        cls, results: Iterable[ResultSet], tag: str = DEFAULT_RUN_TAG
    ) -> "RunFile":
        run = cls(tag=tag)
        for result in results:
            run.topics[result.topic_id] = [
                (hit.doc_id, rank, hit.score)
                for rank, hit in enumerate(result.hits, start=1)
            ]
        return run


def write_run(path: str | Path, run: RunFile) -> None:
    """Write 'topic_id Q0 doc_id rank score tag' lines; scores use repr so a
    read-back run evaluates bit-identically."""
    with open(path, "w", encoding="utf-8") as handle:
        for topic_id, entries in run.topics.items():
            for doc_id, rank, score in entries:
                handle.write(f"{topic_id} Q0 {doc_id} {rank} {repr(float(score))} {run.tag}\n")


def read_run(path: str | Path, max_depth: int | None = None) -> RunFile:
    """Parse and validate a run file.

    Ranks must be contiguous from 1 per topic, scores must not increase with
    rank, and no document may appear twice for one topic.
    """
    topics: dict[str, list[tuple[str, int, float]]] = {}
    tag = DEFAULT_RUN_TAG
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise RunFormatError(
                    f"{path}:{lineno}: expected 6 fields, got {len(fields)}"
                )
            topic_id, _q0, doc_id, rank_text, score_text, tag = fields
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError as exc:
                raise RunFormatError(f"{path}:{lineno}: bad rank or score") from exc
            topics.setdefault(topic_id, []).append((doc_id, rank, score))
    for topic_id, entries in topics.items():
        entries.sort(key=lambda e: e[1])
        seen: set[str] = set()
        previous_score: float | None = None
        for position, (doc_id, rank, score) in enumerate(entries, start=1):
            if rank != position:
                raise RunFormatError(
                    f"{path}: topic {topic_id}: ranks are not contiguous from 1"
                    f" (found {rank} at position {position})"
                )
            if doc_id in seen:
                raise RunFormatError(
                    f"{path}: topic {topic_id}: duplicate document {doc_id!r}"
                )
            seen.add(doc_id)
            if previous_score is not None and score > previous_score:
                raise RunFormatError(
                    f"{path}: topic {topic_id}: score increases at rank {rank}"
                )
            previous_score = score
        if max_depth is not None and len(entries) > max_depth:
            raise RunFormatError(
                f"{path}: topic {topic_id}: {len(entries)} entries exceed depth {max_depth}"
            )
    return RunFile(tag=tag, topics=topics)


# --- metrics -----------------------------------------------------------------


def average_precision(
    ranking: Sequence[str], relevant: set[str], total_relevant: int | None = None
) -> float:
    """AP = mean over relevant ranks of precision-at-that-rank, divided by R.

    R defaults to len(relevant) but can be larger when some relevant
    documents were never retrieved; R = 0 scores zero by convention.
    """
    total = len(relevant) if total_relevant is None else total_relevant
    if total == 0:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for position, doc_id in enumerate(ranking, start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / position
    return precision_sum / total


def precision_at_k(ranking: Sequence[str], relevant: set[str], k: int = 5) -> float:
    """Fraction of the top k that is relevant; the denominator is always k."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    hits = sum(1 for doc_id in ranking[:k] if doc_id in relevant)
    return hits / k


@dataclass(frozen=True)
class TopicMetrics:
    topic_id: str
    num_retrieved: int
    num_relevant: int
    ap: float
    p_at_k: float


@dataclass(frozen=True)
class EvaluationReport:
    per_topic: tuple[TopicMetrics, ...]
    mean_ap: float
    mean_p_at_k: float
    k: int


def evaluate_run(run: RunFile, qrels: Qrels, k: int = 5) -> EvaluationReport:
    """Mean metrics over every topic in the qrels.

    Topics absent from the run count as zero; topics in the run without
    judgments are ignored (logged), matching standard trec behavior.
    """
    per_topic: list[TopicMetrics] = []
    for topic_id in qrels.topics():
        ranking = run.ranking(topic_id)
        relevant = qrels.relevant(topic_id)
        per_topic.append(
            TopicMetrics(
                topic_id=topic_id,
                num_retrieved=len(ranking),
                num_relevant=len(relevant),
                ap=average_precision(ranking, relevant),
                p_at_k=precision_at_k(ranking, relevant, k=k),
            )
        )
    unjudged = set(run.topics) - set(qrels.grades)
    if unjudged:
        log.warning("run contains %d topics without judgments: %s",
                    len(unjudged), sorted(unjudged)[:5])
    count = len(per_topic)
    mean_ap = sum(m.ap for m in per_topic) / count if count else 0.0
    mean_p = sum(m.p_at_k for m in per_topic) / count if count else 0.0
    return EvaluationReport(
        per_topic=tuple(per_topic), mean_ap=mean_ap, mean_p_at_k=mean_p, k=k
    )


def mean_average_precision(run: RunFile, qrels: Qrels) -> float:
    return evaluate_run(run, qrels).mean_ap
