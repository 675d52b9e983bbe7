"""Narrative filtering and graph-based keyphrase extraction.

Topic narratives spell out what makes a document relevant and, crucially,
what does not ("... are not relevant").  filter_narrative drops those
negated sentences before keyword extraction so the query is built only from
the positive statement of the information need.

Keyphrases are extracted TopicRank-style without a POS tagger: candidates
are maximal runs of content tokens (stopwords and a small closed list of
common verbs act as phrase boundaries), candidates are clustered by stem
overlap, clusters are ranked by PageRank over a complete graph whose edge
weights grow with how close together two clusters' occurrences sit in the
text, and each topic contributes its earliest-occurring candidate.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import normalize_token

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_NEGATION_PATTERNS: tuple[str, ...] = (
    r"\birrelevant\b",
    r"\bnot\s+relevant\b",
    r"\bnot\s+considered\b",
    r"\bnot\s+related\b",
)

DAMPING = 0.85
PAGERANK_TOL = 1e-6
PAGERANK_MAX_ITER = 100
MERGE_THRESHOLD = 0.25
DEFAULT_MAX_KEYWORDS = 15

# Function words. BM25 indexing keeps them (idf handles the weighting); they
# matter only here, as phrase boundaries and as tokens banned from keywords.
STOPWORDS: frozenset[str] = frozenset("""
i me my myself we our ours ourselves us you your yours yourself yourselves
he him his himself she her hers herself it its itself they them their theirs
themselves what which who whom whose this that these those am is are was were
be been being have has had having do does did doing can could may might must
shall should will would cannot a an the and but if or nor because as until
while of at by for with about against between into through during before
after above below to from up down in out on off over under again further
then once here there when where why how all any both each few more most
other some such no not only own same so than too very just now also ever
never one every either neither much many per via upon within without among
across toward towards etc s t d ll m o re ve y ain aren couldn didn doesn
don hadn hasn haven isn ma mightn mustn needn shan shouldn wasn weren won
wouldn
""".split())

# Closed list of frequent verbs (with inflections) standing in for a POS
# tagger: candidate phrases break on these, mimicking noun-phrase chunking.
COMMON_VERBS: frozenset[str] = frozenset("""
describe describes described describing discuss discusses discussed
discussing mention mentions mentioned mentioning report reports reported
reporting state states stated stating relate relates related relating refer
refers referred referring consider considers considered considering contain
contains contained containing include includes included including concern
concerns concerned concerning pertain pertains pertained pertaining regard
regards regarded regarding focus focuses focused focusing deal deals dealt
dealing make makes made making take takes took taken taking give gives gave
given giving get gets got gotten getting go goes went gone going come comes
came coming see sees saw seen seeing know knows knew known knowing think
thinks thought thinking say says said saying tell tells told telling find
finds found finding use uses used using want wants wanted wanting need needs
needed needing look looks looked looking seem seems seemed seeming become
becomes became becoming cause causes caused causing lead leads led leading
result results resulted resulting happen happens happened happening occur
occurs occurred occurring
""".split())


@dataclass(frozen=True)
class SentenceSplit:
    sentences: tuple[str, ...]
    offsets: tuple[int, ...]  # character offset of each sentence start


def split_sentences(text: str) -> SentenceSplit:
    """Split on ., ! or ? followed by whitespace or end of text."""
    sentences: list[str] = []
    offsets: list[int] = []
    start = 0
    for match in re.finditer(r"[.!?]+(?=\s|$)", text):
        segment = text[start : match.end()]
        stripped = segment.strip()
        if stripped:
            offsets.append(start + (len(segment) - len(segment.lstrip())))
            sentences.append(stripped)
        start = match.end()
    tail = text[start:]
    if tail.strip():
        offsets.append(start + (len(tail) - len(tail.lstrip())))
        sentences.append(tail.strip())
    return SentenceSplit(sentences=tuple(sentences), offsets=tuple(offsets))


def filter_narrative(
    narrative: str, patterns: Sequence[str] = DEFAULT_NEGATION_PATTERNS
) -> str:
    """Drop sentences matching any negation pattern (case-insensitive regex)."""
    compiled = [re.compile(p, re.IGNORECASE) for p in patterns]
    split = split_sentences(narrative)
    kept = [s for s in split.sentences if not any(rx.search(s) for rx in compiled)]
    return " ".join(kept)


# --- candidates -------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """One keyphrase candidate: a stemmed token sequence and its occurrences."""

    phrase: tuple[str, ...]
    stems: frozenset[str]
    offsets: tuple[int, ...]  # token-stream index of each occurrence start

    @property
    def first_offset(self) -> int:
        return self.offsets[0]


@dataclass(frozen=True)
class TopicCluster:
    candidates: tuple[Candidate, ...]

    @property
    def first_offset(self) -> int:
        return min(c.first_offset for c in self.candidates)

    def representative(self) -> Candidate:
        return min(self.candidates, key=lambda c: (c.first_offset, c.phrase))


@dataclass(frozen=True)
class TopicGraph:
    clusters: tuple[TopicCluster, ...]
    weights: np.ndarray  # (T, T) symmetric, zero diagonal
    scores: np.ndarray  # (T,) PageRank probabilities, sum 1


def extract_candidates(
    text: str,
    stopwords: frozenset[str] = STOPWORDS,
    verbs: frozenset[str] = COMMON_VERBS,
) -> list[Candidate]:
    """Maximal content-token runs, grouped into candidates by stemmed form.

    Both the surface token and its stem are checked against the word lists,
    so a keyphrase can never smuggle a stopword in through stemming.
    """
    runs: dict[tuple[str, ...], list[int]] = {}
    current: list[str] = []
    current_start = 0
    order: list[tuple[str, ...]] = []

    def flush() -> None:
        if current:
            key = tuple(current)
            if key not in runs:
                runs[key] = []
                order.append(key)
            runs[key].append(current_start)
            current.clear()

    for position, match in enumerate(_TOKEN_RE.finditer(text.lower())):
        surface = match.group()
        stem = normalize_token(surface)
        if (
            not stem
            or surface in stopwords
            or stem in stopwords
            or surface in verbs
            or stem in verbs
        ):
            flush()
            continue
        if not current:
            current_start = position
        current.append(stem)
    flush()
    return [
        Candidate(phrase=key, stems=frozenset(key), offsets=tuple(sorted(runs[key])))
        for key in order
    ]


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def cluster_topics(
    candidates: Sequence[Candidate], threshold: float = MERGE_THRESHOLD
) -> list[TopicCluster]:
    """Average-link agglomerative clustering over stem-set Jaccard similarity.

    Greedily merges the highest-average-similarity pair while it reaches the
    threshold; ties break toward the earliest pair for determinism.
    """
    clusters: list[list[Candidate]] = [[c] for c in candidates]
    while len(clusters) > 1:
        best_pair: tuple[int, int] | None = None
        best_sim = 0.0
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                pair_sims = [
                    _jaccard(a.stems, b.stems)
                    for a in clusters[i]
                    for b in clusters[j]
                ]
                avg = sum(pair_sims) / len(pair_sims)
                # Strict > keeps the earliest pair on ties, for determinism.
                if avg >= threshold and (best_pair is None or avg > best_sim):
                    best_sim = avg
                    best_pair = (i, j)
        if best_pair is None:
            break
        i, j = best_pair
        clusters[i].extend(clusters[j])
        del clusters[j]
    return [TopicCluster(candidates=tuple(group)) for group in clusters]


def rank_topics(clusters: Sequence[TopicCluster]) -> TopicGraph:
    """Damped PageRank over the complete topic graph.

    Edge weight between two topics sums 1/|oi - oj| over all pairs of
    occurrence offsets drawn from either side; dangling topics (isolated,
    all-zero column) spread their mass uniformly so scores stay a
    probability distribution.
    """
    size = len(clusters)
    weights = np.zeros((size, size), dtype=np.float64)
    for i in range(size):
        for j in range(i + 1, size):
            weight = 0.0
            for a in clusters[i].candidates:
                for b in clusters[j].candidates:
                    for oi in a.offsets:
                        for oj in b.offsets:
                            if oi != oj:
                                weight += 1.0 / abs(oi - oj)
            weights[i, j] = weights[j, i] = weight
    if size == 0:
        return TopicGraph(clusters=tuple(clusters), weights=weights, scores=np.zeros(0))
    scores = np.full(size, 1.0 / size, dtype=np.float64)
    out_weight = weights.sum(axis=0)
    dangling = out_weight == 0.0
    for _ in range(PAGERANK_MAX_ITER):
        ratios = np.divide(scores, out_weight, out=np.zeros_like(scores), where=~dangling)
        incoming = weights @ ratios
        dangling_mass = float(scores[dangling].sum())
        updated = (1.0 - DAMPING) / size + DAMPING * (incoming + dangling_mass / size)
        residual = float(np.abs(updated - scores).sum())
        scores = updated
        if residual < PAGERANK_TOL:
            break
    return TopicGraph(clusters=tuple(clusters), weights=weights, scores=scores)


def topicrank_keywords(
    text: str,
    max_keywords: int = DEFAULT_MAX_KEYWORDS,
    stopwords: frozenset[str] = STOPWORDS,
    verbs: frozenset[str] = COMMON_VERBS,
    threshold: float = MERGE_THRESHOLD,
) -> list[str]:
    """Ranked, deduplicated keyword tokens (stemmed) for a text.

    Topics are visited by descending score (ties toward earlier first
    occurrence); each contributes the tokens of its earliest candidate.
    """
    candidates = extract_candidates(text, stopwords=stopwords, verbs=verbs)
    if not candidates:
        return []
    clusters = cluster_topics(candidates, threshold=threshold)
    graph = rank_topics(clusters)
    order = sorted(
        range(len(clusters)),
        key=lambda t: (-graph.scores[t], clusters[t].first_offset),
    )
    keywords: list[str] = []
    seen: set[str] = set()
    for t in order:
        for token in clusters[t].representative().phrase:
            if token not in seen:
                seen.add(token)
                keywords.append(token)
                if len(keywords) >= max_keywords:
                    return keywords
    return keywords


def load_word_list(path: str | Path) -> tuple[str, ...]:
    """Read a plain-text word or pattern list: one entry per line.

    Blank lines and '#' comment lines are skipped.  Used for custom stopword
    lists (pass as a frozenset to the extraction functions) and custom
    negation pattern lists.
    """
    entries: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            entry = line.strip()
            if entry and not entry.startswith("#"):
                entries.append(entry)
    return tuple(entries)
