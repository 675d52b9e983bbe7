"""Query strategies and score fusion.

Each topic is searched three ways:

* Q1 embeds the topic title and asks the semantic index,
* Q2 runs the preprocessed title through BM25,
* Q3 filters negated sentences out of the narrative, extracts keyphrase
  tokens, and runs those through BM25.

A document found by several strategies has its scores summed (exact
summation, so strategy order can never change a ranking); sources record
which strategies contributed.  Four single-strategy baselines reuse the
same building blocks for comparison runs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Topic, preprocess
from .embedding import EmbeddingProvider, FileBackedStore
from .keywords import (
    DEFAULT_MAX_KEYWORDS,
    DEFAULT_NEGATION_PATTERNS,
    STOPWORDS,
    filter_narrative,
    load_word_list,
    topicrank_keywords,
)
from .lexical import Bm25Params, LexicalIndex, lexical_search
from .results import ResultSet, ScoredHit
from .semantic import AnnForest, VectorStore, semantic_search

log = logging.getLogger(__name__)

DEFAULT_PER_QUERY_K = 500
DEFAULT_FINAL_K = 500

STRATEGY_Q1 = "Q1"
STRATEGY_Q2 = "Q2"
STRATEGY_Q3 = "Q3"
ALL_STRATEGIES = (STRATEGY_Q1, STRATEGY_Q2, STRATEGY_Q3)

BASELINE_NAMES = (
    "narrative-bm25",
    "query-bm25",
    "query+narrative-semantic",
    "query-semantic",
)


class StrategyError(RuntimeError):
    """A query strategy failed for a topic; carries topic and strategy context."""

    def __init__(self, topic_id: str, strategy: str, cause: Exception) -> None:
        super().__init__(f"topic {topic_id}: strategy {strategy} failed: {cause}")
        self.topic_id = topic_id
        self.strategy = strategy
        self.__cause__ = cause


@dataclass(frozen=True)
class PipelineConfig:
    per_query_k: int = DEFAULT_PER_QUERY_K
    final_k: int = DEFAULT_FINAL_K
    k1: float = 1.5
    b: float = 0.75
    max_keywords: int = DEFAULT_MAX_KEYWORDS
    negation_patterns: tuple[str, ...] = DEFAULT_NEGATION_PATTERNS
    stopwords: frozenset[str] = STOPWORDS
    strategies: tuple[str, ...] = ALL_STRATEGIES
    normalize: str = "none"  # "none" | "minmax"
    search_budget: int | None = None
    lenient: bool = False

    def __post_init__(self) -> None:
        if self.per_query_k < 1 or self.final_k < 1:
            raise ValueError("per_query_k and final_k must be >= 1")
        unknown = set(self.strategies) - set(ALL_STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")
        if self.normalize not in ("none", "minmax"):
            raise ValueError(f"normalize must be 'none' or 'minmax', got {self.normalize!r}")

    @property
    def bm25(self) -> Bm25Params:
        return Bm25Params(k1=self.k1, b=self.b)


@dataclass
class SearchIndexes:
    lexical: LexicalIndex | None = None
    store: VectorStore | None = None
    forest: AnnForest | None = None

    def require_lexical(self) -> LexicalIndex:
        if self.lexical is None:
            raise ValueError("this operation needs a lexical index")
        return self.lexical

    def require_store(self) -> VectorStore:
        if self.store is None:
            raise ValueError("this operation needs a semantic index")
        return self.store


def topic_vector(provider: EmbeddingProvider, topic: Topic, text: str) -> np.ndarray:
    """Query vector for a topic: precomputed by topic id when the provider is
    a vector file that has it, otherwise embedded from the text."""
    if isinstance(provider, FileBackedStore) and topic.topic_id in provider:
        return provider.vector(topic.topic_id)
    return provider.embed(text)


def run_q1(
    topic: Topic,
    indexes: SearchIndexes,
    provider: EmbeddingProvider,
    config: PipelineConfig,
) -> ResultSet:
    """Semantic retrieval by topic title."""
    store = indexes.require_store()
    query = topic_vector(provider, topic, topic.title)
    return semantic_search(
        store,
        query,
        config.per_query_k,
        forest=indexes.forest,
        search_budget=config.search_budget,
        topic_id=topic.topic_id,
        label=STRATEGY_Q1,
    )


def run_q2(topic: Topic, indexes: SearchIndexes, config: PipelineConfig) -> ResultSet:
    """BM25 retrieval by preprocessed topic title."""
    index = indexes.require_lexical()
    tokens = preprocess(topic.title)
    return lexical_search(
        index, config.bm25, tokens, config.per_query_k,
        topic_id=topic.topic_id, label=STRATEGY_Q2,
    )


def run_q3(topic: Topic, indexes: SearchIndexes, config: PipelineConfig) -> ResultSet:
    """BM25 retrieval by narrative keyphrases.

    The narrative is first stripped of negated sentences; keyphrase tokens
    come out of the extractor already stem-normalized, so they hit the index
    directly.  A topic whose narrative filters away to nothing contributes
    an empty result set (logged) rather than failing.
    """
    index = indexes.require_lexical()
    filtered = filter_narrative(topic.narrative, patterns=config.negation_patterns)
    keyword_tokens = topicrank_keywords(
        filtered, max_keywords=config.max_keywords, stopwords=config.stopwords
    )
    if not keyword_tokens:
        log.info("topic %s: no narrative keywords; Q3 contributes nothing", topic.topic_id)
        return ResultSet(topic_id=topic.topic_id, hits=())
    return lexical_search(
        index, config.bm25, keyword_tokens, config.per_query_k,
        topic_id=topic.topic_id, label=STRATEGY_Q3,
    )


def _minmax(result: ResultSet) -> ResultSet:
    """Scale scores to [0, 1] within one result set (max maps to 1; a
    constant set maps wholly to 1)."""
    if not result.hits:
        return result
    scores = [h.score for h in result.hits]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        hits = tuple(replace(h, score=1.0) for h in result.hits)
    else:
        span = hi - lo
        hits = tuple(replace(h, score=(h.score - lo) / span) for h in result.hits)
    return ResultSet(topic_id=result.topic_id, hits=hits)


def aggregate(results: Sequence[ResultSet], final_k: int = DEFAULT_FINAL_K) -> ResultSet:
    """Sum scores per document across result sets; union their sources.

    Sums use math.fsum, so the result is exactly invariant to the order the
    result sets are given in.
    """
    if not results:
        raise ValueError("aggregate needs at least one result set")
    topic_ids = {r.topic_id for r in results}
    if len(topic_ids) != 1:
        raise ValueError(f"cannot aggregate across topics: {sorted(topic_ids)}")
    scores: dict[str, list[float]] = {}
    sources: dict[str, set[str]] = {}
    for result in results:
        for hit in result.hits:
            scores.setdefault(hit.doc_id, []).append(hit.score)
            sources.setdefault(hit.doc_id, set()).update(hit.sources)
    merged = (
        (doc_id, math.fsum(values), frozenset(sources[doc_id]))
        for doc_id, values in scores.items()
    )
    ordered = sorted(merged, key=lambda item: (-item[1], item[0]))[:final_k]
    hits = tuple(ScoredHit(doc_id=d, score=s, sources=src) for d, s, src in ordered)
    return ResultSet(topic_id=topic_ids.pop(), hits=hits)


def run_pipeline(
    topic: Topic,
    indexes: SearchIndexes,
    provider: EmbeddingProvider | None,
    config: PipelineConfig = PipelineConfig(),
) -> ResultSet:
    """All enabled strategies for one topic, fused by score summation.

    A strategy failure aborts the topic unless config.lenient is set, in
    which case it is logged and the remaining strategies carry the topic.
    """
    runners: dict[str, Callable[[], ResultSet]] = {
        STRATEGY_Q1: lambda: run_q1(topic, indexes, _require_provider(provider), config),
        STRATEGY_Q2: lambda: run_q2(topic, indexes, config),
        STRATEGY_Q3: lambda: run_q3(topic, indexes, config),
    }
    partials: list[ResultSet] = []
    for name in config.strategies:
        try:
            result = runners[name]()
        except Exception as exc:
            error = StrategyError(topic.topic_id, name, exc)
            if not config.lenient:
                raise error from exc
            log.warning("%s (continuing leniently)", error)
            continue
        log.debug("topic %s: %s returned %d hits", topic.topic_id, name, len(result))
        partials.append(result)
    if not partials:
        raise StrategyError(topic.topic_id, "+".join(config.strategies),
                            RuntimeError("every strategy failed"))
    if config.normalize == "minmax":
        partials = [_minmax(r) for r in partials]
    return aggregate(partials, final_k=config.final_k)


def _require_provider(provider: EmbeddingProvider | None) -> EmbeddingProvider:
    if provider is None:
        raise ValueError("semantic strategies need an embedding provider")
    return provider


def run_baseline(
    name: str,
    topic: Topic,
    indexes: SearchIndexes,
    provider: EmbeddingProvider | None = None,
    k: int = DEFAULT_FINAL_K,
    config: PipelineConfig = PipelineConfig(),
) -> ResultSet:
    """One of the four single-strategy reference runs."""
    if name == "narrative-bm25":
        tokens = preprocess(topic.narrative)
        return lexical_search(
            indexes.require_lexical(), config.bm25, tokens, k,
            topic_id=topic.topic_id, label=name,
        )
    if name == "query-bm25":
        tokens = preprocess(topic.title)
        return lexical_search(
            indexes.require_lexical(), config.bm25, tokens, k,
            topic_id=topic.topic_id, label=name,
        )
    if name == "query+narrative-semantic":
        text = topic.title + " " + topic.narrative
        query = topic_vector(_require_provider(provider), topic, text)
        return semantic_search(
            indexes.require_store(), query, k,
            forest=indexes.forest, search_budget=config.search_budget,
            topic_id=topic.topic_id, label=name,
        )
    if name == "query-semantic":
        query = topic_vector(_require_provider(provider), topic, topic.title)
        return semantic_search(
            indexes.require_store(), query, k,
            forest=indexes.forest, search_budget=config.search_budget,
            topic_id=topic.topic_id, label=name,
        )
    raise ValueError(f"unknown baseline {name!r} (expected one of {BASELINE_NAMES})")


def run_topics(
    topics: Iterable[Topic],
    indexes: SearchIndexes,
    provider: EmbeddingProvider | None,
    config: PipelineConfig = PipelineConfig(),
    threads: int = 1,
) -> dict[str, ResultSet]:
    """Run the full pipeline over many topics (optionally in a thread pool);
    output order always follows input order."""
    topics = list(topics)
    if threads > 1 and len(topics) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda t: run_pipeline(t, indexes, provider, config), topics
            ))
    else:
        results = [run_pipeline(t, indexes, provider, config) for t in topics]
    return {topic.topic_id: result for topic, result in zip(topics, results)}


# --- config files ------------------------------------------------------------

_CONFIG_FIELDS: Mapping[str, Callable[[str], object]] = {
    "per_query_k": int,
    "final_k": int,
    "k1": float,
    "b": float,
    "max_keywords": int,
    "normalize": str,
    "search_budget": int,
    "lenient": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "strategies": lambda v: tuple(s.strip().upper() for s in v.split(",") if s.strip()),
}

# Keys whose value is a path to a one-entry-per-line list file.
_CONFIG_FILE_FIELDS: Mapping[str, tuple[str, Callable[[str], object]]] = {
    "stopword_file": ("stopwords", lambda p: frozenset(w.lower() for w in load_word_list(p))),
    "negation_file": ("negation_patterns", lambda p: tuple(load_word_list(p))),
}


def load_config(path: str | Path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Read flat key=value lines ('#' comments allowed) over a base config."""
    overrides: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key in _CONFIG_FILE_FIELDS:
                field_name, loader = _CONFIG_FILE_FIELDS[key]
                overrides[field_name] = loader(value)
            elif key in _CONFIG_FIELDS:
                overrides[key] = _CONFIG_FIELDS[key](value)
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return replace(base, **overrides)
