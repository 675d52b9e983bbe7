"""Hybrid lexical + semantic retrieval engine for causality-driven news search."""

__version__ = "0.1.0"

from .corpus import (
    Document,
    Topic,
    TokenizedDocument,
    load_corpus,
    load_topics,
    preprocess,
    tokenize_document,
)
from .embedding import (
    EmbeddingProvider,
    FileBackedStore,
    HashingEmbedder,
    HttpEmbeddingClient,
    cosine_similarity,
    read_vectors,
    write_vectors,
)
from .evaluation import (
    Qrels,
    RunFile,
    average_precision,
    evaluate_run,
    mean_average_precision,
    precision_at_k,
    read_qrels,
    read_run,
    write_run,
)
from .keywords import STOPWORDS, filter_narrative, load_word_list, topicrank_keywords
from .lexical import (
    Bm25Params,
    LexicalIndex,
    bm25_score,
    build_lexical_index,
    idf,
    lexical_search,
    load_lexical_index,
    save_lexical_index,
)
from .pipeline import (
    BASELINE_NAMES,
    PipelineConfig,
    SearchIndexes,
    aggregate,
    run_baseline,
    run_pipeline,
    run_q1,
    run_q2,
    run_q3,
    run_topics,
)
from .results import ResultSet, ScoredHit
from .semantic import (
    AnnForest,
    ForestParams,
    VectorStore,
    ann_search,
    build_forest,
    build_vector_store,
    exact_search,
    load_semantic_index,
    save_semantic_index,
    semantic_search,
)
from .stemming import porter_stem

__all__ = [
    "__version__",
    "AnnForest",
    "BASELINE_NAMES",
    "Bm25Params",
    "Document",
    "EmbeddingProvider",
    "FileBackedStore",
    "ForestParams",
    "HashingEmbedder",
    "HttpEmbeddingClient",
    "LexicalIndex",
    "PipelineConfig",
    "Qrels",
    "ResultSet",
    "RunFile",
    "ScoredHit",
    "SearchIndexes",
    "Topic",
    "TokenizedDocument",
    "VectorStore",
    "aggregate",
    "ann_search",
    "average_precision",
    "bm25_score",
    "build_forest",
    "build_lexical_index",
    "build_vector_store",
    "cosine_similarity",
    "evaluate_run",
    "exact_search",
    "filter_narrative",
    "load_word_list",
    "STOPWORDS",
    "idf",
    "lexical_search",
    "load_corpus",
    "load_lexical_index",
    "load_semantic_index",
    "load_topics",
    "mean_average_precision",
    "porter_stem",
    "precision_at_k",
    "preprocess",
    "read_qrels",
    "read_run",
    "read_vectors",
    "run_baseline",
    "run_pipeline",
    "run_q1",
    "run_q2",
    "run_q3",
    "run_topics",
    "save_lexical_index",
    "save_semantic_index",
    "semantic_search",
    "tokenize_document",
    "topicrank_keywords",
    "write_run",
    "write_vectors",
]
