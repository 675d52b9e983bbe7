"""Command line interface.

Subcommands cover the whole workflow: index-lexical and embed/index-semantic
build the two indexes from a corpus, run-topics and run-baseline produce
TREC-format run files, evaluate scores a run against qrels, and search is an
ad-hoc single-query probe of either index.  Diagnostics go to stderr; data
goes to stdout or to the requested output files.  Every command is
deterministic: rerunning with the same inputs and seeds writes byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus, load_topics, preprocess, tokenize_corpus
from .embedding import (
    EmbeddingProvider,
    FileBackedStore,
    HashingEmbedder,
    HttpEmbeddingClient,
    read_vectors,
    write_vectors,
)
from .evaluation import RunFile, evaluate_run, read_qrels, read_run, write_run
from .keywords import load_word_list
from .lexical import Bm25Params, build_lexical_index, lexical_search, load_lexical_index, save_lexical_index
from .pipeline import (
    BASELINE_NAMES,
    PipelineConfig,
    SearchIndexes,
    load_config,
    run_baseline,
    run_topics,
)
from .semantic import (
    DEFAULT_LEAF_CAPACITY,
    ForestParams,
    build_forest,
    build_vector_store,
    load_semantic_index,
    save_semantic_index,
    semantic_search,
)

log = logging.getLogger(__name__)


class CommandError(RuntimeError):
    """Fatal CLI error; its message is the stderr diagnostic."""


def make_provider(spec: str) -> EmbeddingProvider:
    """Parse a provider spec: hash:<dim>:<seed>, file:<path>, or http:<url>."""
    kind, _, rest = spec.partition(":")
    if kind == "hash":
        dim_text, _, seed_text = rest.partition(":")
        try:
            return HashingEmbedder(dimension=int(dim_text), seed=int(seed_text or "0"))
        except ValueError as exc:
            raise CommandError(f"bad hash provider spec {spec!r}: {exc}") from exc
    if kind == "file":
        if not rest:
            raise CommandError(f"bad file provider spec {spec!r}: missing path")
        try:
            return FileBackedStore.load(rest)
        except (OSError, ValueError) as exc:
            raise CommandError(f"cannot load vector file {rest!r}: {exc}") from exc
    if kind == "http":
        if not rest:
            raise CommandError(f"bad http provider spec {spec!r}: missing url")
        # "http://host/embed" names the url directly; "http:<url>" wraps one.
        return HttpEmbeddingClient(url=spec if rest.startswith("//") else rest)
    raise CommandError(
        f"unknown provider spec {spec!r} (expected hash:<dim>:<seed>, file:<path>, or http:<url>)"
    )


def _default_threads() -> int:
    return os.cpu_count() or 1


def _load_indexes(args: argparse.Namespace, need_lexical: bool, need_semantic: bool) -> SearchIndexes:
    indexes = SearchIndexes()
    lexical_path = getattr(args, "lexical", None)
    semantic_path = getattr(args, "semantic", None)
    if need_lexical:
        if not lexical_path:
            raise CommandError("this command needs --lexical <index file>")
        indexes.lexical = load_lexical_index(lexical_path)
    if need_semantic:
        if not semantic_path:
            raise CommandError("this command needs --semantic <index file>")
        indexes.store, indexes.forest = load_semantic_index(semantic_path)
    return indexes


def _build_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        config = load_config(args.config, base=config)
    overrides = {}
    for key in ("per_query_k", "final_k", "k1", "b", "max_keywords",
                "normalize", "search_budget"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "strategies", None):
        overrides["strategies"] = tuple(
            s.strip().upper() for s in args.strategies.split(",") if s.strip()
        )
    if getattr(args, "lenient", False):
        overrides["lenient"] = True
    if getattr(args, "stopword_file", None):
        overrides["stopwords"] = frozenset(
            w.lower() for w in load_word_list(args.stopword_file)
        )
    if getattr(args, "negation_file", None):
        overrides["negation_patterns"] = load_word_list(args.negation_file)
    if overrides:
        from dataclasses import replace

        try:
            config = replace(config, **overrides)
        except ValueError as exc:
            raise CommandError(str(exc)) from exc
    return config


# --- commands ----------------------------------------------------------------


def cmd_index_lexical(args: argparse.Namespace) -> int:
    docs = load_corpus(args.corpus, fmt=args.format, strict=not args.skip_malformed)
    index = build_lexical_index(tokenize_corpus(docs))
    save_lexical_index(index, args.out)
    print(f"indexed {index.num_docs} documents, {index.vocabulary_size()} distinct tokens")
    log.info("lexical index written to %s", args.out)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    provider = make_provider(args.provider)
    docs = list(load_corpus(args.corpus, fmt=args.format, strict=not args.skip_malformed))
    ids = [doc.doc_id for doc in docs]
    texts = [(doc.title + " " + doc.text) if doc.title else doc.text for doc in docs]
    if not ids:
        raise CommandError(f"corpus {args.corpus} contains no documents")
    matrix = provider.embed_many(texts)
    write_vectors(args.out, ids, matrix, fmt=args.vector_format)
    print(f"embedded {len(ids)} documents at dimension {matrix.shape[1]}")
    return 0


def cmd_index_semantic(args: argparse.Namespace) -> int:
    try:
        ids, matrix = read_vectors(args.vectors)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read vectors {args.vectors!r}: {exc}") from exc
    store = build_vector_store(ids, matrix)
    forest = None
    if args.trees > 0:
        params = ForestParams(
            num_trees=args.trees, leaf_capacity=args.leaf_capacity, rng_seed=args.seed
        )
        forest = build_forest(store, params, threads=args.threads)
    save_semantic_index(args.out, store, forest)
    suffix = f" and a {args.trees}-tree search forest" if forest else " (exact search only)"
    print(f"indexed {store.size} vectors at dimension {store.dimension}{suffix}")
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    if bool(args.lexical) == bool(args.semantic):
        raise CommandError("search needs exactly one of --lexical or --semantic")
    if args.lexical:
        index = load_lexical_index(args.lexical)
        tokens = preprocess(args.query)
        result = lexical_search(index, Bm25Params(), tokens, args.k)
    else:
        store, forest = load_semantic_index(args.semantic)
        if not args.provider:
            raise CommandError("semantic search needs --provider")
        provider = make_provider(args.provider)
        query = provider.embed(args.query)
        result = semantic_search(store, query, args.k, forest=forest)
    for rank, hit in enumerate(result.hits, start=1):
        print(f"{rank}\t{hit.doc_id}\t{hit.score!r}")
    log.info("%d hits for query %r", len(result), args.query)
    return 0


def cmd_run_topics(args: argparse.Namespace) -> int:
    topics = load_topics(args.topics)
    config = _build_pipeline_config(args)
    needs_semantic = "Q1" in config.strategies
    needs_lexical = bool({"Q2", "Q3"} & set(config.strategies))
    indexes = _load_indexes(args, needs_lexical, needs_semantic)
    provider = make_provider(args.provider) if args.provider else None
    if needs_semantic and provider is None:
        raise CommandError("strategy Q1 needs --provider")
    results = run_topics(topics, indexes, provider, config, threads=args.threads)
    for topic in topics:
        hits = results[topic.topic_id].hits
        by_source: dict[str, int] = {}
        for hit in hits:
            for source in hit.sources:
                by_source[source] = by_source.get(source, 0) + 1
        summary = " ".join(f"{name}={by_source.get(name, 0)}" for name in config.strategies)
        log.info("topic %s: %d fused hits (%s)", topic.topic_id, len(hits), summary)
    run = RunFile.from_result_sets((results[t.topic_id] for t in topics), tag=args.tag)
    write_run(args.out, run)
    print(f"wrote {sum(len(v) for v in run.topics.values())} result lines "
          f"for {len(topics)} topics to {args.out}")
    return 0


def cmd_run_baseline(args: argparse.Namespace) -> int:
    topics = load_topics(args.topics)
    config = _build_pipeline_config(args)
    needs_semantic = args.name in ("query+narrative-semantic", "query-semantic")
    indexes = _load_indexes(args, not needs_semantic, needs_semantic)
    provider = make_provider(args.provider) if args.provider else None
    if needs_semantic and provider is None:
        raise CommandError(f"baseline {args.name} needs --provider")
    results = []
    for topic in topics:
        result = run_baseline(args.name, topic, indexes, provider, k=args.k, config=config)
        log.info("topic %s: baseline %s returned %d hits", topic.topic_id, args.name, len(result))
        results.append(result)
    run = RunFile.from_result_sets(results, tag=args.tag or args.name)
    write_run(args.out, run)
    print(f"wrote baseline {args.name} run for {len(topics)} topics to {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    qrels = read_qrels(args.qrels)
    run = read_run(args.run)
    report = evaluate_run(run, qrels, k=args.k)
    if args.per_topic:
        for m in report.per_topic:
            print(f"topic {m.topic_id}: AP {m.ap:.4f} P@{report.k} {m.p_at_k:.4f} "
                  f"({m.num_retrieved} retrieved, {m.num_relevant} relevant)")
    print(f"MAP {report.mean_ap:.4f}")
    print(f"P@{report.k} {report.mean_p_at_k:.4f}")
    if args.report:
        from .report import write_evaluation_report

        written = write_evaluation_report(args.report, report)
        for path in written:
            log.info("report file: %s", path)
    return 0


def cmd_version(_args: argparse.Namespace) -> int:
    from .lexical import SNAPSHOT_VERSION as lexical_snapshot
    from .semantic import SNAPSHOT_VERSION as semantic_snapshot

    print(f"causalir {__version__}")
    print(f"lexical snapshot format {lexical_snapshot}")
    print(f"semantic snapshot format {semantic_snapshot}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalir",
        description="hybrid lexical + semantic retrieval for causality-driven news search",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index-lexical", help="build the BM25 inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("jsonl", "trec"), default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--skip-malformed", action="store_true",
                   help="warn and skip malformed records instead of aborting")
    p.set_defaults(func=cmd_index_lexical)

    p = sub.add_parser("embed", help="embed a corpus into a vector file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("jsonl", "trec"), default="jsonl")
    p.add_argument("--provider", required=True,
                   help="hash:<dim>:<seed>, file:<path>, or http:<url>")
    p.add_argument("--out", required=True)
    p.add_argument("--vector-format", choices=("text", "binary"), default="text")
    p.add_argument("--skip-malformed", action="store_true")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index-semantic", help="build the cosine index (optional ANN forest)")
    p.add_argument("--vectors", required=True, help="vector file from the embed command")
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=0,
                   help="number of random-projection trees (0 = exact search only)")
    p.add_argument("--leaf-capacity", type=int, default=DEFAULT_LEAF_CAPACITY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_index_semantic)

    p = sub.add_parser("search", help="ad-hoc single query against one index")
    p.add_argument("--query", required=True)
    p.add_argument("--lexical", help="lexical index file")
    p.add_argument("--semantic", help="semantic index file")
    p.add_argument("--provider", help="embedding provider for --semantic")
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("run-topics", help="run the fused pipeline over a topics file")
    p.add_argument("--topics", required=True)
    p.add_argument("--lexical")
    p.add_argument("--semantic")
    p.add_argument("--provider")
    p.add_argument("--config", help="flat key=value config file (flags win)")
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="causalir")
    p.add_argument("--per-query-k", type=int, dest="per_query_k")
    p.add_argument("--final-k", type=int, dest="final_k")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--max-keywords", type=int, dest="max_keywords")
    p.add_argument("--normalize", choices=("none", "minmax"))
    p.add_argument("--search-budget", type=int, dest="search_budget")
    p.add_argument("--strategies", help="comma list, e.g. Q1,Q2,Q3")
    p.add_argument("--stopword-file", dest="stopword_file",
                   help="custom stopword list, one word per line")
    p.add_argument("--negation-file", dest="negation_file",
                   help="custom negation patterns, one regex per line")
    p.add_argument("--lenient", action="store_true",
                   help="log strategy failures instead of aborting the topic")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_run_topics)

    p = sub.add_parser("run-baseline", help="run one single-strategy baseline")
    p.add_argument("--name", required=True, choices=BASELINE_NAMES)
    p.add_argument("--topics", required=True)
    p.add_argument("--lexical")
    p.add_argument("--semantic")
    p.add_argument("--provider")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="")
    p.add_argument("--k", type=int, default=500)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--search-budget", type=int, dest="search_budget")
    p.set_defaults(func=cmd_run_baseline)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=5, help="cutoff for P@k")
    p.add_argument("--per-topic", action="store_true", dest="per_topic")
    p.add_argument("--report", help="directory for metrics.tsv and figures")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
