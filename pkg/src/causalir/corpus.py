"""Document and topic types, text preprocessing, and corpus loaders.

Preprocessing is the one normalization path shared by indexing and querying:
lowercase, split into maximal alphanumeric runs, stem alphabetic ASCII tokens.
Stemming is applied to a fixpoint so that preprocessing its own output changes
nothing (the suffix stripper on its own is not idempotent: agreed -> agre -> agr).

Two corpus layouts are supported: JSONL records with ``id``/``text`` and an
optional ``title``, and TREC-style SGML files made of <DOC> blocks carrying
<DOCNO> and <TEXT> elements.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .stemming import porter_stem

log = logging.getLogger(__name__)

# Unicode-aware "word characters without underscore": maximal alphanumeric runs.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_MAX_STEM_PASSES = 10


class CorpusFormatError(ValueError):
    """A corpus or topics file violates its declared layout."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("document id must be non-empty")


@dataclass(frozen=True)
class TokenizedDocument:
    doc_id: str
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str
    narrative: str = ""

    def __post_init__(self) -> None:
        if not self.topic_id:
            raise ValueError("topic id must be non-empty")
        if not self.title:
            raise ValueError(f"topic {self.topic_id!r}: title must be non-empty")


def normalize_token(token: str) -> str:
    """Stem a single lowercase token to a fixpoint; identity off the ASCII-alpha path."""
    if not token.isascii() or not token.isalpha():
        return token
    for _ in range(_MAX_STEM_PASSES):
        stemmed = porter_stem(token)
        if stemmed == token:
            return token
        token = stemmed
    return token


def preprocess(text: str) -> list[str]:
    """Lowercase, split into alphanumeric runs, and stem-normalize.

    Tokens that stem to the empty string (the bare word "s") are dropped so
    that every output token is non-empty.
    """
    tokens = []
    for match in _TOKEN_RE.finditer(text.lower()):
        token = normalize_token(match.group())
        if token:
            tokens.append(token)
    return tokens


def tokenize_document(doc: Document, include_title: bool = True) -> TokenizedDocument:
    """Preprocess a document into index-ready tokens (headline first when present)."""
    parts = []
    if include_title and doc.title:
        parts.append(doc.title)
    parts.append(doc.text)
    return TokenizedDocument(doc_id=doc.doc_id, tokens=tuple(preprocess(" ".join(parts))))


# --- loaders ---------------------------------------------------------------


def load_jsonl_corpus(path: str | Path, strict: bool = True) -> Iterator[Document]:
    """Yield documents from a JSONL file of {"id": ..., "text": ..., "title"?: ...}.

    In strict mode a malformed record aborts with its record index; otherwise
    it is skipped with a warning.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise CorpusFormatError("record is not a JSON object")
                if "id" not in record or not str(record["id"]):
                    raise CorpusFormatError("record missing id field")
                if "text" not in record:
                    raise CorpusFormatError("record missing text field")
                title = record.get("title")
                yield Document(
                    doc_id=str(record["id"]),
                    text=str(record["text"]),
                    title=str(title) if title is not None else None,
                )
            except (json.JSONDecodeError, CorpusFormatError, ValueError) as exc:
                message = f"record {index}: {exc}"
                if strict:
                    raise CorpusFormatError(message) from exc
                log.warning("skipping malformed corpus %s", message)


_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.DOTALL | re.IGNORECASE)
_DOCNO_RE = re.compile(r"<DOCNO>(.*?)</DOCNO>", re.DOTALL | re.IGNORECASE)
_TEXT_RE = re.compile(r"<TEXT>(.*?)</TEXT>", re.DOTALL | re.IGNORECASE)
_TITLE_RE = re.compile(r"<(?:TITLE|HEAD)>(.*?)</(?:TITLE|HEAD)>", re.DOTALL | re.IGNORECASE)
_TAG_RE = re.compile(r"<[^>]+>")


def load_trec_corpus(path: str | Path, strict: bool = True) -> Iterator[Document]:
    """Yield documents from a TREC SGML file of <DOC> blocks.

    The body is the concatenation of <TEXT> elements with any residual markup
    stripped; a <TITLE> or <HEAD> element becomes the headline when present.
    """
    raw = Path(path).read_text(encoding="utf-8")
    for index, block_match in enumerate(_DOC_RE.finditer(raw)):
        block = block_match.group(1)
        docno = _DOCNO_RE.search(block)
        if docno is None or not docno.group(1).strip():
            message = f"record {index}: <DOC> block missing <DOCNO>"
            if strict:
                raise CorpusFormatError(message)
            log.warning("skipping malformed corpus %s", message)
            continue
        texts = [_TAG_RE.sub(" ", m.group(1)) for m in _TEXT_RE.finditer(block)]
        title_match = _TITLE_RE.search(block)
        title = _TAG_RE.sub(" ", title_match.group(1)).strip() if title_match else None
        yield Document(
            doc_id=docno.group(1).strip(),
            text="\n".join(t.strip() for t in texts),
            title=title or None,
        )


def load_corpus(path: str | Path, fmt: str = "jsonl", strict: bool = True) -> Iterator[Document]:
    if fmt == "jsonl":
        return load_jsonl_corpus(path, strict=strict)
    if fmt == "trec":
        return load_trec_corpus(path, strict=strict)
    raise ValueError(f"unknown corpus format {fmt!r} (expected 'jsonl' or 'trec')")


def load_topics(path: str | Path) -> list[Topic]:
    """Load JSONL topics of {"id": ..., "title": ..., "narrative"?: ...}.

    A malformed topic always aborts: silently dropping a topic would skew
    evaluation means.
    """
    topics = []
    with open(path, "r", encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"topic {index}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "id" not in record or not str(record.get("id", "")):
                raise CorpusFormatError(f"topic {index}: missing id field")
            if not str(record.get("title", "")):
                raise CorpusFormatError(f"topic {index}: missing title field")
            topics.append(
                Topic(
                    topic_id=str(record["id"]),
                    title=str(record["title"]),
                    narrative=str(record.get("narrative", "")),
                )
            )
    return topics


def tokenize_corpus(docs: Iterable[Document], include_title: bool = True) -> Iterator[TokenizedDocument]:
    for doc in docs:
        yield tokenize_document(doc, include_title=include_title)
