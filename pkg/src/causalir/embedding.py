"""Embedding providers, cosine similarity, and vector file formats.

Three providers share one interface:

* HashingEmbedder: deterministic bag-of-tokens feature hashing, the default
  for tests and desk-scale experiments where no model service is available.
* HttpEmbeddingClient: talks to an external service speaking the simple
  POST /embed protocol, with batching and bounded retries.
* FileBackedStore: serves precomputed vectors by id (documents, and
  optionally query vectors keyed by topic id).

Vector files come in a whitespace-delimited text layout (full float64
precision via repr, round-trips exactly) and a binary layout (float32
records behind a magic header, compact for large corpora).
"""

from __future__ import annotations

import hashlib
import logging
import struct
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import preprocess

log = logging.getLogger(__name__)

TEXT_MAGIC_PREFIX = "dim="
BINARY_MAGIC = b"EVB1"


class VectorFormatError(ValueError):
    pass


class UnknownIdError(KeyError):
    pass


class EmbeddingServiceError(RuntimeError):
    """An embedding HTTP request failed after exhausting retries."""


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1:
        raise ValueError("cosine_similarity expects 1-d vectors")
    if u.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    norm_u = float(np.linalg.norm(u))
    norm_v = float(np.linalg.norm(v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cosine similarity is undefined for all-zero vectors")
    return float(np.dot(u, v) / (norm_u * norm_v))


class EmbeddingProvider:
    """Interface: a fixed output dimension and text -> vector embedding."""

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts]) if texts else np.zeros((0, self.dimension))


class HashingEmbedder(EmbeddingProvider):
    """L2-normalized signed feature hashing over preprocessed tokens.

    Each token is hashed (keyed blake2b, so results are stable across runs
    and platforms for a given seed) to a coordinate in [0, dimension) and a
    sign in {-1, +1}; token vectors are summed and the result normalized.
    Text with no tokens maps to the first basis vector so the output is
    never the zero vector.
    """

    def __init__(self, dimension: int, seed: int = 0) -> None:
        if dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {dimension}")
        self._dimension = dimension
        self.seed = seed
        self._key = int(seed).to_bytes(8, "little", signed=True)

    @property
    def dimension(self) -> int:
        return self._dimension

    def _token_slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=9, key=self._key).digest()
        coord = int.from_bytes(digest[:8], "little") % self._dimension
        sign = 1.0 if digest[8] & 1 else -1.0
        return coord, sign

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dimension, dtype=np.float64)
        tokens = preprocess(text)
        if not tokens:
            vec[0] = 1.0
            return vec
        for token in tokens:
            coord, sign = self._token_slot(token)
            vec[coord] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # Opposite-signed collisions cancelled everything; fall back to
            # the same sentinel as empty text rather than emit a zero vector.
            vec[0] = 1.0
            return vec
        return vec / norm


class FileBackedStore(EmbeddingProvider):
    """Precomputed vectors served by id.

    ``embed(text)`` treats the text itself as the lookup key, which suits
    binary vector files whose ids may contain spaces; ``vector(some_id)`` is
    the explicit by-id path (document ids, or topic ids for query vectors).
    """

    def __init__(self, ids: Sequence[str], matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-d")
        if len(ids) != matrix.shape[0]:
            raise ValueError("ids and matrix row count disagree")
        self.ids = list(ids)
        self.matrix = matrix
        self._rows = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if len(self._rows) != len(self.ids):
            raise ValueError("duplicate ids in vector store")

    @classmethod
    def load(cls, path: str | Path) -> "FileBackedStore":
        ids, matrix = read_vectors(path)
        return cls(ids, matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, key: str) -> bool:
        return key in self._rows

    def vector(self, key: str) -> np.ndarray:
        try:
            return self.matrix[self._rows[key]]
        except KeyError:
            raise UnknownIdError(f"no precomputed vector for id {key!r}") from None

    def embed(self, text: str) -> np.ndarray:
        return self.vector(text)


class HttpEmbeddingClient(EmbeddingProvider):
    """Client for a REST embedding service.

    Protocol: POST <base>/embed with {"texts": [...]} returning
    {"vectors": [[...], ...]} in request order.  Failures are retried with
    exponential backoff up to max_retries; 4xx responses fail immediately
    since retrying a rejected request cannot help.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        batch_size: int = 32,
        max_retries: int = 3,
        backoff: float = 0.5,
        dimension: int | None = None,
        max_chars: int | None = None,
        max_in_flight: int = 1,
    ) -> None:
        import requests

        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        base = url.rstrip("/")
        self.endpoint = base if base.endswith("/embed") else base + "/embed"
        self.timeout = timeout
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_chars = max_chars
        self.max_in_flight = max_in_flight
        self._dimension = dimension
        self._session = requests.Session()

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            self.embed("")  # dimension discovery
        assert self._dimension is not None
        return self._dimension

    def _post_batch(self, texts: list[str]) -> np.ndarray:
        import requests

        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff * (2 ** (attempt - 1))
                log.warning(
                    "embedding request retry %d/%d after %.2fs: %s",
                    attempt, self.max_retries, delay, last_error,
                )
                time.sleep(delay)
            try:
                response = self._session.post(
                    self.endpoint, json={"texts": texts}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if 400 <= response.status_code < 500:
                raise EmbeddingServiceError(
                    f"embedding service rejected batch of {len(texts)} texts: "
                    f"HTTP {response.status_code} from {self.endpoint}"
                )
            if response.status_code != 200:
                last_error = EmbeddingServiceError(
                    f"HTTP {response.status_code} from {self.endpoint}"
                )
                continue
            try:
                vectors = response.json()["vectors"]
            except (ValueError, KeyError) as exc:
                raise EmbeddingServiceError(
                    f"malformed embedding response from {self.endpoint}: {exc}"
                ) from exc
            return self._validate(texts, vectors)
        raise EmbeddingServiceError(
            f"embedding request failed after {self.max_retries} retries "
            f"(batch of {len(texts)} texts to {self.endpoint}): {last_error}"
        )

    def _validate(self, texts: list[str], vectors: list) -> np.ndarray:
        if len(vectors) != len(texts):
            raise EmbeddingServiceError(
                f"service returned {len(vectors)} vectors for {len(texts)} texts"
            )
        try:
            matrix = np.asarray(vectors, dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingServiceError(f"service returned ragged vectors: {exc}") from exc
        if matrix.ndim != 2:
            raise EmbeddingServiceError("service returned ragged or non-2d vectors")
        if self._dimension is None:
            self._dimension = int(matrix.shape[1])
        elif matrix.shape[1] != self._dimension:
            raise EmbeddingServiceError(
                f"service returned dimension {matrix.shape[1]}, expected {self._dimension}"
            )
        return matrix

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        texts = [t[: self.max_chars] if self.max_chars else t for t in texts]
        if not texts:
            return np.zeros((0, self._dimension or 0), dtype=np.float64)
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if self.max_in_flight > 1 and len(batches) > 1:
            from concurrent.futures import ThreadPoolExecutor

            # First batch alone pins the dimension before concurrency starts.
            results = [self._post_batch(batches[0])]
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results.extend(pool.map(self._post_batch, batches[1:]))
        else:
            results = [self._post_batch(batch) for batch in batches]
        return np.concatenate(results, axis=0)


# --- vector files -----------------------------------------------------------


def _check_ids_for_text(ids: Sequence[str]) -> None:
    for doc_id in ids:
        if not doc_id or any(ch.isspace() for ch in doc_id):
            raise VectorFormatError(
                f"id {doc_id!r} cannot be stored in the text vector format "
                "(empty or contains whitespace); use the binary format"
            )


def write_vectors_text(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    """Text layout: header 'dim=<d> count=<n>', then '<id> <v1> ... <vd>' rows.

    Values are written with repr so float64 round-trips exactly.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix shape does not match ids")
    _check_ids_for_text(ids)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"dim={matrix.shape[1]} count={matrix.shape[0]}\n")
        for doc_id, row in zip(ids, matrix):
            handle.write(doc_id + " " + " ".join(repr(float(x)) for x in row) + "\n")


def read_vectors_text(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        parts = header.split()
        if (
            len(parts) != 2
            or not parts[0].startswith("dim=")
            or not parts[1].startswith("count=")
        ):
            raise VectorFormatError(f"{path}: bad header {header!r}")
        try:
            dim = int(parts[0][4:])
            count = int(parts[1][6:])
        except ValueError as exc:
            raise VectorFormatError(f"{path}: bad header {header!r}") from exc
        ids: list[str] = []
        matrix = np.empty((count, dim), dtype=np.float64)
        row = 0
        for line in handle:
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise VectorFormatError(
                    f"{path}: row {row} has {len(fields) - 1} values, expected {dim}"
                )
            if row >= count:
                raise VectorFormatError(f"{path}: more rows than declared count {count}")
            ids.append(fields[0])
            matrix[row] = [float(x) for x in fields[1:]]
            row += 1
        if row != count:
            raise VectorFormatError(f"{path}: found {row} rows, header declared {count}")
    return ids, matrix


def write_vectors_binary(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    """Binary layout: magic, dim as uint32 LE, then (id_len, id, float32 row) records."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix shape does not match ids")
    rows = matrix.astype(np.float32)
    with open(path, "wb") as handle:
        handle.write(BINARY_MAGIC)
        handle.write(struct.pack("<I", matrix.shape[1]))
        for doc_id, row in zip(ids, rows):
            encoded = doc_id.encode("utf-8")
            if not encoded:
                raise VectorFormatError("empty id cannot be stored")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(row.tobytes())


def read_vectors_binary(path: str | Path) -> tuple[list[str], np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != BINARY_MAGIC:
        raise VectorFormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 8:
        raise VectorFormatError(f"{path}: truncated header")
    (dim,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    ids: list[str] = []
    rows: list[np.ndarray] = []
    row_bytes = dim * 4
    while offset < len(raw):
        if offset + 4 > len(raw):
            raise VectorFormatError(f"{path}: truncated record at byte {offset}")
        (id_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if offset + id_len + row_bytes > len(raw):
            raise VectorFormatError(f"{path}: truncated record at byte {offset}")
        ids.append(raw[offset : offset + id_len].decode("utf-8"))
        offset += id_len
        rows.append(np.frombuffer(raw, dtype="<f4", count=dim, offset=offset).astype(np.float64))
        offset += row_bytes
    matrix = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float64)
    return ids, matrix


def write_vectors(path: str | Path, ids: Sequence[str], matrix: np.ndarray, fmt: str = "text") -> None:
    if fmt == "text":
        write_vectors_text(path, ids, matrix)
    elif fmt == "binary":
        write_vectors_binary(path, ids, matrix)
    else:
        raise ValueError(f"unknown vector format {fmt!r} (expected 'text' or 'binary')")


def read_vectors(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a vector file, sniffing text vs binary from the leading bytes."""
    with open(path, "rb") as handle:
        head = handle.read(4)
    if head == BINARY_MAGIC:
        return read_vectors_binary(path)
    return read_vectors_text(path)
