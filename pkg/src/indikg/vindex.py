"""Exact top-k cosine index over chunk vectors, with a brute-force oracle.

search() is the production path (numpy-vectorized exhaustive scan);
brute_force_search() is an independent pure-Python scan with the same
contract. The two must agree on every input; the oracle guards any future
accelerated structure.
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingVector
from .errors import (
    DimensionError,
    DuplicateError,
    EmptyIndexError,
    ZeroVectorError,
)

MAGIC = b"IKGX1"
_NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class IndexedChunk:
    chunk_id: str
    doc_id: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float


def _doc_id_from_chunk_id(chunk_id: str) -> str:
    head, sep, _ = chunk_id.rpartition(":")
    return head if sep else ""


class VectorIndex:
    """In-memory index; single writer, concurrent readers.

    Entries are append-only; a search that starts after add_chunk returns
    observes the new entry (reads snapshot the entry list under the GIL).
    """

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._entries: list[IndexedChunk] = []
        self._ids: set[str] = set()
        self._write_lock = threading.Lock()
        self._matrix: np.ndarray | None = None
        self._matrix_size = 0

    def __len__(self) -> int:
        return len(self._entries)

    def size(self) -> int:
        return len(self._entries)

    def chunk_ids(self) -> list[str]:
        return [e.chunk_id for e in self._entries]

    def add_chunk(self, chunk, vector: EmbeddingVector, doc_id: str | None = None) -> None:
        """Index a chunk (Chunk object or bare chunk id). Searchable on return."""
        chunk_id = getattr(chunk, "chunk_id", chunk)
        if doc_id is None:
            doc_id = getattr(chunk, "doc_id", None)
        if vector.dimension != self.dimension:
            raise DimensionError(
                f"vector has dimension {vector.dimension}, index expects {self.dimension}"
            )
        if vector.is_zero:
            raise ZeroVectorError(f"chunk {chunk_id!r}: zero vectors cannot be indexed")
        if not math.isfinite(vector.norm) or abs(vector.norm - 1.0) > _NORM_TOLERANCE:
            raise ZeroVectorError(
                f"chunk {chunk_id!r}: vectors must be unit-normalized (norm={vector.norm!r})"
            )
        with self._write_lock:
            if chunk_id in self._ids:
                raise DuplicateError(f"chunk {chunk_id!r} already indexed")
            self._ids.add(chunk_id)
            self._entries.append(
                IndexedChunk(chunk_id, doc_id if doc_id is not None else _doc_id_from_chunk_id(chunk_id), vector)
            )

    def _scores_matrix(self, n: int) -> np.ndarray:
        # cache rebuilt only under the write lock; rows are pre-divided by norm
        with self._write_lock:
            if self._matrix is None or self._matrix_size != n:
                rows = np.array([e.vector.components for e in self._entries[:n]], dtype=np.float64)
                norms = np.array([e.vector.norm for e in self._entries[:n]], dtype=np.float64)
                self._matrix = rows / norms[:, None]
                self._matrix_size = n
            return self._matrix

    def search(self, query: EmbeddingVector, k: int) -> list[SearchHit]:
        """Exactly min(k, size) hits, score-descending, ties by chunk_id ascending."""
        entries = self._entries
        n = len(entries)
        if n == 0:
            raise EmptyIndexError("search on empty index")
        if k < 1:
            raise ValueError("k must be >= 1")
        if query.dimension != self.dimension:
            raise DimensionError(f"query has dimension {query.dimension}, index expects {self.dimension}")
        if query.is_zero:
            return [SearchHit(e.chunk_id, 0.0) for e in sorted(entries, key=lambda e: e.chunk_id)[:k]]
        matrix = self._scores_matrix(n)
        q = np.asarray(query.components, dtype=np.float64) / query.norm
        scores = matrix @ q
        order = sorted(range(n), key=lambda i: (-scores[i], entries[i].chunk_id))
        return [SearchHit(entries[i].chunk_id, float(scores[i])) for i in order[:k]]

    def brute_force_search(self, query: EmbeddingVector, k: int) -> list[SearchHit]:
        """Oracle: same contract as search(), via a pure-Python exhaustive scan."""
        entries = self._entries
        if not entries:
            raise EmptyIndexError("search on empty index")
        if k < 1:
            raise ValueError("k must be >= 1")
        if query.dimension != self.dimension:
            raise DimensionError(f"query has dimension {query.dimension}, index expects {self.dimension}")
        hits = []
        for e in entries:
            if query.is_zero:
                score = 0.0
            else:
                dot = 0.0
                for x, y in zip(query.components, e.vector.components):
                    dot += x * y
                score = dot / (query.norm * e.vector.norm)
            hits.append(SearchHit(e.chunk_id, score))
        hits.sort(key=lambda h: (-h.score, h.chunk_id))
        return hits[:k]

    # --- persistence: IKGX1 header, then per-record length-prefixed chunk_id
    # (uint16 LE) and D little-endian float32 components -------------------

    def save(self, path: str | Path) -> None:
        with self._write_lock:
            entries = list(self._entries)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", self.dimension, len(entries)))
            for e in entries:
                cid = e.chunk_id.encode("utf-8")
                fh.write(struct.pack("<H", len(cid)))
                fh.write(cid)
                fh.write(np.asarray(e.vector.components, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        if data[: len(MAGIC)] != MAGIC:
            raise ValueError(f"{path}: not an index file (bad magic)")
        offset = len(MAGIC)
        dimension, count = struct.unpack_from("<II", data, offset)
        offset += 8
        index = cls(dimension)
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            chunk_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            comps = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset).astype(np.float64)
            offset += 4 * dimension
            norm = float(np.sqrt(np.dot(comps, comps)))
            vector = EmbeddingVector(tuple(float(c) for c in comps), norm)
            with index._write_lock:
                index._ids.add(chunk_id)
                index._entries.append(
                    IndexedChunk(chunk_id, _doc_id_from_chunk_id(chunk_id), vector)
                )
        if offset != len(data):
            raise ValueError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
        return index
