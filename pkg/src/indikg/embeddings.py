"""Embedding providers. The reference provider is deterministic feature hashing:
casefolded tokens hashed into D buckets (FNV-1a 64-bit), bucket counts
L2-normalized. No model weights, so tests and fixtures are reproducible offline.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Protocol

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    components: tuple[float, ...]
    norm: float

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def is_zero(self) -> bool:
        return self.norm == 0.0


def vector_from_components(components) -> EmbeddingVector:
    comps = tuple(float(c) for c in components)
    norm = math.sqrt(math.fsum(c * c for c in comps))
    return EmbeddingVector(comps, norm)


def unit_normalized(components) -> EmbeddingVector:
    v = vector_from_components(components)
    if v.norm == 0.0:
        return v
    return EmbeddingVector(tuple(c / v.norm for c in v.components), 1.0)


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> EmbeddingVector: ...


class HashingEmbedder:
    """Reference provider: token counts hashed into D buckets, L2-normalized.

    embed("") and other token-free inputs give the zero vector, which the
    index refuses to store.
    """

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        counts = [0.0] * self.dimension
        for token in _TOKEN_RE.findall(text.casefold()):
            counts[fnv1a_64(token.encode("utf-8")) % self.dimension] += 1.0
        return unit_normalized(counts)

    @property
    def identity(self) -> str:
        return f"hashing-fnv1a/{self.dimension}"


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """True cosine similarity; exact 1.0 for a vector against itself."""
    if a.is_zero or b.is_zero:
        return 0.0
    dot = math.fsum(x * y for x, y in zip(a.components, b.components))
    return dot / (a.norm * b.norm)
