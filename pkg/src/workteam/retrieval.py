"""Component filtering: embed instruction and descriptions, rank by cosine similarity.

Two embedders are provided. HashEmbedder is a deterministic token-hash
bag-of-words vector, good enough for fixtures and oracle tests. HttpEmbedder
talks to an external embedding endpoint for real deployments; a trained
sentence encoder plugs in behind the same contract.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from .registry import ComponentSpec, Registry, list_components

EmbeddingVector = tuple[float, ...]

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class RetrievalError(ValueError):
    pass


class Embedder(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...

    def dimension(self) -> int: ...


class HashEmbedder:
    """Bag-of-words vector over sha1 token buckets. Deterministic across runs."""

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise RetrievalError("embedding dimension must be >= 1")
        self._dim = dimension

    def embed(self, text: str) -> EmbeddingVector:
        counts = [0.0] * self._dim
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.sha1(token.encode("utf-8")).digest()
            counts[int.from_bytes(digest[:4], "big") % self._dim] += 1.0
        return tuple(counts)

    def dimension(self) -> int:
        return self._dim


class HttpEmbedder:
    """Client for ``POST {endpoint}/embed`` with ``{"texts": [...]}`` bodies."""

    def __init__(self, endpoint: str, token: str | None = None, timeout: float = 30.0):
        self._endpoint = endpoint.rstrip("/")
        self._token = token
        self._timeout = timeout
        self._dim: int | None = None

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        headers = {"Authorization": f"Bearer {self._token}"} if self._token else {}
        try:
            resp = requests.post(
                f"{self._endpoint}/embed",
                json={"texts": list(texts)},
                headers=headers,
                timeout=self._timeout,
            )
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise RetrievalError(f"embedding request failed: {exc}") from exc
        out = [tuple(float(x) for x in vec) for vec in vectors]
        if len(out) != len(texts):
            raise RetrievalError("embedding endpoint returned a mismatched batch")
        if out and self._dim is None:
            self._dim = len(out[0])
        return out

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def dimension(self) -> int:
        if self._dim is None:
            self.embed("dimension probe")
        assert self._dim is not None
        return self._dim


@dataclass(frozen=True)
class ScoredComponent:
    component: ComponentSpec
    score: float


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """dot(a,b) / (|a|·|b|), clamped to [-1, 1]. Zero-norm inputs are an error."""
    if len(a) != len(b):
        raise RetrievalError(f"dimension mismatch: {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise RetrievalError("cosine similarity is undefined for zero-norm vectors")
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


def _rank(
    inst_vec: EmbeddingVector,
    scored: Sequence[tuple[ComponentSpec, EmbeddingVector]],
    k: int,
) -> list[ScoredComponent]:
    pairs = [
        ScoredComponent(comp, cosine_similarity(inst_vec, vec)) for comp, vec in scored
    ]
    pairs.sort(key=lambda sc: (-sc.score, sc.component.name))
    return pairs[: min(k, len(pairs))]


def filter_components(
    instruction: str, registry: Registry, k: int, embedder: Embedder
) -> list[ScoredComponent]:
    """Top-k components by descending similarity; ties break by ascending name."""
    if k < 1:
        raise RetrievalError("k must be >= 1")
    if not registry.components:
        raise RetrievalError("cannot filter an empty registry")
    inst_vec = embedder.embed(instruction)
    pairs = [(c, embedder.embed(c.description)) for c in list_components(registry)]
    return _rank(inst_vec, pairs, k)


class ComponentFilter:
    """filter_components with description embeddings computed once and cached."""

    def __init__(self, registry: Registry, embedder: Embedder):
        if not registry.components:
            raise RetrievalError("cannot filter an empty registry")
        self.registry = registry
        self.embedder = embedder
        self._cached = [
            (c, embedder.embed(c.description)) for c in list_components(registry)
        ]

    def filter(self, instruction: str, k: int) -> list[ScoredComponent]:
        if k < 1:
            raise RetrievalError("k must be >= 1")
        return _rank(self.embedder.embed(instruction), self._cached, k)
