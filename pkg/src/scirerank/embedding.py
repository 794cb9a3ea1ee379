"""Text embeddings, cosine similarity, and query-time adaptive selection of
the most query-relevant feature elements."""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, Sequence

import numpy as np

if TYPE_CHECKING:
    from .extraction import FeatureSet


class EmbeddingError(ValueError):
    pass


class Embedder(Protocol):
    embedder_id: str

    def embed(self, text: str) -> np.ndarray: ...


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise EmbeddingError("cosine undefined for zero vector")
    return float(np.dot(a, b) / (norm_a * norm_b))


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashEmbedder:
    """Deterministic mock embedder: each word token is hashed into a bucket
    of a fixed-dim vector. Cosine then reflects token overlap, which is all
    the selection and dense-retrieval tests need, with no model download."""

    def __init__(self, dim: int = 64, seed: int = 0) -> None:
        if dim <= 0:
            raise EmbeddingError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.embedder_id = f"hash-{dim}-{seed}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(
            f"{self.seed}:{token}".encode("utf-8"), digest_size=8
        ).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            tokens = [text]
        for token in tokens:
            vec[self._bucket(token)] += 1.0
        return vec


class HttpEmbedder:
    """Client for an OpenAI-style embeddings HTTP API."""

    def __init__(self, endpoint: str, model_name: str, client=None) -> None:
        import httpx

        self.endpoint = endpoint
        self.model_name = model_name
        self.embedder_id = f"http-{model_name}"
        self._client = client or httpx.Client(timeout=60.0)

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        try:
            resp = self._client.post(
                self.endpoint, json={"model": self.model_name, "input": text}
            )
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except Exception as exc:
            raise EmbeddingError(f"embedding backend failed: {exc}") from exc
        return np.asarray(values, dtype=np.float64)


class CachingEmbedder:
    """Memoizes an embedder by (embedder_id, content digest), optionally
    persisting to a line-delimited sidecar file."""

    def __init__(self, inner: Embedder, path: str | Path | None = None) -> None:
        self.inner = inner
        self.embedder_id = inner.embedder_id
        self.path = Path(path) if path else None
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    record = json.loads(line)
                    if record["embedder_id"] == self.embedder_id:
                        self._cache[record["digest"]] = np.asarray(
                            record["values"], dtype=np.float64
                        )

    def _digest(self, text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed(self, text: str) -> np.ndarray:
        digest = self._digest(text)
        hit = self._cache.get(digest)
        if hit is not None:
            return hit
        vec = self.inner.embed(text)
        with self._lock:
            self._cache[digest] = vec
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({
                        "embedder_id": self.embedder_id,
                        "digest": digest,
                        "values": vec.tolist(),
                    }) + "\n")
        return vec


@dataclass(frozen=True)
class SelectedFeatures:
    """Query-adapted subset of a FeatureSet: top-k keywords plus the single
    most query-similar section and pseudo query."""

    keywords: tuple[str, ...]
    similarity_scores: tuple[float, ...]
    section: str
    pseudo_query: str


def _rank_by_similarity(
    query_vec: np.ndarray, elements: Sequence[str], embedder: Embedder
) -> list[tuple[int, float]]:
    """(original index, score) pairs sorted by score desc, ties by position."""
    scored = [
        (i, cosine(query_vec, embedder.embed(element)))
        for i, element in enumerate(elements)
    ]
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


def adaptive_select(
    query: str,
    feature_set: "FeatureSet",
    embedder: Embedder,
    k_keywords: int = 5,
) -> SelectedFeatures:
    """Select the feature elements most similar to the query.

    Keywords come back ordered by similarity descending; ties resolve to the
    earlier extraction position. Lists shorter than the quota contribute all
    their elements in similarity order.
    """
    if k_keywords < 0:
        raise ValueError("k_keywords must be >= 0")
    query_vec = embedder.embed(query)

    kw_ranked = _rank_by_similarity(query_vec, feature_set.keywords, embedder)
    top = kw_ranked[:k_keywords]
    keywords = tuple(feature_set.keywords[i] for i, _ in top)
    scores = tuple(score for _, score in top)

    best_section, _ = _rank_by_similarity(query_vec, feature_set.sections, embedder)[0]
    best_query, _ = _rank_by_similarity(
        query_vec, feature_set.pseudo_queries, embedder
    )[0]

    return SelectedFeatures(
        keywords=keywords,
        similarity_scores=scores,
        section=feature_set.sections[best_section],
        pseudo_query=feature_set.pseudo_queries[best_query],
    )
