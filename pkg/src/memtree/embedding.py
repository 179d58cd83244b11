"""Embedding providers and similarity math.

``MockEmbedder`` is a deterministic, dependency-free stand-in for a neural
encoder: signed hashing of character trigrams, L2-normalised, so cosine
similarity tracks lexical overlap. ``RemoteEmbedder`` talks to any
OpenAI-compatible ``/v1/embeddings`` endpoint.
"""

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ._http import JsonPoster
from .errors import InvalidArgument, ProtocolError

MIN_MOCK_DIMENSION = 8


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgument(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        raise InvalidArgument("cosine similarity of a zero vector is undefined")
    sim = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, sim))


@lru_cache(maxsize=1 << 16)
def _gram_hash(gram):
    return int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "little")


def _grams(text):
    if len(text) < 3:
        return list(text)
    return [text[i:i + 3] for i in range(len(text) - 2)]


def mock_embed(text: str, dimension: int) -> np.ndarray:
    """Signed-hash character trigrams of the lowercased text, then L2-normalise.

    Texts shorter than three characters fall back to unigrams.
    """
    if dimension < MIN_MOCK_DIMENSION:
        raise InvalidArgument(f"mock embeddings need dimension >= {MIN_MOCK_DIMENSION}")
    if not isinstance(text, str) or not text:
        raise InvalidArgument("cannot embed empty text")
    counts = {}
    for g in _grams(text.lower()):
        counts[g] = counts.get(g, 0) + 1
    vec = np.zeros(dimension, dtype=np.float64)
    for g, c in counts.items():
        h = _gram_hash(g)
        vec[h % dimension] += c if (h >> 63) & 1 else -c
    norm = np.sqrt(np.dot(vec, vec))
    if norm == 0.0:
        # every gram cancelled out; fall back to one bucket keyed by the whole text
        h = _gram_hash(text.lower())
        vec[h % dimension] = 1.0
        return vec
    return vec / norm


@dataclass
class EmbeddingProviderConfig:
    kind: str = "deterministic-mock"   # or "remote"
    dimension: int = 64
    endpoint_url: Optional[str] = None
    model_name: Optional[str] = None
    api_key_env: Optional[str] = None
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 8


class MockEmbedder:
    def __init__(self, dimension=64):
        if dimension < MIN_MOCK_DIMENSION:
            raise InvalidArgument(f"mock embeddings need dimension >= {MIN_MOCK_DIMENSION}")
        self.dimension = dimension

    def embed(self, text):
        return mock_embed(text, self.dimension)


class RemoteEmbedder:
    """Client for an OpenAI-compatible embeddings endpoint.

    Vectors are returned exactly as the server sent them. An optional
    in-memory memo keyed by the exact text avoids repeat requests.
    """

    def __init__(self, config: EmbeddingProviderConfig, client=None, memo=False, backoff=0.5):
        if not config.endpoint_url or not config.model_name:
            raise InvalidArgument("remote embedder needs endpoint_url and model_name")
        self.dimension = config.dimension
        self.model = config.model_name
        self._poster = JsonPoster(
            config.endpoint_url, config.api_key_env, config.timeout,
            config.max_retries, backoff, config.max_in_flight, client,
        )
        self._memo = {} if memo else None

    def embed(self, text):
        if not isinstance(text, str) or not text:
            raise InvalidArgument("cannot embed empty text")
        if self._memo is not None and text in self._memo:
            return self._memo[text].copy()
        data = self._poster.post({"model": self.model, "input": text})
        try:
            values = data["data"][0]["embedding"]
            vec = np.asarray(values, dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError("embeddings response lacks data[0].embedding") from exc
        if vec.shape != (self.dimension,):
            raise ProtocolError(f"embedding has shape {vec.shape}, expected ({self.dimension},)")
        if not np.all(np.isfinite(vec)):
            raise ProtocolError("embedding contains non-finite values")
        if self._memo is not None:
            self._memo[text] = vec.copy()
        return vec


class LookupEmbedder:
    """Returns preset vectors for known texts; used to realise a given similarity matrix."""

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape[0] for v in self.table.values()}
        if len(dims) != 1:
            raise InvalidArgument("lookup vectors must share one dimension")
        self.dimension = dims.pop()

    def embed(self, text):
        try:
            return self.table[text].copy()
        except KeyError:
            raise InvalidArgument(f"no preset vector for {text!r}") from None


def make_embedder(config: EmbeddingProviderConfig, client=None):
    if config.kind == "deterministic-mock":
        return MockEmbedder(config.dimension)
    if config.kind == "remote":
        return RemoteEmbedder(config, client=client)
    raise InvalidArgument(f"unknown embedding provider kind {config.kind!r}")
