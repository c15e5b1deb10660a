"""Text embedding: asymmetric role prefixes, mean pooling, unit normalization.

Two embedders share the same pooling math. The reference embedder is a
deterministic, dependency-free stand-in (hash-derived token vectors) used for
tests and local runs; the external embedder fetches per-token vectors from an
HTTP encoder and pools/normalizes them locally.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import httpx
import numpy as np

PASSAGE_PREFIX = "passage: "
QUERY_PREFIX = "query: "
ROLE_QUERY = "query"
ROLE_PASSAGE = "passage"

DEFAULT_DIM = 64
DEFAULT_MAX_TOKENS = 180

_TOKEN_KEY = b"searchgym-token-v1"


class EmbeddingError(Exception):
    pass


class EmbedderConfigError(EmbeddingError):
    """Fatal misconfiguration, e.g. provider dimension mismatch."""


class EmbedderTransportError(EmbeddingError):
    """Retryable transport failure talking to an external encoder."""


def format_text(text: str, role: str) -> str:
    """Prepend the role prefix ("query: " / "passage: ", trailing space included)."""
    if role == ROLE_QUERY:
        return QUERY_PREFIX + text
    if role == ROLE_PASSAGE:
        return PASSAGE_PREFIX + text
    raise ValueError(f"unknown role: {role!r}")


def mean_pool(token_vectors, mask) -> np.ndarray:
    """Average token vectors over the valid-token mask."""
    hidden = np.asarray(token_vectors, dtype=np.float64)
    valid = np.asarray(mask, dtype=np.float64)
    if hidden.shape[0] != valid.shape[0]:
        raise ValueError("token_vectors and mask lengths differ")
    total = valid.sum()
    if total == 0:
        raise ValueError("empty sequence")
    return (hidden * valid[:, None]).sum(axis=0) / total


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ValueError("cannot normalize zero vector")
    return vector / norm


def pool_and_normalize(token_vectors, mask=None) -> np.ndarray:
    """Mean-pool then unit-normalize; returns float32."""
    hidden = np.asarray(token_vectors, dtype=np.float64)
    if mask is None:
        mask = np.ones(hidden.shape[0])
    return l2_normalize(mean_pool(hidden, mask)).astype(np.float32)


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "reference"
    dim: int = DEFAULT_DIM
    max_tokens: int = DEFAULT_MAX_TOKENS
    endpoint: str | None = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise EmbedderConfigError("max_tokens must be >= 1")
        if self.kind not in ("reference", "external"):
            raise EmbedderConfigError(f"unknown embedder kind: {self.kind!r}")
        if self.kind == "external" and not self.endpoint:
            raise EmbedderConfigError("external embedder requires an endpoint")


class ReferenceEmbedder:
    """Deterministic embedder: whitespace tokens, hash-derived unit token vectors.

    Same (text, role) always yields a bitwise-identical vector, which keeps
    index builds reproducible without any ML runtime.
    """

    kind = "reference"

    def __init__(self, dim: int = DEFAULT_DIM, max_tokens: int = DEFAULT_MAX_TOKENS):
        self.dim = dim
        self.max_tokens = max_tokens

    def token_vector(self, token: str) -> np.ndarray:
        n_blocks = (self.dim * 4 + 31) // 32
        raw = b"".join(
            hashlib.blake2b(
                i.to_bytes(4, "little") + token.encode("utf-8"),
                digest_size=32,
                key=_TOKEN_KEY,
            ).digest()
            for i in range(n_blocks)
        )
        words = np.frombuffer(raw[: self.dim * 4], dtype="<u4").astype(np.float64)
        vec = words / 2147483648.0 - 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:  # unreachable in practice, keeps the math total
            vec[0] = 1.0
            norm = 1.0
        return (vec / norm).astype(np.float32)

    def embed(self, text: str, role: str) -> np.ndarray:
        tokens = format_text(text, role).split()[: self.max_tokens]
        vectors = np.stack([self.token_vector(t) for t in tokens])
        return pool_and_normalize(vectors)


class ExternalEmbedder:
    """Pools and normalizes per-token vectors served by an HTTP encoder.

    Expects POST {"text": ...} -> {"token_embeddings": [[...], ...],
    "mask": [1, 0, ...]} (mask optional; defaults to all-valid).
    """

    kind = "external"

    def __init__(
        self,
        endpoint: str,
        dim: int,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        timeout: float = 30.0,
        retries: int = 3,
    ):
        self.endpoint = endpoint
        self.dim = dim
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.retries = retries

    def embed(self, text: str, role: str) -> np.ndarray:
        payload = {"text": format_text(text, role), "max_tokens": self.max_tokens}
        last_exc: Exception | None = None
        for _ in range(self.retries):
            try:
                response = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
                response.raise_for_status()
                body = response.json()
                break
            except (httpx.TransportError, httpx.HTTPStatusError, json.JSONDecodeError) as exc:
                last_exc = exc
        else:
            raise EmbedderTransportError(
                f"encoder at {self.endpoint} unreachable after {self.retries} attempts"
            ) from last_exc
        hidden = np.asarray(body["token_embeddings"], dtype=np.float64)
        if hidden.ndim != 2 or hidden.shape[1] != self.dim:
            raise EmbedderConfigError(
                f"encoder returned dimension {hidden.shape[-1] if hidden.ndim else '?'}, "
                f"expected {self.dim}"
            )
        mask = body.get("mask")
        return pool_and_normalize(hidden, mask)


def make_embedder(spec: EmbedderSpec):
    if spec.kind == "reference":
        return ReferenceEmbedder(dim=spec.dim, max_tokens=spec.max_tokens)
    return ExternalEmbedder(endpoint=spec.endpoint, dim=spec.dim, max_tokens=spec.max_tokens)


def embed(text: str, role: str, spec: EmbedderSpec) -> np.ndarray:
    return make_embedder(spec).embed(text, role)
