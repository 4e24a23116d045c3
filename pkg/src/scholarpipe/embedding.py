"""Text-to-vector providers: a deterministic feature-hashing baseline that
runs offline, plus a remote HTTP provider for real sentence-embedding models."""

from __future__ import annotations

import hashlib
import math
import re
import threading
from dataclasses import dataclass

import httpx

DEFAULT_DIM = 384

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingError(Exception):
    pass


class EmbeddingTransportError(EmbeddingError):
    def __init__(self, provider_id: str, cause: str):
        self.provider_id = provider_id
        super().__init__(f"embedding provider {provider_id!r} failed: {cause}")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(f"expected {self.dim} values, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("vector contains non-finite values")

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


@dataclass(frozen=True)
class ProviderInfo:
    provider_id: str
    dim: int
    normalized: bool

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding noise."""
    if a.dim != b.dim:
        raise EmbeddingError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity undefined for zero-norm vector")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (na * nb)))


def _check_text(text: str) -> str:
    normalized = " ".join(text.split())
    if not normalized:
        raise EmbeddingError("cannot embed empty text")
    return normalized


class HashingEmbedder:
    """Feature-hashed token counts: lowercase, split on non-alphanumerics,
    signed-hash each token into dim buckets, L2-normalize. Pure and
    deterministic across processes (stable hash, no salt)."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.info = ProviderInfo(provider_id=f"baseline-hash-{dim}", dim=dim, normalized=True)

    def embed(self, text: str) -> EmbeddingVector:
        normalized = _check_text(text)
        dim = self.info.dim
        acc = [0.0] * dim
        tokens = _TOKEN_RE.findall(normalized.lower())
        if not tokens:
            # No alphanumeric content: hash the whole normalized text so the
            # unit-norm contract still holds.
            tokens = [normalized]
        for token in tokens:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "little")
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            acc[h % dim] += sign
        norm = math.sqrt(sum(v * v for v in acc))
        if norm == 0.0:
            acc[0] = 1.0
            norm = 1.0
        return EmbeddingVector(values=tuple(v / norm for v in acc), dim=dim)

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        out = []
        for i, text in enumerate(texts):
            try:
                out.append(self.embed(text))
            except EmbeddingError as exc:
                raise EmbeddingError(f"batch element {i}: {exc}") from exc
        return out


class RemoteEmbedder:
    """HTTP provider: POST {"texts": [...]} -> {"vectors": [[...], ...], "dim": n}."""

    def __init__(
        self,
        url: str,
        dim: int = DEFAULT_DIM,
        token: str | None = None,
        timeout_s: float = 10.0,
        max_inflight: int = 4,
        normalized: bool = True,
        transport: httpx.BaseTransport | None = None,
    ):
        self.info = ProviderInfo(provider_id=f"remote:{url}", dim=dim, normalized=normalized)
        self._url = url
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(timeout=timeout_s, transport=transport)
        self._gate = threading.Semaphore(max_inflight)

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        for i, text in enumerate(texts):
            if not " ".join(text.split()):
                raise EmbeddingError(f"batch element {i}: cannot embed empty text")
        if not texts:
            return []
        with self._gate:
            try:
                resp = self._client.post(self._url, json={"texts": texts}, headers=self._headers)
                resp.raise_for_status()
                payload = resp.json()
            except httpx.HTTPError as exc:
                raise EmbeddingTransportError(self.info.provider_id, str(exc)) from exc
        vectors = payload.get("vectors")
        dim = payload.get("dim")
        if not isinstance(vectors, list) or dim != self.info.dim or len(vectors) != len(texts):
            raise EmbeddingTransportError(
                self.info.provider_id, f"malformed response (dim={dim}, n={len(vectors or [])})"
            )
        return [EmbeddingVector(values=tuple(float(x) for x in vec), dim=dim) for vec in vectors]

    def close(self) -> None:
        self._client.close()


def build_provider(
    provider: str = "baseline",
    dim: int = DEFAULT_DIM,
    url: str | None = None,
    token: str | None = None,
    timeout_s: float = 10.0,
    max_inflight: int = 4,
):
    if provider == "baseline":
        return HashingEmbedder(dim=dim)
    if provider == "remote":
        if not url:
            raise EmbeddingError("remote embedding provider requires embedding.url")
        return RemoteEmbedder(url=url, dim=dim, token=token, timeout_s=timeout_s, max_inflight=max_inflight)
    raise EmbeddingError(f"unknown embedding provider {provider!r}")
