"""Embedding provider and cosine similarity tests."""

from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scholarpipe.embedding import (
    DEFAULT_DIM,
    EmbeddingError,
    EmbeddingTransportError,
    EmbeddingVector,
    HashingEmbedder,
    RemoteEmbedder,
    build_provider,
    cosine_similarity,
)


def test_baseline_deterministic():
    emb = HashingEmbedder()
    a = emb.embed("sparse attention for long documents")
    b = emb.embed("sparse attention for long documents")
    assert a == b


def test_default_dim_is_384():
    vec = build_provider().embed("any text at all")
    assert vec.dim == DEFAULT_DIM == 384


def test_baseline_unit_norm():
    vec = HashingEmbedder(dim=64).embed("tokens hash into signed buckets")
    assert abs(vec.norm() - 1.0) < 1e-6


def test_baseline_no_alnum_tokens_still_unit_norm():
    vec = HashingEmbedder(dim=16).embed("!!! ???")
    assert abs(vec.norm() - 1.0) < 1e-6


def test_embed_empty_text_rejected():
    with pytest.raises(EmbeddingError, match="empty"):
        HashingEmbedder().embed("   ")


def test_embed_batch_matches_individual():
    emb = HashingEmbedder(dim=32)
    texts = ["alpha beta", "gamma", "delta epsilon zeta"]
    assert emb.embed_batch(texts) == [emb.embed(t) for t in texts]


def test_embed_batch_empty():
    assert HashingEmbedder().embed_batch([]) == []


def test_embed_batch_error_cites_index():
    with pytest.raises(EmbeddingError, match="element 1"):
        HashingEmbedder().embed_batch(["ok", "  ", "ok"])


def test_cosine_identity():
    v = HashingEmbedder(dim=32).embed("some words here")
    assert cosine_similarity(v, v) == pytest.approx(1.0)


def test_cosine_orthogonal():
    a = EmbeddingVector(values=(1.0, 0.0), dim=2)
    b = EmbeddingVector(values=(0.0, 1.0), dim=2)
    assert cosine_similarity(a, b) == 0.0


def test_cosine_hand_computed():
    a = EmbeddingVector(values=(1.0, 2.0, 3.0), dim=3)
    b = EmbeddingVector(values=(4.0, 5.0, 6.0), dim=3)
    # 32 / (sqrt(14) * sqrt(77))
    assert cosine_similarity(a, b) == pytest.approx(0.974631846, abs=1e-6)


def test_cosine_dim_mismatch():
    a = EmbeddingVector(values=(1.0,), dim=1)
    b = EmbeddingVector(values=(1.0, 0.0), dim=2)
    with pytest.raises(EmbeddingError, match="mismatch"):
        cosine_similarity(a, b)


def test_cosine_zero_norm():
    a = EmbeddingVector(values=(0.0, 0.0), dim=2)
    b = EmbeddingVector(values=(1.0, 0.0), dim=2)
    with pytest.raises(EmbeddingError, match="zero-norm"):
        cosine_similarity(a, b)


@settings(max_examples=50, deadline=None)
@given(
    text_a=st.text(alphabet="abcdefg hij", min_size=1).filter(lambda s: s.strip()),
    text_b=st.text(alphabet="abcdefg hij", min_size=1).filter(lambda s: s.strip()),
)
def test_cosine_symmetry_property(text_a, text_b):
    emb = HashingEmbedder(dim=48)
    a, b = emb.embed(text_a), emb.embed(text_b)
    assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a))
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


def test_cosine_scale_invariance():
    a = EmbeddingVector(values=(1.0, 2.0, -3.0), dim=3)
    c = EmbeddingVector(values=(2.5, 5.0, -7.5), dim=3)
    assert cosine_similarity(a, c) == pytest.approx(1.0)


@pytest.mark.parametrize("dim", [8, 64, 384])
def test_provider_contract_across_dims(dim):
    emb = build_provider("baseline", dim=dim)
    vec = emb.embed("contract check text")
    assert vec.dim == emb.info.dim == dim
    if emb.info.normalized:
        assert abs(vec.norm() - 1.0) < 1e-6


def test_vector_validation():
    with pytest.raises(ValueError):
        EmbeddingVector(values=(1.0, 2.0), dim=3)
    with pytest.raises(ValueError):
        EmbeddingVector(values=(float("nan"),), dim=1)


def _mock_remote(handler) -> RemoteEmbedder:
    return RemoteEmbedder(
        url="http://embed.test/v1", dim=3, transport=httpx.MockTransport(handler)
    )


def test_remote_provider_roundtrip():
    def handler(request: httpx.Request) -> httpx.Response:
        texts = json.loads(request.content)["texts"]
        return httpx.Response(
            200, json={"vectors": [[1.0, 0.0, 0.0] for _ in texts], "dim": 3}
        )

    emb = _mock_remote(handler)
    vecs = emb.embed_batch(["a", "b"])
    assert len(vecs) == 2 and vecs[0].dim == 3


def test_remote_provider_transport_error_names_provider():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    with pytest.raises(EmbeddingTransportError, match="remote:http://embed.test/v1"):
        _mock_remote(handler).embed("x")


def test_remote_provider_malformed_response():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"vectors": [[1.0]], "dim": 99})

    with pytest.raises(EmbeddingTransportError, match="malformed"):
        _mock_remote(handler).embed("x")
