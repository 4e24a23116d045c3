"""HTTP service tests against the in-process app with mock backends."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from scholarpipe.config import load_config
from scholarpipe.service import build_app, build_index, build_pipeline


@pytest.fixture(scope="module")
def service(corpus_dir, mock_script_path, sparql_server):
    config = load_config(
        flags={
            "corpus.path": str(corpus_dir),
            "llm.mock_script": str(mock_script_path),
            "kg.endpoint": sparql_server,
            "ingest.min_chars": 120,
            "retrieval.k": 3,
        },
        env={},
    )
    pipeline = build_pipeline(config)
    app = build_app(pipeline, config)
    return TestClient(app), pipeline, config


def test_health_reports_counts(service):
    client, pipeline, _ = service
    resp = client.get("/v1/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["ready"] is True
    assert body["documents"] == 5
    assert body["chunks"] == len(pipeline.backends.chunks) > 0
    assert body["dim"] == 384


def test_ask_general_qa(service):
    client, _, _ = service
    resp = client.post("/v1/ask", json={"query": "How does sparse attention reduce cost?"})
    assert resp.status_code == 200
    body = resp.json()
    assert "[1]" in body["text"]
    assert body["citations"] == [1]
    assert body["provenance"]["routing"]["label"] == "general_qa"
    assert body["provenance"]["k"] == 3
    assert len(body["evidence"]["items"]) == 3
    assert body["bibliography"]


def test_ask_kg_fact_table(service):
    client, _, _ = service
    resp = client.post("/v1/ask", json={"query": "What is the h-index of Jane Doe?"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["provenance"]["routing"]["trigger"] == "rule_precheck"
    assert "42" in body["text"]
    assert body["citations"] == [1]
    assert body["evidence"]["items"][0]["kind"] == "kg_row"


def test_ask_override_k(service):
    client, _, _ = service
    resp = client.post(
        "/v1/ask",
        json={"query": "How does dense retrieval work?", "overrides": {"retrieval.k": 1}},
    )
    assert resp.status_code == 200
    assert len(resp.json()["evidence"]["items"]) == 1


def test_ask_unknown_override_rejected(service):
    client, _, _ = service
    resp = client.post(
        "/v1/ask", json={"query": "anything", "overrides": {"bogus.key": 1}}
    )
    assert resp.status_code == 400
    body = resp.json()
    assert "bogus.key" in body["message"]
    assert body["request_id"]


def test_route_endpoint(service):
    client, _, _ = service
    resp = client.post("/v1/route", json={"query": "Summarize the paper 'Dense Retrieval at Scale'"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["label"] == "summarization"
    assert body["trigger"] == "classifier"


def test_templates_endpoint(service):
    client, _, _ = service
    resp = client.get("/v1/templates")
    assert resp.status_code == 200
    templates = resp.json()["templates"]
    assert len(templates) == 18
    assert {t["category"] for t in templates} == {"author", "work"}


def test_request_id_header(service):
    client, _, _ = service
    resp = client.get("/v1/health")
    assert resp.headers.get("x-request-id")


def test_error_body_carries_stage(corpus_dir, mock_script_path):
    config = load_config(
        flags={
            "corpus.path": str(corpus_dir),
            "llm.mock_script": str(mock_script_path),
            "kg.endpoint": "http://127.0.0.1:9/sparql",  # refused
            "kg.timeout_ms": 500,
        },
        env={},
    )
    pipeline = build_pipeline(config)
    client = TestClient(build_app(pipeline, config))
    resp = client.post("/v1/ask", json={"query": "What is the h-index of Jane Doe?"})
    assert resp.status_code == 502
    body = resp.json()
    assert body["stage"] == "retrieve"
    assert body["request_id"]


def test_service_stays_responsive_during_slow_generation(corpus_dir, sparql_server):
    class StallingBackend:
        model = "stall"

        def complete_request(self, request):
            time.sleep(1.5)
            from scholarpipe.generate import CompletionResult

            return CompletionResult(text="slow answer [1]", attempts=1)

    config = load_config(
        flags={"corpus.path": str(corpus_dir), "kg.endpoint": sparql_server,
               "ingest.min_chars": 120},
        env={},
    )
    pipeline = build_pipeline(config)
    pipeline.completion = StallingBackend()
    app = build_app(pipeline, config)

    with TestClient(app) as client:
        with ThreadPoolExecutor(max_workers=2) as pool:
            slow = pool.submit(
                client.post, "/v1/ask", json={"query": "How does sparse attention reduce cost?"}
            )
            time.sleep(0.1)  # let the slow request enter the backend
            started = time.monotonic()
            health = client.get("/v1/health")
            health_latency = time.monotonic() - started
            assert health.status_code == 200
            assert health_latency < 1.0
            assert slow.result().status_code == 200


def test_cors_headers(service):
    client, _, _ = service
    resp = client.options(
        "/v1/ask",
        headers={
            "Origin": "http://localhost:5173",
            "Access-Control-Request-Method": "POST",
        },
    )
    assert resp.headers.get("access-control-allow-origin") in ("*", "http://localhost:5173")


def test_config_endpoint_masks_secrets(corpus_dir, mock_script_path):
    config = load_config(
        flags={
            "corpus.path": str(corpus_dir),
            "llm.mock_script": str(mock_script_path),
            "llm.token": "secret-token",
        },
        env={},
    )
    pipeline = build_pipeline(config)
    client = TestClient(build_app(pipeline, config))
    body = client.get("/v1/config").json()
    assert body["llm.token"] == "***"
    assert body["corpus.path"] == str(corpus_dir)


def test_build_pipeline_saves_and_reuses_index(corpus_dir, mock_script_path, tmp_path):
    index_path = tmp_path / "demo.spidx"
    flags = {
        "corpus.path": str(corpus_dir),
        "index.path": str(index_path),
        "llm.mock_script": str(mock_script_path),
    }
    build_pipeline(load_config(flags=flags, env={}))
    assert index_path.exists()
    first_bytes = index_path.read_bytes()
    pipeline = build_pipeline(load_config(flags=flags, env={}))
    assert index_path.read_bytes() == first_bytes
    assert len(pipeline.backends.index) > 0


def test_prepend_section_path_changes_index(corpus_dir):
    from scholarpipe.corpus import load_corpus
    from scholarpipe.embedding import HashingEmbedder

    corpus = load_corpus(corpus_dir)
    embedder = HashingEmbedder(dim=48)
    plain, _ = build_index(corpus, embedder, min_chars=120)
    prefixed, _ = build_index(corpus, embedder, min_chars=120, prepend_section_path=True)
    some_id = next(iter(plain._meta))
    assert plain.get(some_id).vector != prefixed.get(some_id).vector
    again, _ = build_index(corpus, embedder, min_chars=120, prepend_section_path=True)
    assert prefixed.get(some_id).vector == again.get(some_id).vector
