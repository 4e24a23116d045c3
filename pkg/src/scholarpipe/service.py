"""HTTP service and pipeline assembly: configuration wiring, index build and
load, the FastAPI app, and the shared answer-record renderer used by both the
API and the CLI."""

from __future__ import annotations

import logging
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .compose import Backends, BiblioClient, PromptBudgetError, load_instruction_templates
from .config import ServiceConfig, config_echo
from .corpus import Corpus, chunk_document, load_corpus
from .embedding import build_provider
from .generate import (
    CompletionTransportError,
    HttpCompletionBackend,
    MockCompletionBackend,
    Pipeline,
    PipelineStageError,
)
from .kgfact import (
    KgClient,
    KgTimeoutError,
    KgTransportError,
    MissingSlotError,
    UnsupportedKgQueryError,
    load_templates,
)
from .router import KeywordClassifier, Router, load_identifier_terms
from .vindex import ChunkMetadata, IndexEntry, VectorIndex

logger = logging.getLogger(__name__)


def build_index(
    corpus: Corpus, embedder, min_chars: int = 800, prepend_section_path: bool = False
) -> tuple[VectorIndex, dict]:
    """Chunk every document and embed every chunk; deterministic for a fixed
    corpus and provider, so unchanged corpora re-ingest byte-identically.
    prepend_section_path embeds the heading path together with the text."""
    index = VectorIndex(dim=embedder.info.dim)
    chunks = {}
    for doc in corpus:
        for chunk in chunk_document(doc, min_chars=min_chars):
            chunks[chunk.chunk_id] = chunk
            text = (
                f"{chunk.section_path}\n{chunk.text}" if prepend_section_path else chunk.text
            )
            index.add(
                IndexEntry(
                    chunk_id=chunk.chunk_id,
                    vector=embedder.embed(text),
                    metadata=ChunkMetadata(
                        paper_id=doc.paper_id,
                        title=doc.title,
                        authors=doc.authors,
                        venue=doc.venue,
                        section_path=chunk.section_path,
                    ),
                )
            )
    index.freeze()
    return index, chunks


def chunk_map(corpus: Corpus, min_chars: int = 800) -> dict:
    return {
        chunk.chunk_id: chunk
        for doc in corpus
        for chunk in chunk_document(doc, min_chars=min_chars)
    }


def build_pipeline(config: ServiceConfig, build_missing_index: bool = True) -> Pipeline:
    if not config.corpus_path:
        raise ValueError("corpus.path is not configured")
    corpus = load_corpus(config.corpus_path, strict=config.ingest_strict)
    embedder = build_provider(
        provider=config.embedding_provider,
        dim=config.embedding_dim,
        url=config.embedding_url,
        token=config.embedding_token,
        timeout_s=config.embedding_timeout_ms / 1000.0,
        max_inflight=config.llm_max_inflight,
    )
    index_path = Path(config.index_path) if config.index_path else None
    if index_path is not None and index_path.exists():
        index = VectorIndex.load(index_path)
        chunks = chunk_map(corpus, min_chars=config.ingest_min_chars)
    elif build_missing_index:
        index, chunks = build_index(
            corpus,
            embedder,
            min_chars=config.ingest_min_chars,
            prepend_section_path=config.embedding_prepend_section_path,
        )
        if index_path is not None and len(index):
            index.save(index_path)
    else:
        raise FileNotFoundError(f"index not found at {index_path} (run ingest first)")

    completion = None
    if config.llm_mock_script:
        completion = MockCompletionBackend(path=config.llm_mock_script)
    elif config.llm_url:
        completion = HttpCompletionBackend(
            url=config.llm_url,
            model=config.llm_model,
            token=config.llm_token,
            timeout_s=config.llm_timeout_ms / 1000.0,
            max_inflight=config.llm_max_inflight,
        )

    backends = Backends(
        corpus=corpus,
        index=index,
        embedder=embedder,
        chunks=chunks,
        kg_client=KgClient(
            endpoint=config.kg_endpoint,
            timeout_s=config.kg_timeout_ms / 1000.0,
            row_cap=config.kg_row_cap,
        ),
        kg_registry=load_templates(),
        retrieval_k=config.retrieval_k,
        grounding_threshold=config.grounding_threshold,
    )
    router = Router(
        classifier=KeywordClassifier(),
        identifier_terms=load_identifier_terms(config.router_rules_path),
        threshold=config.router_threshold,
    )
    biblio = (
        BiblioClient(
            url=config.biblio_url,
            token=config.biblio_token,
            timeout_ms=config.biblio_timeout_ms,
        )
        if config.biblio_url
        else None
    )
    return Pipeline(
        backends=backends,
        router=router,
        completion=completion,
        templates=load_instruction_templates(config.compose_templates_dir),
        model_id=config.llm_model,
        budget_chars=config.compose_budget_chars,
        max_output_chars=config.llm_max_output_chars,
        temperature=config.llm_temperature,
        biblio=biblio,
        kg_llm_gloss=config.kg_llm_gloss,
    )


# ---------------------------------------------------------------------------
# record renderers (single source of truth for HTTP and CLI output)

def record_decision(decision) -> dict:
    return {
        "label": decision.label.value,
        "confidence": decision.confidence,
        "trigger": decision.trigger.value,
        "matched_rule": decision.matched_rule,
        "warning": decision.warning,
    }


def record_answer(answer) -> dict:
    return {
        "text": answer.text,
        "citations": sorted(answer.citations),
        "dropped_markers": list(answer.dropped_markers),
        "bibliography": [
            {
                "ref_nos": list(entry.ref_nos),
                "paper_id": entry.paper_id,
                "title": entry.title,
                "authors": list(entry.authors),
                "venue": entry.venue,
                "year": entry.year,
                "external_id": entry.external_id,
                "enrichment_status": entry.enrichment_status.value,
            }
            for entry in answer.bibliography
        ],
        "evidence": {
            "task": answer.evidence.task.value,
            "header": answer.evidence.header,
            "items": [
                {
                    "ref_no": item.ref_no,
                    "kind": item.kind.value,
                    "payload": item.payload,
                    "source": {
                        "paper_id": item.source.paper_id,
                        "chunk_id": item.source.chunk_id,
                        "title": item.source.title,
                        "section_path": item.source.section_path,
                        "template_id": item.source.template_id,
                        "endpoint": item.source.endpoint,
                        "row_index": item.source.row_index,
                    },
                }
                for item in answer.evidence.items
            ],
        },
        "provenance": {
            "model_id": answer.provenance.model_id,
            "k": answer.provenance.k,
            "routing": record_decision(answer.provenance.routing),
            "timings_ms": answer.provenance.timings_ms,
            "attempts": answer.provenance.attempts,
            "ungrounded": answer.provenance.ungrounded,
            "dropped_evidence_refs": list(answer.provenance.dropped_evidence_refs),
        },
    }


def record_templates(registry) -> dict:
    return {
        "templates": [
            {
                "template_id": t.template_id,
                "category": t.category,
                "description": t.description,
                "required_slots": list(t.required_slots),
                "result_columns": [[name, sem] for name, sem in t.result_columns],
            }
            for _, t in sorted(registry.items())
        ]
    }


# ---------------------------------------------------------------------------
# HTTP app

_OVERRIDE_KEYS = {"retrieval.k": "k", "router.threshold": "threshold", "compose.budget_chars": "budget_chars"}


class AskBody(BaseModel):
    query: str
    overrides: dict | None = None


class RouteBody(BaseModel):
    query: str


def _status_for(cause: Exception) -> int:
    seen = 0
    while cause is not None and seen < 8:
        if isinstance(cause, (UnsupportedKgQueryError, MissingSlotError)):
            return 422
        if isinstance(cause, (PromptBudgetError, ValueError)):
            return 400
        if isinstance(cause, (CompletionTransportError, KgTransportError, KgTimeoutError)):
            return 502
        cause = getattr(cause, "cause", None) or cause.__cause__
        seen += 1
    return 500


def build_app(pipeline: Pipeline, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="scholarpipe", version="0.1.0")
    origins = [o.strip() for o in config.service_cors_origins.split(",") if o.strip()]
    app.add_middleware(
        CORSMiddleware,
        allow_origins=origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.middleware("http")
    async def request_id_middleware(request: Request, call_next):
        request_id = uuid.uuid4().hex[:12]
        request.state.request_id = request_id
        started = time.monotonic()
        response = await call_next(request)
        response.headers["X-Request-Id"] = request_id
        logger.info(
            "request_id=%s %s %s -> %s in %dms",
            request_id,
            request.method,
            request.url.path,
            response.status_code,
            int((time.monotonic() - started) * 1000),
        )
        return response

    @app.exception_handler(PipelineStageError)
    async def stage_error_handler(request: Request, exc: PipelineStageError):
        return JSONResponse(
            status_code=_status_for(exc.cause),
            content={
                "stage": exc.stage,
                "message": str(exc.cause),
                "request_id": getattr(request.state, "request_id", None),
            },
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={
                "stage": "request",
                "message": str(exc),
                "request_id": getattr(request.state, "request_id", None),
            },
        )

    @app.post("/v1/ask")
    def ask(body: AskBody):
        kwargs = {}
        for dotted, value in (body.overrides or {}).items():
            if dotted not in _OVERRIDE_KEYS:
                raise ValueError(f"unknown override key {dotted!r}")
            kwargs[_OVERRIDE_KEYS[dotted]] = value
        answer = pipeline.answer(body.query, **kwargs)
        return record_answer(answer)

    @app.post("/v1/route")
    def route(body: RouteBody):
        if not body.query.strip():
            raise ValueError("query must be non-empty")
        return record_decision(pipeline.router.route(body.query))

    @app.get("/v1/health")
    def health():
        return {
            "ready": True,
            "documents": len(pipeline.backends.corpus),
            "chunks": len(pipeline.backends.chunks),
            "dim": pipeline.backends.index.dim,
        }

    @app.get("/v1/templates")
    def templates():
        registry = pipeline.backends.kg_registry or load_templates()
        return record_templates(registry)

    @app.get("/v1/config")
    def config_view():
        return config_echo(config)

    return app


def serve(config: ServiceConfig, build_missing_index: bool = True) -> None:
    """Blocking entry point: build the pipeline, bind, and serve until
    shutdown. Startup failures (bad config, unloadable index) are fatal here,
    never mid-flight."""
    import uvicorn

    pipeline = build_pipeline(config, build_missing_index=build_missing_index)
    app = build_app(pipeline, config)
    host, port = config.host_port
    logger.info("serving on %s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_level="info")
