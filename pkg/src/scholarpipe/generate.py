"""Response generation: send composed prompts to a chat-completion endpoint
(or the scripted mock), parse citation markers, and assemble the final answer
with its bibliography and provenance."""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import httpx

from .compose import (
    Backends,
    BiblioClient,
    ComposedPrompt,
    EvidenceSet,
    TaskLabel,
    compose_prompt,
    enrich_bibliography,
    gather_evidence,
    load_instruction_templates,
)
from .router import Router, RoutingDecision, Trigger

_MARKER_RE = re.compile(r"\[\s*(\d+(?:\s*,\s*\d+)*)\s*\]")

DEFAULT_MAX_OUTPUT_CHARS = 4_000


class GenerationError(Exception):
    pass


class CompletionTransportError(GenerationError):
    pass


class CompletionHttpError(GenerationError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"completion endpoint returned HTTP {status} {detail}".rstrip())


class EmptyCompletionError(GenerationError):
    pass


class PipelineStageError(GenerationError):
    """Wraps a failure with the pipeline stage that produced it."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass(frozen=True)
class GenerationRequest:
    prompt: ComposedPrompt
    model_id: str
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    attempts: int


class HttpCompletionBackend:
    """Chat-style completion client: POST <url>/v1/chat/completions, retrying
    transport failures / 429 / 5xx with exponential backoff."""

    def __init__(
        self,
        url: str,
        model: str,
        token: str | None = None,
        timeout_s: float = 60.0,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        max_tokens: int = 1024,
        max_inflight: int = 4,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        self._url = url.rstrip("/") + "/v1/chat/completions"
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)
        self._max_retries = max_retries
        self._backoff_s = backoff_s
        self._max_tokens = max_tokens
        self._gate = threading.Semaphore(max_inflight)

    def complete_request(self, request: GenerationRequest) -> CompletionResult:
        body = {
            "model": request.model_id or self.model,
            "messages": [{"role": "user", "content": request.prompt.text}],
            "temperature": request.temperature,
            "max_tokens": self._max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(1, self._max_retries + 1):
            try:
                with self._gate:
                    resp = self._client.post(self._url, json=body)
            except httpx.HTTPError as exc:
                last_error = CompletionTransportError(f"completion endpoint unreachable: {exc}")
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = CompletionHttpError(resp.status_code, resp.text[:200])
                elif resp.status_code >= 400:
                    raise CompletionHttpError(resp.status_code, resp.text[:200])
                else:
                    try:
                        text = resp.json()["choices"][0]["message"]["content"]
                    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                        raise CompletionHttpError(
                            resp.status_code, f"malformed completion body: {exc}"
                        ) from exc
                    if not text or not text.strip():
                        raise EmptyCompletionError("completion endpoint returned empty text")
                    return CompletionResult(
                        text=text[: request.max_output_chars], attempts=attempt
                    )
            if attempt < self._max_retries:
                time.sleep(self._backoff_s * (2 ** (attempt - 1)))
        raise last_error

    def complete(self, prompt_text: str) -> str:
        request = GenerationRequest(
            prompt=ComposedPrompt(
                task=TaskLabel.GENERAL_QA,
                text=prompt_text,
                evidence=EvidenceSet(task=TaskLabel.GENERAL_QA, items=()),
                budget_chars=len(prompt_text),
            ),
            model_id=self.model,
        )
        return self.complete_request(request).text


class MockCompletionBackend:
    """Replays scripted responses from a fixture file: content-matching rules
    first, then an in-order response queue, then a default."""

    def __init__(self, script: dict | None = None, path: str | Path | None = None):
        if script is None and path is None:
            raise ValueError("mock backend needs a script or a fixture path")
        if script is None:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        self._rules = [(r["contains"], r["response"]) for r in script.get("rules", [])]
        self._queue = list(script.get("responses", []))
        self._default = script.get("default")
        self.model = script.get("model", "mock-model")
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def complete_request(self, request: GenerationRequest) -> CompletionResult:
        text = self.complete(request.prompt.text)
        return CompletionResult(text=text[: request.max_output_chars], attempts=1)

    def complete(self, prompt_text: str) -> str:
        with self._lock:
            self.calls.append(prompt_text)
            for contains, response in self._rules:
                if contains in prompt_text:
                    return response
            if self._queue:
                return self._queue.pop(0)
        if self._default is not None:
            return self._default
        raise EmptyCompletionError("mock script exhausted and no default response set")


def extract_citations(text: str, m: int) -> tuple[set[int], tuple[int, ...]]:
    """Bracketed integer markers, comma lists included; markers outside
    [1, m] are dropped (and reported), never fatal."""
    citations: set[int] = set()
    dropped: list[int] = []
    for match in _MARKER_RE.finditer(text):
        for piece in match.group(1).split(","):
            n = int(piece.strip())
            if 1 <= n <= m:
                citations.add(n)
            elif n not in dropped:
                dropped.append(n)
    return citations, tuple(dropped)


@dataclass(frozen=True)
class Provenance:
    model_id: str
    k: int
    routing: RoutingDecision
    timings_ms: dict[str, int]
    attempts: int = 0
    ungrounded: bool = False
    dropped_evidence_refs: tuple[int, ...] = ()


@dataclass(frozen=True)
class GeneratedAnswer:
    text: str
    citations: frozenset[int]
    dropped_markers: tuple[int, ...]
    bibliography: tuple
    evidence: EvidenceSet
    provenance: Provenance

    def __post_init__(self) -> None:
        valid = set(range(1, self.evidence.m + 1))
        if not set(self.citations) <= valid:
            raise ValueError(f"citations {set(self.citations) - valid} outside evidence refs")
        if set(self.dropped_markers) & set(self.citations):
            raise ValueError("dropped markers overlap citations")


@dataclass
class Pipeline:
    """End-to-end wiring: route, gather, compose, complete, extract, cite."""

    backends: Backends
    router: Router = field(default_factory=Router)
    completion: object | None = None
    templates: dict[TaskLabel, str] | None = None
    model_id: str = "mock-model"
    budget_chars: int = 10_000
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS
    temperature: float = 0.0
    biblio: BiblioClient | None = None
    kg_llm_gloss: bool = False

    def __post_init__(self) -> None:
        if self.templates is None:
            self.templates = load_instruction_templates()

    def answer(
        self,
        query: str,
        k: int | None = None,
        threshold: float | None = None,
        budget_chars: int | None = None,
    ) -> GeneratedAnswer:
        if not query or not query.strip():
            raise PipelineStageError("route", ValueError("query must be non-empty"))
        timings: dict[str, int] = {}
        decision = self._timed(timings, "route", lambda: self.router.route(query, threshold))
        backends = self.backends if k is None else replace(self.backends, retrieval_k=k)
        evidence = self._timed(
            timings, "retrieve", lambda: gather_evidence(query, decision, backends)
        )
        return self._finish(query, decision, evidence, timings, budget_chars)

    def answer_with_evidence(
        self, query: str, evidence: EvidenceSet, budget_chars: int | None = None
    ) -> GeneratedAnswer:
        """Entry point for benchmark modes that bypass retrieval (gold or
        empty context)."""
        decision = RoutingDecision(
            label=evidence.task, confidence=1.0, trigger=Trigger.CLASSIFIER
        )
        return self._finish(query, decision, evidence, {}, budget_chars)

    def _timed(self, timings: dict[str, int], stage: str, fn):
        started = time.monotonic()
        try:
            result = fn()
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(stage, exc) from exc
        timings[stage] = int((time.monotonic() - started) * 1000)
        return result

    def _finish(
        self,
        query: str,
        decision: RoutingDecision,
        evidence: EvidenceSet,
        timings: dict[str, int],
        budget_chars: int | None = None,
    ) -> GeneratedAnswer:
        budget = self.budget_chars if budget_chars is None else budget_chars
        prompt = self._timed(
            timings,
            "compose",
            lambda: compose_prompt(query, evidence, self.templates, budget_chars=budget),
        )
        verbatim_kg = decision.label is TaskLabel.KG_FACT and not self.kg_llm_gloss
        if verbatim_kg:
            text = self._render_kg_answer(prompt.evidence)
            citations = set(range(1, prompt.evidence.m + 1))
            dropped_markers: tuple[int, ...] = ()
            attempts = 0
        else:
            if self.completion is None:
                raise PipelineStageError(
                    "generate", GenerationError("no completion backend configured (llm.url)")
                )
            request = GenerationRequest(
                prompt=prompt,
                model_id=self.model_id,
                max_output_chars=self.max_output_chars,
                temperature=self.temperature,
            )
            result = self._timed(
                timings, "generate", lambda: self.completion.complete_request(request)
            )
            text, attempts = result.text, result.attempts
            citations, dropped_markers = extract_citations(text, m=prompt.evidence.m)
        bibliography = self._timed(
            timings,
            "bibliography",
            lambda: enrich_bibliography(
                prompt.evidence, corpus=self.backends.corpus, client=self.biblio
            ),
        )
        return GeneratedAnswer(
            text=text,
            citations=frozenset(citations),
            dropped_markers=dropped_markers,
            bibliography=bibliography,
            evidence=prompt.evidence,
            provenance=Provenance(
                model_id=self.model_id,
                k=self.backends.retrieval_k,
                routing=decision,
                timings_ms=timings,
                attempts=attempts,
                ungrounded=prompt.ungrounded,
                dropped_evidence_refs=prompt.dropped_refs,
            ),
        )

    @staticmethod
    def _render_kg_answer(evidence: EvidenceSet) -> str:
        if not evidence.items:
            return "No record found."
        lines = []
        if evidence.header:
            lines.append(" " * len(f"[{evidence.items[0].ref_no}] ") + evidence.header)
        lines.extend(f"[{item.ref_no}] {item.payload}" for item in evidence.items)
        return "\n".join(lines)
