"""Prompt assembly: gather task-appropriate evidence, number it, render the
instruction-prefix / evidence / query concatenation under a character budget,
and enrich the bibliography via a scholarly-metadata API."""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import httpx

from .corpus import Chunk, Corpus, normalize_title
from .embedding import HashingEmbedder
from .grounding import GroundingStatus, ground
from .kgfact import KgClient, SparqlTemplate, answer_kg_query
from .router import RoutingDecision, TaskLabel
from .vindex import VectorIndex

DEFAULT_BUDGET_CHARS = 10_000
DEFAULT_FULLTEXT_BUDGET_CHARS = 8_000


class ComposeError(Exception):
    pass


class PromptBudgetError(ComposeError):
    pass


class EvidenceError(ComposeError):
    """Backend failure wrapped with the task label being served."""

    def __init__(self, task: TaskLabel, cause: Exception):
        self.task = task
        self.cause = cause
        super().__init__(f"evidence retrieval for {task.value} failed: {cause}")


class EvidenceKind(str, Enum):
    TEXT_CHUNK = "text_chunk"
    PAPER_FULL_TEXT = "paper_full_text"
    KG_ROW = "kg_row"
    INLINE_TEXT = "inline_text"


@dataclass(frozen=True)
class SourceRef:
    paper_id: str | None = None
    chunk_id: str | None = None
    title: str | None = None
    authors: tuple[str, ...] = ()
    venue: str | None = None
    section_path: str | None = None
    template_id: str | None = None
    endpoint: str | None = None
    row_index: int | None = None


@dataclass(frozen=True)
class EvidenceItem:
    ref_no: int
    kind: EvidenceKind
    payload: str
    source: SourceRef

    def __post_init__(self) -> None:
        if self.ref_no < 1:
            raise ValueError("ref_no must be >= 1")
        if not self.payload:
            raise ValueError("payload must be non-empty")


@dataclass(frozen=True)
class EvidenceSet:
    task: TaskLabel
    items: tuple[EvidenceItem, ...]
    header: str | None = None  # column header line for KG tables

    def __post_init__(self) -> None:
        refs = [item.ref_no for item in self.items]
        if refs != list(range(1, len(refs) + 1)):
            raise ValueError(f"evidence must be numbered 1..m without gaps, got {refs}")

    @property
    def m(self) -> int:
        return len(self.items)


class EnrichmentStatus(str, Enum):
    LOCAL = "local"
    ENRICHED = "enriched"
    FAILED = "failed"


@dataclass(frozen=True)
class BibEntry:
    ref_nos: tuple[int, ...]
    paper_id: str
    title: str
    authors: tuple[str, ...]
    venue: str | None
    year: int | None
    external_id: str | None
    enrichment_status: EnrichmentStatus


@dataclass(frozen=True)
class ComposedPrompt:
    task: TaskLabel
    text: str
    evidence: EvidenceSet
    budget_chars: int
    dropped_refs: tuple[int, ...] = ()

    @property
    def ungrounded(self) -> bool:
        return self.evidence.m == 0


def load_instruction_templates(directory: str | Path | None = None) -> dict[TaskLabel, str]:
    """Instruction prefixes, one editable data file per task."""
    names = {
        TaskLabel.GENERAL_QA: "general_qa.txt",
        TaskLabel.SIMPLIFICATION: "simplification.txt",
        TaskLabel.SUMMARIZATION: "summarization.txt",
        TaskLabel.KG_FACT: "kg_fact.txt",
    }
    out = {}
    for label, name in names.items():
        if directory is not None:
            text = (Path(directory) / name).read_text(encoding="utf-8")
        else:
            text = (
                resources.files("scholarpipe")
                .joinpath(f"data/instructions/{name}")
                .read_text(encoding="utf-8")
            )
        out[label] = text.strip()
    return out


@dataclass
class Backends:
    """Initialized retrieval components handed to gather_evidence."""

    corpus: Corpus
    index: VectorIndex
    embedder: HashingEmbedder
    chunks: dict[str, Chunk]
    kg_client: KgClient | None = None
    kg_registry: dict[str, SparqlTemplate] | None = None
    retrieval_k: int = 8
    grounding_threshold: float = 0.85
    fulltext_budget_chars: int = DEFAULT_FULLTEXT_BUDGET_CHARS


def _paper_full_text(backends: Backends, paper_id: str) -> str:
    """Abstract plus section texts, truncated at section boundaries."""
    doc = backends.corpus.get(paper_id)
    pieces = []
    if doc.abstract:
        pieces.append(doc.abstract)
    for _path, body in doc.sections:
        if body:
            pieces.append(body)
    budget = backends.fulltext_budget_chars
    kept: list[str] = []
    total = 0
    for piece in pieces:
        if kept and total + len(piece) > budget:
            break
        kept.append(piece)
        total += len(piece) + 2
    return "\n\n".join(kept)


def _render_kg_rows(template: SparqlTemplate, answer) -> tuple[str, list[str]]:
    """Column-aligned rows; returns (header line, one payload per row)."""
    columns = [name for name, _ in template.result_columns]
    cells = []
    for row in answer.bindings:
        cells.append([row[c].render() if c in row else "" for c in columns])
    widths = [
        max(len(col), *(len(r[i]) for r in cells)) if cells else len(col)
        for i, col in enumerate(columns)
    ]
    header = " | ".join(col.ljust(w) for col, w in zip(columns, widths)).rstrip()
    payloads = [
        " | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells
    ]
    return header, payloads


def gather_evidence(
    query: str, decision: RoutingDecision, backends: Backends
) -> EvidenceSet:
    """Dispatch on the routed task; numbering follows retrieval-score order
    for text and row order for KG results."""
    task = decision.label
    try:
        if task is TaskLabel.GENERAL_QA:
            vector = backends.embedder.embed(query)
            hits = backends.index.search(vector, k=backends.retrieval_k)
            items = []
            for hit in hits:
                chunk = backends.chunks.get(hit.chunk_id)
                if chunk is None:
                    raise ComposeError(f"chunk {hit.chunk_id!r} not found in corpus")
                items.append(
                    EvidenceItem(
                        ref_no=len(items) + 1,
                        kind=EvidenceKind.TEXT_CHUNK,
                        payload=chunk.text.strip(),
                        source=SourceRef(
                            paper_id=hit.metadata.paper_id,
                            chunk_id=hit.chunk_id,
                            title=hit.metadata.title,
                            authors=hit.metadata.authors,
                            venue=hit.metadata.venue,
                            section_path=hit.metadata.section_path,
                        ),
                    )
                )
            return EvidenceSet(task=task, items=tuple(items))

        if task in (TaskLabel.SIMPLIFICATION, TaskLabel.SUMMARIZATION):
            result = ground(query, backends.corpus, threshold=backends.grounding_threshold)
            if result.status is GroundingStatus.MATCHED:
                doc = backends.corpus.get(result.paper_id)
                item = EvidenceItem(
                    ref_no=1,
                    kind=EvidenceKind.PAPER_FULL_TEXT,
                    payload=_paper_full_text(backends, result.paper_id),
                    source=SourceRef(
                        paper_id=doc.paper_id,
                        title=doc.title,
                        authors=doc.authors,
                        venue=doc.venue,
                    ),
                )
            else:
                item = EvidenceItem(
                    ref_no=1,
                    kind=EvidenceKind.INLINE_TEXT,
                    payload=result.inline_text,
                    source=SourceRef(),
                )
            return EvidenceSet(task=task, items=(item,))

        # KG-Fact
        if backends.kg_client is None:
            raise ComposeError("no KG endpoint configured")
        template, answer = answer_kg_query(query, backends.kg_client, backends.kg_registry)
        header, payloads = _render_kg_rows(template, answer)
        items = tuple(
            EvidenceItem(
                ref_no=i + 1,
                kind=EvidenceKind.KG_ROW,
                payload=payload,
                source=SourceRef(
                    template_id=template.template_id,
                    endpoint=answer.endpoint,
                    row_index=i,
                ),
            )
            for i, payload in enumerate(payloads)
        )
        return EvidenceSet(task=task, items=items, header=header if items else None)
    except ComposeError:
        raise
    except Exception as exc:
        raise EvidenceError(task, exc) from exc


def _render_item(item: EvidenceItem) -> str:
    if item.kind in (EvidenceKind.TEXT_CHUNK, EvidenceKind.PAPER_FULL_TEXT):
        return f"[{item.ref_no}] {item.payload} (source: {item.source.title})"
    return f"[{item.ref_no}] {item.payload}"


def _render(instruction: str, evidence: EvidenceSet, query: str) -> str:
    if not evidence.items:
        return f"{instruction}\n\n{query}"
    lines = []
    if evidence.header:
        pad = " " * (len(f"[{evidence.items[0].ref_no}] "))
        lines.append(pad + evidence.header)
    lines.extend(_render_item(item) for item in evidence.items)
    block = "\n".join(lines)
    return f"{instruction}\n\n{block}\n\n{query}"


def compose_prompt(
    query: str,
    evidence: EvidenceSet,
    templates: dict[TaskLabel, str] | None = None,
    budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> ComposedPrompt:
    """Instruction-prefix, numbered evidence, query — in that order. Budget
    overruns drop whole items from the highest ref number down."""
    templates = templates if templates is not None else load_instruction_templates()
    instruction = templates[evidence.task]
    if len(f"{instruction}\n\n{query}") > budget_chars:
        raise PromptBudgetError(
            f"budget too small: instruction plus query need "
            f"{len(instruction) + len(query) + 2} chars, budget is {budget_chars}"
        )
    kept = evidence
    dropped: list[int] = []
    while True:
        text = _render(instruction, kept, query)
        if len(text) <= budget_chars or not kept.items:
            break
        dropped.append(kept.items[-1].ref_no)
        kept = replace(kept, items=kept.items[:-1], header=kept.header if len(kept.items) > 1 else None)
    return ComposedPrompt(
        task=evidence.task,
        text=text,
        evidence=kept,
        budget_chars=budget_chars,
        dropped_refs=tuple(sorted(dropped)),
    )


class BiblioClient:
    """Title-search client for a scholarly-metadata HTTP API."""

    def __init__(
        self,
        url: str,
        token: str | None = None,
        timeout_ms: int = 5_000,
        transport: httpx.BaseTransport | None = None,
    ):
        self._base = url.rstrip("/")
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(
            timeout=timeout_ms / 1000.0, headers=headers, transport=transport
        )

    def search_title(self, title: str) -> dict | None:
        resp = self._client.get(f"{self._base}/search?title={urllib.parse.quote(title)}")
        resp.raise_for_status()
        matches = resp.json().get("matches", [])
        if not matches:
            return None
        for match in matches:
            if normalize_title(match.get("title", "")) == normalize_title(title):
                return match
        return matches[0]

    def close(self) -> None:
        self._client.close()


def enrich_bibliography(
    evidence: EvidenceSet,
    corpus: Corpus | None = None,
    client: BiblioClient | None = None,
) -> tuple[BibEntry, ...]:
    """One entry per distinct paper among textual evidence, ordered by first
    reference number. Lookups are best-effort: failures keep local metadata."""
    papers: dict[str, dict] = {}
    for item in evidence.items:
        if item.kind not in (EvidenceKind.TEXT_CHUNK, EvidenceKind.PAPER_FULL_TEXT):
            continue
        pid = item.source.paper_id
        if pid not in papers:
            papers[pid] = {"ref_nos": [], "source": item.source}
        papers[pid]["ref_nos"].append(item.ref_no)

    entries: list[BibEntry] = []
    for pid, info in papers.items():
        source: SourceRef = info["source"]
        title = source.title or pid
        authors = source.authors
        venue, year = source.venue, None
        doc = corpus.get(pid) if corpus is not None else None
        if doc is not None:
            title, authors, venue, year = doc.title, doc.authors, doc.venue, doc.year
        external_id = None
        status = EnrichmentStatus.LOCAL
        if client is not None:
            try:
                match = client.search_title(title)
            except httpx.HTTPError:
                status = EnrichmentStatus.FAILED
            else:
                if match is None:
                    status = EnrichmentStatus.FAILED
                else:
                    status = EnrichmentStatus.ENRICHED
                    external_id = match.get("doi") or match.get("id")
                    venue = venue or match.get("venue")
                    year = year if year is not None else match.get("year")
        entries.append(
            BibEntry(
                ref_nos=tuple(sorted(info["ref_nos"])),
                paper_id=pid,
                title=title,
                authors=tuple(authors),
                venue=venue,
                year=year,
                external_id=external_id,
                enrichment_status=status,
            )
        )
    entries.sort(key=lambda e: e.ref_nos[0])
    return tuple(entries)
