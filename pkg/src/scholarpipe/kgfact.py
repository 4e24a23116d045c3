"""Knowledge-graph fact retrieval: map metadata queries onto one of 18
predefined SPARQL templates, execute against a scholarly endpoint, and return
typed rows."""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

from .router import _collapse_hyphens

DEFAULT_ENDPOINT = "https://semopenalex.org/sparql"
DEFAULT_TIMEOUT_S = 15.0
DEFAULT_ROW_CAP = 200
EXPECTED_TEMPLATE_COUNT = 18

_ORCID_LITERAL_RE = re.compile(r"\b(\d{4}-\d{4}-\d{4}-\d{3}[0-9X])\b")
_DOI_LITERAL_RE = re.compile(r"\b(10\.\d{4,9}/[^\s\"'<>]+)")
_YEAR_RE = re.compile(r"\b((?:19|20)\d{2})\b")
_NAME_AFTER_CUE_RE = re.compile(
    r"\b(?:of|by|for|about|does|has|did|is|are)\s+"
    r"((?:[A-Z][\w'.-]*)(?:\s+[A-Z][\w'.-]*){0,3})"
)
_POSSESSIVE_NAME_RE = re.compile(r"\b((?:[A-Z][\w'.-]*\s+){0,3}[A-Z][\w'.-]*)'s\b")
_QUOTED_RE = re.compile(r"\"[^\"\n]+\"|“[^”\n]+”|'[^'\n]+'")

_NAME_STOPWORDS = {
    "the", "a", "an", "what", "which", "who", "whom", "how", "when", "where",
    "why", "is", "are", "was", "were", "does", "did", "do", "doi", "orcid",
    "i", "me", "my", "this", "that", "these", "paper", "papers", "work",
    "works", "author", "authors", "hindex", "i10index",
}

_IDENTIFIER_KINDS = ("h-index", "i10-index", "orcid", "doi")

# Characters with a defined SPARQL string escape; all other C0 controls are
# rejected rather than smuggled into the query.
_SPARQL_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


class KgError(Exception):
    pass


class UnsupportedKgQueryError(KgError):
    def __init__(self, query: str, catalog: tuple[str, ...]):
        self.catalog = catalog
        super().__init__(
            f"unsupported KG query {query!r}; supported templates: {', '.join(catalog)}"
        )


class MissingSlotError(KgError):
    def __init__(self, slot: str, template_id: str):
        self.slot = slot
        super().__init__(f"missing slot {slot!r} for template {template_id!r}")


class SlotValueError(KgError):
    pass


class KgTransportError(KgError):
    pass


class KgHttpError(KgError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"SPARQL endpoint returned HTTP {status} {detail}".rstrip())


class KgTimeoutError(KgError):
    pass


class KgResultFormatError(KgError):
    pass


@dataclass(frozen=True)
class SparqlTemplate:
    template_id: str
    category: str
    description: str
    required_slots: tuple[str, ...]
    slot_types: dict[str, str]
    result_columns: tuple[tuple[str, str], ...]
    keywords: tuple[re.Pattern, ...]
    needs: str | None
    body: str

    def __post_init__(self) -> None:
        placeholders = set(re.findall(r"\{\{(\w+)\}\}", self.body))
        if placeholders != set(self.required_slots):
            raise ValueError(
                f"template {self.template_id}: placeholders {placeholders} != "
                f"required slots {set(self.required_slots)}"
            )


@dataclass(frozen=True)
class KgValue:
    kind: str  # string | integer | iri | date
    value: object

    def render(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class KgAnswer:
    template_id: str
    bindings: tuple[dict, ...]
    endpoint: str
    elapsed_ms: int


@dataclass(frozen=True)
class EntitySet:
    author_names: tuple[str, ...] = ()
    work_titles: tuple[str, ...] = ()
    identifiers: dict = field(default_factory=dict)
    years: tuple[str, ...] = ()


def load_templates(directory: str | Path | None = None) -> dict[str, SparqlTemplate]:
    """Template catalog, one data file per template; id-sorted (the fixed
    tie-break order for selection)."""
    if directory is None:
        root = resources.files("scholarpipe").joinpath("data/kg_templates")
        files = sorted(root.iterdir(), key=lambda p: p.name)
    else:
        files = sorted(Path(directory).glob("*.json"))
    registry: dict[str, SparqlTemplate] = {}
    for file in files:
        raw = json.loads(file.read_text(encoding="utf-8"))
        template = SparqlTemplate(
            template_id=raw["template_id"],
            category=raw["category"],
            description=raw["description"],
            required_slots=tuple(raw["required_slots"]),
            slot_types=dict(raw["slot_types"]),
            result_columns=tuple((c[0], c[1]) for c in raw["result_columns"]),
            keywords=tuple(re.compile(k) for k in raw["keywords"]),
            needs=raw.get("needs"),
            body=raw["body"],
        )
        if template.template_id in registry:
            raise ValueError(f"duplicate template id {template.template_id}")
        registry[template.template_id] = template
    if len(registry) != EXPECTED_TEMPLATE_COUNT:
        raise ValueError(f"expected {EXPECTED_TEMPLATE_COUNT} templates, found {len(registry)}")
    return registry


def _mask_quoted(query: str) -> str:
    return _QUOTED_RE.sub(lambda m: " " * len(m.group(0)), query)


def extract_entities(query: str) -> EntitySet:
    """Names from a capitalized-run pattern tier, titles from quote/cue spans,
    identifier literals validated by syntax."""
    if not query.strip():
        raise ValueError("query must be non-empty")

    from .grounding import detect_title  # local import: grounding has no kg dependency

    titles = tuple(
        c.surface
        for c in detect_title(query)
        if c.source.value in ("quoted_span", "pattern_match")
    )

    masked = _mask_quoted(query)
    names: list[str] = []
    for pattern in (_NAME_AFTER_CUE_RE, _POSSESSIVE_NAME_RE):
        for m in pattern.finditer(masked):
            words = [w for w in m.group(1).split() if w.lower().strip(".,?!") not in _NAME_STOPWORDS]
            while words and words[0].lower() in _NAME_STOPWORDS:
                words = words[1:]
            if words:
                name = " ".join(w.strip(".,?!") for w in words)
                if name and name not in names:
                    names.append(name)

    identifiers: dict = {}
    collapsed = _collapse_hyphens(query)
    for kind in _IDENTIFIER_KINDS:
        if re.search(rf"\b{re.escape(_collapse_hyphens(kind))}\b", collapsed):
            identifiers[kind] = None
    m = _ORCID_LITERAL_RE.search(query)
    if m:
        identifiers["orcid"] = m.group(1)
    m = _DOI_LITERAL_RE.search(query)
    if m:
        identifiers["doi"] = m.group(1).rstrip(".,;)")

    return EntitySet(
        author_names=tuple(names),
        work_titles=titles,
        identifiers=identifiers,
        years=tuple(_YEAR_RE.findall(query)),
    )


def select_template(
    query: str, entities: EntitySet, registry: dict[str, SparqlTemplate]
) -> SparqlTemplate:
    """Deterministic scorer: 2 points per keyword hit, +1 when the template's
    needed entity kind is present; ties break on ascending template_id; zero
    everywhere is an unsupported query."""
    lowered = query.lower()
    best: tuple[float, str] | None = None
    for template_id in sorted(registry):
        template = registry[template_id]
        hits = sum(1 for pattern in template.keywords if pattern.search(lowered))
        if hits == 0:
            continue
        score = 2.0 * hits
        if template.needs == "author" and entities.author_names:
            score += 1.0
        elif template.needs == "work" and entities.work_titles:
            score += 1.0
        if best is None or score > best[0]:
            best = (score, template_id)
    if best is None:
        raise UnsupportedKgQueryError(query, tuple(sorted(registry)))
    return registry[best[1]]


def escape_literal(value: str) -> str:
    out = []
    for ch in value:
        if ch in _SPARQL_ESCAPES:
            out.append(_SPARQL_ESCAPES[ch])
        elif ord(ch) < 0x20:
            raise SlotValueError(f"slot value contains unescapable control character {ch!r}")
        else:
            out.append(ch)
    return "".join(out)


def build_query(template: SparqlTemplate, slots: dict[str, str]) -> str:
    """Substitute {{slot}} placeholders with escaped values; byte-stable."""
    rendered = template.body
    for slot in template.required_slots:
        value = slots.get(slot)
        if value is None or not str(value).strip():
            raise MissingSlotError(slot, template.template_id)
        value = str(value)
        if template.slot_types.get(slot) == "integer":
            if not re.fullmatch(r"\d{1,6}", value):
                raise SlotValueError(f"slot {slot!r} must be an integer, got {value!r}")
            substituted = value
        else:
            substituted = escape_literal(value)
        rendered = rendered.replace("{{" + slot + "}}", substituted)
    return rendered


def fill_slots(template: SparqlTemplate, entities: EntitySet) -> dict[str, str]:
    slots: dict[str, str] = {}
    for slot in template.required_slots:
        if slot == "name" and entities.author_names:
            slots[slot] = entities.author_names[0]
        elif slot == "title" and entities.work_titles:
            slots[slot] = entities.work_titles[0]
        elif slot == "year" and entities.years:
            slots[slot] = entities.years[0]
        elif slot in ("doi", "orcid") and entities.identifiers.get(slot):
            slots[slot] = entities.identifiers[slot]
    return slots


def _type_binding(binding: dict) -> KgValue:
    btype = binding.get("type")
    value = binding.get("value", "")
    if btype == "uri":
        return KgValue(kind="iri", value=value)
    datatype = binding.get("datatype", "")
    if datatype.endswith(("#integer", "#int", "#long", "#short", "#nonNegativeInteger")):
        try:
            return KgValue(kind="integer", value=int(value))
        except ValueError:
            return KgValue(kind="string", value=value)
    if datatype.endswith(("#date", "#dateTime", "#gYear")):
        return KgValue(kind="date", value=value)
    return KgValue(kind="string", value=value)


class KgClient:
    """SPARQL-protocol client with bounded timeout and row cap."""

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        row_cap: int = DEFAULT_ROW_CAP,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.row_cap = row_cap
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def execute(self, query_string: str, template_id: str = "adhoc") -> KgAnswer:
        started = time.monotonic()
        try:
            resp = self._client.post(
                self.endpoint,
                data={"query": query_string},
                headers={"Accept": "application/sparql-results+json"},
            )
        except httpx.TimeoutException as exc:
            raise KgTimeoutError(f"SPARQL request timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise KgTransportError(f"SPARQL transport failure: {exc}") from exc
        if resp.status_code >= 400:
            raise KgHttpError(resp.status_code, resp.text[:200])
        try:
            payload = resp.json()
            raw_rows = payload["results"]["bindings"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise KgResultFormatError(f"malformed SPARQL result document: {exc}") from exc
        rows = []
        for raw in raw_rows[: self.row_cap]:
            if not isinstance(raw, dict):
                raise KgResultFormatError("malformed binding row")
            rows.append({var: _type_binding(binding) for var, binding in raw.items()})
        elapsed_ms = int((time.monotonic() - started) * 1000)
        return KgAnswer(
            template_id=template_id,
            bindings=tuple(rows),
            endpoint=self.endpoint,
            elapsed_ms=elapsed_ms,
        )

    def close(self) -> None:
        self._client.close()


def answer_kg_query(
    query: str, client: KgClient, registry: dict[str, SparqlTemplate] | None = None
) -> tuple[SparqlTemplate, KgAnswer]:
    """Full KG pathway: extract entities, select a template, build, execute."""
    registry = registry if registry is not None else load_templates()
    entities = extract_entities(query)
    template = select_template(query, entities, registry)
    sparql = build_query(template, fill_slots(template, entities))
    answer = client.execute(sparql, template_id=template.template_id)
    allowed = {name for name, _ in template.result_columns}
    for row in answer.bindings:
        extra = set(row) - allowed
        if extra:
            raise KgResultFormatError(
                f"result columns {extra} not declared by template {template.template_id}"
            )
    return template, answer
