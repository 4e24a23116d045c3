"""Paper grounding for simplification/summarization queries: detect a
candidate title, fuzzy-match it against corpus titles, or fall back to
treating the query's inline text as the object."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .corpus import Corpus

DEFAULT_THRESHOLD = 0.85
MIN_GAZETTEER_TOKENS = 2

_WORD_RE = re.compile(r"[a-z0-9]+")

_QUOTE_PATTERNS = [
    re.compile(r'"([^"\n]+)"'),
    re.compile(r"“([^”\n]+)”"),
    re.compile(r"(?:(?<=\s)|^)'([^'\n]+)'(?=[\s.,;:!?)]|$)"),
]

_CUE_PATTERNS = [
    re.compile(r"\bthe (?:paper|article|publication|work)(?: titled| called| named)? (.+)$", re.IGNORECASE),
    re.compile(r"\b(?:summari[sz]e|simplify|explain|overview of) (.+)$", re.IGNORECASE),
]

_TRAILING_NOISE_RE = re.compile(r"(?:[\s,]*\bplease\b)?[\s.!?,;:]*$", re.IGNORECASE)

_INSTRUCTION_PREFIX_RES = [
    re.compile(
        r"^\s*(?:please\s+)?(?:can you\s+|could you\s+)?"
        r"(?:summari[sz]e|simplify|explain|rewrite|reword|rephrase|condense|shorten)\b"
        r"[^:]{0,40}:\s*",
        re.IGNORECASE,
    ),
    re.compile(
        r"^\s*(?:please\s+)?(?:can you\s+|could you\s+)?"
        r"(?:summari[sz]e|simplify|rewrite|reword|rephrase|condense|shorten)\s+"
        r"(?:this|the following|that)?\s*(?:text|sentence|paragraph|passage|abstract)?\s*",
        re.IGNORECASE,
    ),
]


class TitleSource(str, Enum):
    QUOTED_SPAN = "quoted_span"
    PATTERN_MATCH = "pattern_match"
    GAZETTEER_MATCH = "gazetteer_match"


class GroundingStatus(str, Enum):
    MATCHED = "matched"
    NO_MATCH = "no_match"


@dataclass(frozen=True)
class TitleCandidate:
    surface: str
    span: tuple[int, int]
    source: TitleSource


@dataclass(frozen=True)
class GroundingResult:
    status: GroundingStatus
    paper_id: str | None = None
    similarity: float | None = None
    inline_text: str | None = None
    candidate: TitleCandidate | None = None

    def __post_init__(self) -> None:
        if self.status is GroundingStatus.MATCHED and not self.paper_id:
            raise ValueError("matched result requires a paper_id")
        if self.status is GroundingStatus.NO_MATCH and self.inline_text is None:
            raise ValueError("no-match result requires inline_text")


def _normalize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def title_similarity(a: str, b: str) -> float:
    """Token-set ratio: Dice coefficient over token sets blended 50/50 with a
    normalized edit-distance ratio on the sorted-unique-token join. 1.0 iff
    the normalized token sets are equal; symmetric by construction."""
    tokens_a, tokens_b = set(_normalize(a)), set(_normalize(b))
    if not tokens_a and not tokens_b:
        return 1.0
    if not tokens_a or not tokens_b:
        return 0.0
    dice = 2 * len(tokens_a & tokens_b) / (len(tokens_a) + len(tokens_b))
    key_a, key_b = " ".join(sorted(tokens_a)), " ".join(sorted(tokens_b))
    edit = 1.0 - _levenshtein(key_a, key_b) / max(len(key_a), len(key_b))
    return 0.5 * dice + 0.5 * edit


def _levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        row = [i]
        for j, cb in enumerate(b, start=1):
            row.append(min(prev[j] + 1, row[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = row
    return prev[-1]


def _trim_candidate(query: str, start: int, end: int) -> tuple[int, int]:
    segment = query[start:end]
    m = _TRAILING_NOISE_RE.search(segment)
    if m:
        end = start + m.start()
    while start < end and query[start] in " \t'\"":
        start += 1
    return start, end


def detect_title(query: str, corpus: Corpus | None = None) -> list[TitleCandidate]:
    """Candidates in priority order: quoted spans, cue-phrase patterns,
    longest gazetteer n-gram hits against corpus titles."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    tiers: dict[TitleSource, list[TitleCandidate]] = {src: [] for src in TitleSource}
    seen: set[str] = set()

    def push(source: TitleSource, start: int, end: int) -> None:
        start, end = _trim_candidate(query, start, end)
        surface = query[start:end]
        key = " ".join(_normalize(surface))
        if not key or key in seen:
            return
        seen.add(key)
        tiers[source].append(TitleCandidate(surface=surface, span=(start, end), source=source))

    for pattern in _QUOTE_PATTERNS:
        for m in pattern.finditer(query):
            push(TitleSource.QUOTED_SPAN, m.start(1), m.end(1))
    for pattern in _CUE_PATTERNS:
        m = pattern.search(query)
        if m:
            push(TitleSource.PATTERN_MATCH, m.start(1), m.end(1))
    if corpus is not None:
        spans = [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(query.lower())]
        query_tokens = [s[0] for s in spans]
        for title, _pid in corpus.titles():
            title_tokens = _normalize(title)
            if len(title_tokens) < MIN_GAZETTEER_TOKENS or len(title_tokens) > len(query_tokens):
                continue
            for i in range(len(query_tokens) - len(title_tokens) + 1):
                if query_tokens[i : i + len(title_tokens)] == title_tokens:
                    push(TitleSource.GAZETTEER_MATCH, spans[i][1], spans[i + len(title_tokens) - 1][2])
                    break

    out: list[TitleCandidate] = []
    for source in TitleSource:
        out.extend(sorted(tiers[source], key=lambda c: -len(c.surface)))
    return out


def fuzzy_match(
    candidate: str, corpus: Corpus, threshold: float = DEFAULT_THRESHOLD
) -> tuple[str, float] | None:
    """Best-scoring corpus title at or above threshold; ties break on
    ascending paper_id."""
    best: tuple[float, str] | None = None
    for title, paper_id in corpus.titles():
        sim = title_similarity(candidate, title)
        if best is None or sim > best[0] or (sim == best[0] and paper_id < best[1]):
            best = (sim, paper_id)
    if best is None or best[0] < threshold:
        return None
    return best[1], best[0]


def strip_instruction_prefix(query: str) -> str:
    for pattern in _INSTRUCTION_PREFIX_RES:
        m = pattern.match(query)
        if m and m.end() < len(query):
            return query[m.end() :].strip() or query.strip()
    return query.strip()


def ground(
    query: str, corpus: Corpus, threshold: float = DEFAULT_THRESHOLD
) -> GroundingResult:
    """First candidate that fuzzy-matches wins; otherwise fall back to the
    query's own text minus the instruction prefix."""
    for candidate in detect_title(query, corpus):
        matched = fuzzy_match(candidate.surface, corpus, threshold=threshold)
        if matched is not None:
            paper_id, sim = matched
            return GroundingResult(
                status=GroundingStatus.MATCHED,
                paper_id=paper_id,
                similarity=sim,
                candidate=candidate,
            )
    return GroundingResult(
        status=GroundingStatus.NO_MATCH,
        inline_text=strip_instruction_prefix(query),
    )
