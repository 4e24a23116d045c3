"""Paper ingestion: parse metadata-fronted plain-text documents, segment into
sections, and cut minimum-length chunks with full provenance."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

DEFAULT_MIN_CHARS = 800

_KNOWN_KEYS = ("title", "authors", "venue", "year", "abstract", "paper_id")
_REQUIRED_KEYS = ("title", "authors")

_HEADING_RE = re.compile(r"^(#{1,2}) (.+)$")
_FENCE_RE = re.compile(r"^```")
_IMAGE_RE = re.compile(r"^!\[")
# Blank-line runs separate paragraphs; the separator stays attached to the
# preceding paragraph so concatenation is lossless.
_PARA_SEP_RE = re.compile(r"(\n[ \t]*\n[ \t]*(?:\n[ \t]*)*)")
_SENT_SEP_RE = re.compile(r"((?<=[.!?])[ \t\n]+)")


class CorpusError(Exception):
    """Base error for corpus parsing and loading."""


class ParseError(CorpusError):
    """Raised when a document does not conform to the corpus grammar."""


class DuplicatePaperError(CorpusError):
    """Raised when two documents share a paper_id."""


@dataclass(frozen=True)
class PaperDocument:
    paper_id: str
    title: str
    authors: tuple[str, ...]
    venue: str | None = None
    year: int | None = None
    abstract: str | None = None
    sections: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not self.paper_id:
            raise ValueError("paper_id must be non-empty")
        if not self.title:
            raise ValueError("title must be non-empty")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    paper_id: str
    section_path: str
    char_span: tuple[int, int]
    text: str

    @property
    def char_len(self) -> int:
        return len(self.text)


def default_paper_id(title: str) -> str:
    return hashlib.sha1(title.strip().lower().encode("utf-8")).hexdigest()[:12]


def _strip_body(body: str) -> str:
    """Drop fenced blocks and image lines; keep everything else verbatim."""
    out: list[str] = []
    in_fence = False
    for line in body.split("\n"):
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            continue
        if in_fence:
            continue
        if _IMAGE_RE.match(line):
            continue
        out.append(line)
    return "\n".join(out)


def parse_paper(raw: str, source: str = "<memory>") -> PaperDocument:
    """Parse one corpus document (front-matter block + headed body).

    Raises ParseError naming the offending field or construct.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines = text.split("\n")
    if not lines or lines[0].strip() != "---":
        raise ParseError(f"{source}: missing front-matter delimiter '---'")

    meta: dict[str, str] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.strip() == "---":
            break
        if line.strip():
            if ":" not in line:
                raise ParseError(f"{source}: malformed front-matter line {line!r}")
            key, _, value = line.partition(":")
            key = key.strip()
            if key not in _KNOWN_KEYS:
                raise ParseError(f"{source}: unknown front-matter key {key!r}")
            if key in meta:
                raise ParseError(f"{source}: duplicate front-matter key {key!r}")
            meta[key] = value.strip()
        i += 1
    else:
        raise ParseError(f"{source}: unterminated front matter")

    for key in _REQUIRED_KEYS:
        if not meta.get(key):
            raise ParseError(f"{source}: missing {key}")

    year: int | None = None
    if meta.get("year"):
        try:
            year = int(meta["year"])
        except ValueError:
            raise ParseError(f"{source}: year is not an integer: {meta['year']!r}") from None

    body = _strip_body("\n".join(lines[i + 1 :]))
    if not body.strip():
        raise ParseError(f"{source}: empty body")

    sections: list[tuple[str, str]] = []
    current_top: str | None = None
    path: str | None = None
    buf: list[str] = []

    def flush() -> None:
        if path is not None:
            sections.append((path, "\n".join(buf).strip("\n").strip()))

    for line in body.split("\n"):
        m = _HEADING_RE.match(line)
        if m:
            flush()
            level, heading = len(m.group(1)), m.group(2).strip()
            if level == 1:
                current_top = heading
                path = heading
            else:
                path = f"{current_top}/{heading}" if current_top else heading
            buf = []
        else:
            if path is None and line.strip():
                raise ParseError(f"{source}: body must start with a heading")
            buf.append(line)
    flush()

    title = meta["title"]
    return PaperDocument(
        paper_id=meta.get("paper_id") or default_paper_id(title),
        title=title,
        authors=tuple(a.strip() for a in meta["authors"].split(";") if a.strip()),
        venue=meta.get("venue") or None,
        year=year,
        abstract=meta.get("abstract") or None,
        sections=tuple(sections),
    )


def serialize_paper(doc: PaperDocument) -> str:
    """Inverse of parse_paper for round-tripping documents to disk."""
    out = ["---", f"title: {doc.title}", f"authors: {'; '.join(doc.authors)}"]
    if doc.venue:
        out.append(f"venue: {doc.venue}")
    if doc.year is not None:
        out.append(f"year: {doc.year}")
    if doc.abstract:
        out.append(f"abstract: {doc.abstract}")
    out.append(f"paper_id: {doc.paper_id}")
    out.append("---")
    out.append("")
    prev_top: str | None = None
    for path, body in doc.sections:
        if "/" in path and prev_top and path.startswith(prev_top + "/"):
            out.append(f"## {path.split('/', 1)[1]}")
        else:
            out.append(f"# {path}")
            prev_top = path
        out.append("")
        if body:
            out.append(body)
            out.append("")
    return "\n".join(out)


def _paragraph_units(body: str) -> list[str]:
    """Split at blank-line boundaries, separators attached left; lossless."""
    parts = _PARA_SEP_RE.split(body)
    units = []
    for j in range(0, len(parts), 2):
        para = parts[j]
        sep = parts[j + 1] if j + 1 < len(parts) else ""
        if para or sep:
            units.append(para + sep)
    return units


def _sentence_atoms(unit: str) -> list[str]:
    parts = _SENT_SEP_RE.split(unit)
    atoms = []
    for j in range(0, len(parts), 2):
        sent = parts[j]
        sep = parts[j + 1] if j + 1 < len(parts) else ""
        if sent or sep:
            atoms.append(sent + sep)
    return atoms


def chunk_document(doc: PaperDocument, min_chars: int = DEFAULT_MIN_CHARS) -> list[Chunk]:
    """Greedy paragraph accumulation per section: emit once the buffer reaches
    min_chars; a trailing short buffer is emitted as-is (remainder rule).
    Paragraphs longer than 2x min_chars are pre-split at sentence boundaries.
    """
    if min_chars < 1:
        raise ValueError("min_chars must be >= 1")
    chunks: list[Chunk] = []
    for si, (path, body) in enumerate(doc.sections):
        if not body:
            continue
        atoms: list[str] = []
        for unit in _paragraph_units(body):
            if len(unit) > 2 * min_chars:
                atoms.extend(_sentence_atoms(unit))
            else:
                atoms.append(unit)
        pos = 0
        ci = 0
        buf = ""
        for atom in atoms:
            buf += atom
            if len(buf) >= min_chars:
                chunks.append(_make_chunk(doc.paper_id, si, ci, path, pos, buf))
                pos += len(buf)
                ci += 1
                buf = ""
        if buf:
            chunks.append(_make_chunk(doc.paper_id, si, ci, path, pos, buf))
    return chunks


def _make_chunk(paper_id: str, si: int, ci: int, path: str, start: int, text: str) -> Chunk:
    return Chunk(
        chunk_id=f"{paper_id}:{si:03d}:{ci:03d}",
        paper_id=paper_id,
        section_path=path,
        char_span=(start, start + len(text)),
        text=text,
    )


@dataclass(frozen=True)
class IngestWarning:
    source: str
    message: str


@dataclass
class Corpus:
    documents: tuple[PaperDocument, ...]
    warnings: tuple[IngestWarning, ...] = ()
    _by_id: dict[str, PaperDocument] = field(init=False, repr=False)
    _title_index: dict[str, str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        by_id: dict[str, PaperDocument] = {}
        for doc in self.documents:
            if doc.paper_id in by_id:
                raise DuplicatePaperError(f"duplicate paper_id {doc.paper_id!r}")
            by_id[doc.paper_id] = doc
        self._by_id = by_id
        self._title_index = {normalize_title(d.title): d.paper_id for d in self.documents}

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[PaperDocument]:
        return iter(self.documents)

    def get(self, paper_id: str) -> PaperDocument | None:
        return self._by_id.get(paper_id)

    def titles(self) -> list[tuple[str, str]]:
        """(title, paper_id) pairs, corpus order."""
        return [(d.title, d.paper_id) for d in self.documents]

    def lookup_title(self, title: str) -> str | None:
        return self._title_index.get(normalize_title(title))


def normalize_title(title: str) -> str:
    return " ".join(re.findall(r"[a-z0-9]+", title.lower()))


def load_corpus(path: str | Path, strict: bool = True) -> Corpus:
    """Load every *.md / *.txt document under path (sorted by filename).

    strict: a malformed file aborts the load; lenient: it becomes a warning.
    """
    root = Path(path)
    if not root.exists():
        raise CorpusError(f"corpus path does not exist: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix in (".md", ".txt") and p.is_file())
    docs: list[PaperDocument] = []
    warnings: list[IngestWarning] = []
    for file in files:
        try:
            docs.append(parse_paper(file.read_text(encoding="utf-8"), source=file.name))
        except ParseError as exc:
            if strict:
                raise
            warnings.append(IngestWarning(source=file.name, message=str(exc)))
    if not docs:
        raise CorpusError(f"no parsable documents under {root}")
    return Corpus(documents=tuple(docs), warnings=tuple(warnings))
