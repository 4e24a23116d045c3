"""Corpus parsing and chunking tests."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scholarpipe.corpus import (
    CorpusError,
    DuplicatePaperError,
    PaperDocument,
    ParseError,
    chunk_document,
    load_corpus,
    normalize_title,
    parse_paper,
    serialize_paper,
)

GOLDEN_DOC = """---
title: Sparse Attention for Long Documents
authors: Ana Ruiz; Ben Okafor
venue: TestConf
year: 2023
abstract: We study sparse attention.
paper_id: sparse-attn
---

# Introduction

Attention cost grows quadratically with sequence length.

We propose a sparse pattern.

# Method

Our method keeps a sliding window.

# Results

It works well on long inputs.
"""


def test_parse_golden_doc():
    doc = parse_paper(GOLDEN_DOC)
    assert doc.paper_id == "sparse-attn"
    assert doc.title == "Sparse Attention for Long Documents"
    assert doc.authors == ("Ana Ruiz", "Ben Okafor")
    assert doc.venue == "TestConf"
    assert doc.year == 2023
    assert doc.abstract == "We study sparse attention."
    assert len(doc.sections) == 3
    assert doc.sections[0][0] == "Introduction"
    assert "sparse pattern" in doc.sections[0][1]


def test_parse_missing_title():
    raw = "---\nauthors: A\n---\n\n# S\n\nBody.\n"
    with pytest.raises(ParseError, match="missing title"):
        parse_paper(raw)


def test_parse_missing_authors():
    raw = "---\ntitle: T\n---\n\n# S\n\nBody.\n"
    with pytest.raises(ParseError, match="missing authors"):
        parse_paper(raw)


def test_parse_strips_fenced_table():
    raw = (
        "---\ntitle: T\nauthors: A\n---\n\n# Data\n\nBefore table.\n\n"
        "```\ncol_a | col_b\n1 | 2\n```\n\nAfter table.\n"
    )
    doc = parse_paper(raw)
    body = doc.sections[0][1]
    assert "col_a" not in body
    assert "Before table." in body and "After table." in body


def test_parse_strips_image_lines():
    raw = "---\ntitle: T\nauthors: A\n---\n\n# Figures\n\nText.\n![fig](img.png)\nMore text.\n"
    doc = parse_paper(raw)
    assert "![fig]" not in doc.sections[0][1]
    assert "More text." in doc.sections[0][1]


def test_parse_subsection_paths():
    raw = "---\ntitle: T\nauthors: A\n---\n\n# Main\n\nTop.\n\n## Sub\n\nNested.\n"
    doc = parse_paper(raw)
    assert [s[0] for s in doc.sections] == ["Main", "Main/Sub"]


def test_parse_empty_body():
    with pytest.raises(ParseError, match="empty body"):
        parse_paper("---\ntitle: T\nauthors: A\n---\n\n")


def test_parse_body_before_heading():
    with pytest.raises(ParseError, match="must start with a heading"):
        parse_paper("---\ntitle: T\nauthors: A\n---\n\nloose text\n\n# S\n\nBody.\n")


def test_parse_unknown_key():
    with pytest.raises(ParseError, match="unknown front-matter key"):
        parse_paper("---\ntitle: T\nauthors: A\nbogus: x\n---\n\n# S\n\nB.\n")


def test_parse_crlf_normalized():
    raw = GOLDEN_DOC.replace("\n", "\r\n")
    assert parse_paper(raw) == parse_paper(GOLDEN_DOC)


def test_default_paper_id_is_title_hash():
    raw = "---\ntitle: Some Title\nauthors: A\n---\n\n# S\n\nBody.\n"
    a, b = parse_paper(raw), parse_paper(raw)
    assert a.paper_id == b.paper_id
    assert len(a.paper_id) == 12


def test_roundtrip_golden():
    doc = parse_paper(GOLDEN_DOC)
    assert parse_paper(serialize_paper(doc)) == doc


def _doc_with_sections(sections: list[tuple[str, str]]) -> PaperDocument:
    return PaperDocument(
        paper_id="p1", title="T", authors=("A",), sections=tuple(sections)
    )


def test_chunk_exact_min_chars_single_chunk():
    body = "a" * 800
    chunks = chunk_document(_doc_with_sections([("S", body)]), min_chars=800)
    assert len(chunks) == 1
    assert chunks[0].char_len == 800


def test_chunk_empty_section():
    chunks = chunk_document(_doc_with_sections([("S", "")]), min_chars=800)
    assert chunks == []


def test_chunk_greedy_trace_800_800_400():
    # Five 400-char paragraph units (text + separator); hand-traced greedy
    # accumulation at min_chars=800 gives [800, 800, 400].
    para = "x" * 398
    body = ("\n\n".join([para] * 4)) + "\n\n" + "y" * 400
    assert len(body) == 2000
    chunks = chunk_document(_doc_with_sections([("S", body)]), min_chars=800)
    assert [c.char_len for c in chunks] == [800, 800, 400]
    assert "".join(c.text for c in chunks) == body


def test_chunk_oversized_paragraph_sentence_split():
    sent = "This sentence has a fixed length of fifty chars!! "
    body = (sent * 40).rstrip()  # one paragraph of ~2000 chars, > 2*min
    chunks = chunk_document(_doc_with_sections([("S", body)]), min_chars=300)
    assert len(chunks) > 1
    assert all(c.char_len >= 300 for c in chunks[:-1])
    assert "".join(c.text for c in chunks) == body


def test_chunk_provenance_fields():
    body = "p1 text.\n\np2 text."
    chunks = chunk_document(_doc_with_sections([("Intro", body)]), min_chars=5)
    assert all(c.paper_id == "p1" for c in chunks)
    assert all(c.section_path == "Intro" for c in chunks)
    for c in chunks:
        start, end = c.char_span
        assert body[start:end] == c.text


def test_chunk_min_chars_validation():
    with pytest.raises(ValueError):
        chunk_document(_doc_with_sections([("S", "x")]), min_chars=0)


@settings(max_examples=60, deadline=None)
@given(
    paras=st.lists(st.text(alphabet="abc .\n", min_size=1, max_size=300), min_size=1, max_size=8),
    min_chars=st.integers(min_value=1, max_value=400),
)
def test_chunk_lossless_and_min_length_properties(paras, min_chars):
    body = "\n\n".join(p.replace("\n\n", " ") for p in paras).strip("\n")
    doc = _doc_with_sections([("S", body)])
    chunks = chunk_document(doc, min_chars=min_chars)
    if not body:
        assert chunks == []
        return
    assert "".join(c.text for c in chunks) == body
    for c in chunks[:-1]:
        assert c.char_len >= min_chars
    assert [c.chunk_id for c in chunks] == sorted({c.chunk_id for c in chunks})


def test_chunk_ids_deterministic():
    doc = _doc_with_sections([("S", "one two three.\n\nfour five six.")])
    a = chunk_document(doc, min_chars=10)
    b = chunk_document(doc, min_chars=10)
    assert a == b


def test_load_corpus_roundtrip(tmp_path):
    for n in range(3):
        doc = PaperDocument(
            paper_id=f"p{n}",
            title=f"Paper {n}",
            authors=("A",),
            sections=(("Intro", f"Body of paper {n}."),),
        )
        (tmp_path / f"p{n}.md").write_text(serialize_paper(doc), encoding="utf-8")
    corpus = load_corpus(tmp_path)
    assert len(corpus) == 3
    assert corpus.get("p1").title == "Paper 1"
    assert corpus.lookup_title("paper 2") == "p2"


def test_load_corpus_duplicate_id(tmp_path):
    doc = PaperDocument(paper_id="dup", title="T", authors=("A",), sections=(("S", "b."),))
    (tmp_path / "a.md").write_text(serialize_paper(doc), encoding="utf-8")
    (tmp_path / "b.md").write_text(serialize_paper(doc), encoding="utf-8")
    with pytest.raises(DuplicatePaperError, match="dup"):
        load_corpus(tmp_path)


def test_load_corpus_strict_vs_lenient(tmp_path):
    good = PaperDocument(paper_id="ok", title="Good", authors=("A",), sections=(("S", "b."),))
    (tmp_path / "good.md").write_text(serialize_paper(good), encoding="utf-8")
    (tmp_path / "bad.md").write_text("not a document", encoding="utf-8")
    with pytest.raises(ParseError):
        load_corpus(tmp_path, strict=True)
    corpus = load_corpus(tmp_path, strict=False)
    assert len(corpus) == 1
    assert len(corpus.warnings) == 1
    assert corpus.warnings[0].source == "bad.md"


def test_load_corpus_empty_dir(tmp_path):
    with pytest.raises(CorpusError, match="no parsable documents"):
        load_corpus(tmp_path)


def test_normalize_title():
    assert normalize_title("  Attention, Is All   You Need! ") == "attention is all you need"
