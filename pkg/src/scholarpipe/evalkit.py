"""Evaluation metrics (citation P/R/F1, label accuracy and macro-F1, ROUGE
with max-over-references, compression ratio, aggregate SMOG) and the
benchmark runner that drives the pipeline over dataset files."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, NamedTuple

from .compose import EvidenceItem, EvidenceKind, EvidenceSet, SourceRef
from .router import TaskLabel

LABEL_CLASSES = ("yes", "maybe", "no")

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_WORD_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?")
_SENT_BREAK_RE = re.compile(r"[.!?]+(?=\s)")
_LABEL_RE = re.compile(r"\b(yes|maybe|no)\b")


class EvalError(Exception):
    pass


class InsufficientTextError(EvalError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop empties (pinned for
    reproducibility across ROUGE and compression)."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# citation metrics

@dataclass(frozen=True)
class CitationJudgment:
    predicted: frozenset[str]
    gold: frozenset[str]

    @classmethod
    def of(cls, predicted, gold) -> "CitationJudgment":
        norm = lambda ids: frozenset(str(x).strip().lower() for x in ids)
        return cls(predicted=norm(predicted), gold=norm(gold))


class PrfScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def citation_prf(judgment: CitationJudgment) -> PrfScores:
    overlap = len(judgment.predicted & judgment.gold)
    precision = overlap / len(judgment.predicted) if judgment.predicted else 0.0
    recall = overlap / len(judgment.gold) if judgment.gold else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return PrfScores(precision, recall, f1)


# ---------------------------------------------------------------------------
# label metrics

@dataclass(frozen=True)
class LabeledPrediction:
    predicted_label: str
    gold_label: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicted_label", self.predicted_label.strip().lower())
        object.__setattr__(self, "gold_label", self.gold_label.strip().lower())
        if self.gold_label not in LABEL_CLASSES:
            raise ValueError(f"gold label must be one of {LABEL_CLASSES}")


class LabelMetrics(NamedTuple):
    accuracy: float
    macro_f1: float


def label_metrics(preds: list[LabeledPrediction]) -> LabelMetrics:
    """Accuracy plus unweighted mean of per-class F1 over the three classes;
    a class absent from both gold and predictions contributes F1 = 0."""
    if not preds:
        raise EvalError("label_metrics requires at least one prediction")
    accuracy = sum(p.predicted_label == p.gold_label for p in preds) / len(preds)
    f1s = []
    for cls in LABEL_CLASSES:
        tp = sum(1 for p in preds if p.predicted_label == cls and p.gold_label == cls)
        fp = sum(1 for p in preds if p.predicted_label == cls and p.gold_label != cls)
        fn = sum(1 for p in preds if p.predicted_label != cls and p.gold_label == cls)
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return LabelMetrics(accuracy=accuracy, macro_f1=sum(f1s) / len(LABEL_CLASSES))


# ---------------------------------------------------------------------------
# ROUGE and compression

class RougeScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int) -> RougeScores:
    """Clipped n-gram overlap, n in {1, 2}."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = _ngrams(tokenize(candidate), n)
    ref = _ngrams(tokenize(reference), n)
    total_cand, total_ref = sum(cand.values()), sum(ref.values())
    if total_cand == 0 or total_ref == 0:
        return RougeScores(0.0, 0.0, 0.0)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    precision, recall = overlap / total_cand, overlap / total_ref
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return RougeScores(precision, recall, f1)


def _lcs_len(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            row.append(prev[j - 1] + 1 if x == y else max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScores:
    """Longest-common-subsequence overlap on tokens."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return RougeScores(0.0, 0.0, 0.0)
    lcs = _lcs_len(cand, ref)
    precision, recall = lcs / len(cand), lcs / len(ref)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return RougeScores(precision, recall, f1)


@dataclass(frozen=True)
class SummaryPair:
    source_text: str
    generated: str
    references: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.references:
            raise ValueError("references must be non-empty")
        if not self.generated:
            raise ValueError("generated text must be non-empty")


def best_reference_score(pair: SummaryPair, metric: Callable[[str, str], float]) -> float:
    """Max of metric(generated, ref) over the references, computed
    independently per metric."""
    return max(metric(pair.generated, ref) for ref in pair.references)


def compression_ratio(pair: SummaryPair) -> float:
    """Source token count over generated token count (same tokenizer as
    ROUGE)."""
    generated = len(tokenize(pair.generated))
    if generated == 0:
        raise EvalError("generated text has no tokens")
    return len(tokenize(pair.source_text)) / generated


# ---------------------------------------------------------------------------
# readability (SMOG)

def _data_text(name: str) -> str:
    return resources.files("scholarpipe").joinpath(f"data/{name}").read_text(encoding="utf-8")


def _load_syllable_rules() -> dict:
    return json.loads(_data_text("syllable_rules.json"))


def _load_abbreviations() -> frozenset[str]:
    out = set()
    for line in _data_text("abbreviations.txt").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.add(line)
    return frozenset(out)


_SYLLABLE_RULES = _load_syllable_rules()
_ABBREVIATIONS = _load_abbreviations()
_VOWEL_GROUP_RE = re.compile(f"[{_SYLLABLE_RULES['vowels']}]+")


def count_syllables(word: str) -> int:
    """Vowel-group counting with silent-ending corrections (rule list shipped
    as data)."""
    word = word.strip().lower().strip("'")
    if not word:
        return 0
    special = _SYLLABLE_RULES["special_words"].get(word)
    if special is not None:
        return special
    count = len(_VOWEL_GROUP_RE.findall(word))
    for ending in _SYLLABLE_RULES["silent_endings"]:
        if word.endswith(ending):
            if not any(word.endswith(exc) for exc in _SYLLABLE_RULES["silent_ending_exceptions"]):
                if count > 1:
                    count -= 1
            break
    return max(count, 1)


def split_sentences(text: str) -> list[str]:
    """Terminal punctuation followed by whitespace and an uppercase letter,
    digit, or opening quote starts a new sentence; abbreviation list applies."""
    sentences = []
    start = 0
    for m in _SENT_BREAK_RE.finditer(text):
        tail = text[start : m.start()]
        last = re.search(r"([A-Za-z][A-Za-z.]*)$", tail.strip())
        if last and last.group(1).lower().rstrip(".") in _ABBREVIATIONS:
            continue
        rest = text[m.end() :].lstrip()
        if rest and not (rest[0].isupper() or rest[0].isdigit() or rest[0] in "\"'("):
            continue
        sentences.append(text[start : m.end()])
        start = m.end()
    if text[start:].strip():
        sentences.append(text[start:])
    return [s for s in sentences if re.search(r"\w", s)]


def polysyllable_count(text: str) -> int:
    return sum(1 for w in _WORD_RE.findall(text) if count_syllables(w) >= 3)


def smog_index(texts: list[str]) -> float:
    """Aggregate SMOG grade over the concatenated texts. Counts are summed
    per text (a boundary is forced between texts), so the result is invariant
    to input order."""
    sentences = sum(len(split_sentences(t)) for t in texts)
    if sentences < 3:
        raise InsufficientTextError("insufficient text for SMOG (need >= 3 sentences)")
    polysyllables = sum(polysyllable_count(t) for t in texts)
    return 1.0430 * math.sqrt(polysyllables * 30 / sentences) + 3.1291


# ---------------------------------------------------------------------------
# benchmark runner

class BenchmarkMode(str, Enum):
    ORIG = "orig"
    RETRIEVAL = "retrieval"
    ZERO = "zero"


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    gold_context: tuple[str, ...] = ()
    gold_label: str | None = None
    gold_answer: str | None = None
    gold_citations: tuple[str, ...] = ()
    references: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricReport:
    per_example: tuple[dict, ...]
    aggregate: dict
    config_echo: dict


def load_dataset(path: str | Path) -> list[EvalRecord]:
    """One JSON record per line; parse errors cite the line number."""
    records = []
    seen_ids = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            record = EvalRecord(
                id=str(raw["id"]),
                question=raw["question"],
                gold_context=tuple(raw.get("gold_context", []) or []),
                gold_label=raw.get("gold_label"),
                gold_answer=raw.get("gold_answer"),
                gold_citations=tuple(raw.get("gold_citations", []) or []),
                references=tuple(raw.get("references", []) or []),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise EvalError(f"{path}: line {lineno}: malformed record: {exc}") from exc
        if record.id in seen_ids:
            raise EvalError(f"{path}: line {lineno}: duplicate id {record.id!r}")
        seen_ids.add(record.id)
        records.append(record)
    if not records:
        raise EvalError(f"{path}: no records")
    return records


def extract_label(text: str) -> str | None:
    m = _LABEL_RE.search(text.lower())
    return m.group(1) if m else None


def _gold_evidence(record: EvalRecord) -> EvidenceSet:
    aligned = len(record.gold_citations) == len(record.gold_context)
    items = tuple(
        EvidenceItem(
            ref_no=i + 1,
            kind=EvidenceKind.TEXT_CHUNK,
            payload=passage,
            source=SourceRef(
                paper_id=record.gold_citations[i] if aligned else f"{record.id}#ctx{i}",
                title=record.gold_citations[i] if aligned else f"gold context {i + 1}",
            ),
        )
        for i, passage in enumerate(record.gold_context)
    )
    return EvidenceSet(task=TaskLabel.GENERAL_QA, items=items)


def _run_example(pipeline, record: EvalRecord, mode: BenchmarkMode) -> dict:
    row: dict = {"id": record.id}
    try:
        if mode is BenchmarkMode.ORIG:
            answer = pipeline.answer_with_evidence(record.question, _gold_evidence(record))
        elif mode is BenchmarkMode.ZERO:
            answer = pipeline.answer_with_evidence(
                record.question, EvidenceSet(task=TaskLabel.GENERAL_QA, items=())
            )
        else:
            answer = pipeline.answer(record.question)
    except Exception as exc:
        row["error"] = str(exc)
        return row

    row["text"] = answer.text
    row["m"] = answer.evidence.m
    row["citations"] = sorted(answer.citations)
    row["ungrounded"] = answer.provenance.ungrounded
    row["routing"] = answer.provenance.routing.label.value
    if record.gold_label is not None:
        row["gold_label"] = record.gold_label.strip().lower()
        row["predicted_label"] = extract_label(answer.text)
        row["correct"] = row["predicted_label"] == row["gold_label"]
    if record.gold_citations:
        ref_to_paper = {
            item.ref_no: item.source.paper_id
            for item in answer.evidence.items
            if item.source.paper_id
        }
        predicted_ids = {ref_to_paper[n] for n in answer.citations if n in ref_to_paper}
        scores = citation_prf(CitationJudgment.of(predicted_ids, record.gold_citations))
        row["citation_precision"] = scores.precision
        row["citation_recall"] = scores.recall
        row["citation_f1"] = scores.f1
    if record.references:
        pair = SummaryPair(
            source_text=" ".join(record.gold_context) or record.question,
            generated=answer.text,
            references=record.references,
        )
        row["rouge1_f1"] = best_reference_score(pair, lambda c, r: rouge_n(c, r, 1).f1)
        row["rouge2_f1"] = best_reference_score(pair, lambda c, r: rouge_n(c, r, 2).f1)
        row["rougeL_f1"] = best_reference_score(pair, lambda c, r: rouge_l(c, r).f1)
        row["compression"] = compression_ratio(pair)
    return row


def _mean(rows: list[dict], key: str) -> float | None:
    values = [row[key] for row in rows if key in row]
    return sum(values) / len(values) if values else None


def run_benchmark(
    pipeline,
    dataset: str | Path | list[EvalRecord],
    mode: BenchmarkMode | str,
    trace_path: str | Path | None = None,
    max_workers: int = 4,
) -> MetricReport:
    """Per-example pipeline runs with bounded parallelism; stage errors are
    recorded per example and the run continues. Report merge is deterministic
    (rows sorted by example id)."""
    mode = BenchmarkMode(mode)
    records = dataset if isinstance(dataset, list) else load_dataset(dataset)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(lambda rec: _run_example(pipeline, rec, mode), records))
    rows.sort(key=lambda row: row["id"])

    aggregate: dict = {
        "n_examples": len(rows),
        "n_errors": sum(1 for row in rows if "error" in row),
        "n_ungrounded": sum(1 for row in rows if row.get("ungrounded")),
    }
    labeled = [row for row in rows if "gold_label" in row]
    if labeled:
        preds = [
            LabeledPrediction(
                predicted_label=row["predicted_label"] or "unparsed",
                gold_label=row["gold_label"],
            )
            for row in labeled
        ]
        metrics = label_metrics(preds)
        aggregate["accuracy"] = metrics.accuracy
        aggregate["macro_f1"] = metrics.macro_f1
    for key in (
        "citation_precision", "citation_recall", "citation_f1",
        "rouge1_f1", "rouge2_f1", "rougeL_f1", "compression",
    ):
        value = _mean(rows, key)
        if value is not None:
            aggregate[key] = value
    generated = [row["text"] for row in rows if row.get("text") and "rouge1_f1" in row]
    if generated:
        try:
            aggregate["smog"] = smog_index(generated)
        except InsufficientTextError:
            aggregate["smog"] = None

    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    return MetricReport(
        per_example=tuple(rows),
        aggregate=aggregate,
        config_echo={
            "mode": mode.value,
            "tokenizer": "lowercase, split on non-alphanumerics",
            "rouge": "no stemming, no stopword filtering",
            "bertscore": "unavailable (no remote scorer configured)",
            "model_id": getattr(pipeline, "model_id", None),
            "k": getattr(getattr(pipeline, "backends", None), "retrieval_k", None),
        },
    )
