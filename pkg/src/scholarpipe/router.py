"""Task routing: an identifier rule pre-check, a pluggable classifier, and a
confidence-threshold fallback to the general QA pathway."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


class TaskLabel(str, Enum):
    GENERAL_QA = "general_qa"
    SIMPLIFICATION = "simplification"
    SUMMARIZATION = "summarization"
    KG_FACT = "kg_fact"


class Trigger(str, Enum):
    RULE_PRECHECK = "rule_precheck"
    CLASSIFIER = "classifier"
    FALLBACK = "fallback"


# Tie-break order for the keyword scorer: specific tasks beat general QA.
_LABEL_PRIORITY = (
    TaskLabel.KG_FACT,
    TaskLabel.SIMPLIFICATION,
    TaskLabel.SUMMARIZATION,
    TaskLabel.GENERAL_QA,
)


@dataclass(frozen=True)
class RoutingDecision:
    label: TaskLabel
    confidence: float
    trigger: Trigger
    matched_rule: str | None = None
    warning: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        if self.trigger is Trigger.RULE_PRECHECK:
            if self.confidence != 1.0 or not self.matched_rule:
                raise ValueError("rule pre-check decisions carry confidence 1.0 and a rule")
        if self.trigger is Trigger.FALLBACK and self.label is not TaskLabel.GENERAL_QA:
            raise ValueError("fallback decisions must route to general QA")


def _data_text(name: str) -> str:
    return resources.files("scholarpipe").joinpath(f"data/{name}").read_text(encoding="utf-8")


def load_identifier_terms(path: str | Path | None = None) -> tuple[str, ...]:
    """Rule table: one term per line, # comments."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("identifier_terms.txt")
    terms = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.append(line)
    return tuple(terms)


def _collapse_hyphens(text: str) -> str:
    return re.sub(r"(?<=\w)-(?=\w)", "", text.lower())


class KeywordClassifier:
    """Deterministic cue scorer over a curated regex table."""

    def __init__(self, table: dict[TaskLabel, list[tuple[re.Pattern, float]]] | None = None):
        self._table = table if table is not None else _load_keyword_table()

    def classify(self, query: str) -> tuple[TaskLabel, float]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        lowered = query.lower()
        scores = {label: 0.0 for label in TaskLabel}
        for label, patterns in self._table.items():
            for pattern, weight in patterns:
                if pattern.search(lowered):
                    scores[label] += weight
        total = sum(scores.values())
        if total == 0.0:
            return TaskLabel.GENERAL_QA, 0.0
        best = max(_LABEL_PRIORITY, key=lambda lab: (scores[lab], -_LABEL_PRIORITY.index(lab)))
        return best, scores[best] / total


def _load_keyword_table(path: str | Path | None = None) -> dict[TaskLabel, list[tuple[re.Pattern, float]]]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("router_keywords.yaml")
    raw = yaml.safe_load(text)
    table: dict[TaskLabel, list[tuple[re.Pattern, float]]] = {}
    for label_name, rules in raw.items():
        label = TaskLabel(label_name)
        table[label] = [
            (re.compile(rule["pattern"]), float(rule.get("weight", 1.0))) for rule in rules
        ]
    return table


class LlmClassifier:
    """Delegates to an external completion endpoint with a fixed instruction;
    a malformed reply is treated as below-threshold (fail-safe fallback)."""

    def __init__(self, backend, prompt_path: str | Path | None = None):
        self._backend = backend
        self._instruction = (
            Path(prompt_path).read_text(encoding="utf-8")
            if prompt_path
            else _data_text("instructions/router_prompt.txt")
        )

    def classify(self, query: str) -> tuple[TaskLabel, float]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        reply = self._backend.complete(f"{self._instruction}{query}")
        match = re.search(r"\{.*?\}", reply, re.DOTALL)
        if not match:
            return TaskLabel.GENERAL_QA, 0.0
        try:
            payload = json.loads(match.group(0))
            label = TaskLabel(str(payload["label"]).strip().lower())
            confidence = float(payload["confidence"])
        except (KeyError, ValueError, TypeError):
            return TaskLabel.GENERAL_QA, 0.0
        return label, max(0.0, min(1.0, confidence))


class Router:
    def __init__(
        self,
        classifier=None,
        identifier_terms: tuple[str, ...] | None = None,
        threshold: float = DEFAULT_THRESHOLD,
    ):
        self.classifier = classifier if classifier is not None else KeywordClassifier()
        self.threshold = threshold
        terms = identifier_terms if identifier_terms is not None else load_identifier_terms()
        self._rules = [
            (term, re.compile(rf"\b{re.escape(_collapse_hyphens(term))}\b"))
            for term in terms
        ]

    def rule_precheck(self, query: str) -> RoutingDecision | None:
        if not query.strip():
            raise ValueError("query must be non-empty")
        normalized = _collapse_hyphens(query)
        for term, pattern in self._rules:
            if pattern.search(normalized):
                return RoutingDecision(
                    label=TaskLabel.KG_FACT,
                    confidence=1.0,
                    trigger=Trigger.RULE_PRECHECK,
                    matched_rule=term,
                )
        return None

    def classify(self, query: str) -> tuple[TaskLabel, float]:
        return self.classifier.classify(query)

    def route(self, query: str, threshold: float | None = None) -> RoutingDecision:
        """Total: every non-empty query gets a decision; failures fall back."""
        threshold = self.threshold if threshold is None else threshold
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        decision = self.rule_precheck(query)
        if decision is not None:
            return decision
        try:
            label, confidence = self.classify(query)
        except Exception as exc:  # classifier backends may fail in transit
            logger.warning("classifier failed, falling back to general QA: %s", exc)
            return RoutingDecision(
                label=TaskLabel.GENERAL_QA,
                confidence=0.0,
                trigger=Trigger.FALLBACK,
                warning=f"classifier error: {exc}",
            )
        if confidence < threshold:
            return RoutingDecision(
                label=TaskLabel.GENERAL_QA,
                confidence=confidence,
                trigger=Trigger.FALLBACK,
                warning=f"confidence {confidence:.3f} below threshold {threshold:.3f}",
            )
        return RoutingDecision(label=label, confidence=confidence, trigger=Trigger.CLASSIFIER)
