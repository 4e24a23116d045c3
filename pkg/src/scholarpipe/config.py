"""Layered service configuration: flags > environment > file > defaults.
The file is a YAML key-value tree; unknown keys are rejected at load."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

ENV_PREFIX = "SCHOLARPIPE_"


class ConfigError(Exception):
    pass


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# dotted key -> (attribute, coercion, validator, description)
KNOWN_KEYS: dict[str, tuple[str, type | object, object]] = {
    "listen": ("listen", str, None),
    "corpus.path": ("corpus_path", str, None),
    "index.path": ("index_path", str, None),
    "ingest.strict": ("ingest_strict", _bool, None),
    "ingest.min_chars": ("ingest_min_chars", int, lambda v: v >= 1),
    "retrieval.k": ("retrieval_k", int, lambda v: v >= 1),
    "router.threshold": ("router_threshold", float, lambda v: 0.0 <= v <= 1.0),
    "router.rules_path": ("router_rules_path", str, None),
    "router.prompt_path": ("router_prompt_path", str, None),
    "grounding.threshold": ("grounding_threshold", float, lambda v: 0.0 <= v <= 1.0),
    "compose.budget_chars": ("compose_budget_chars", int, lambda v: v >= 1),
    "compose.templates_dir": ("compose_templates_dir", str, None),
    "llm.url": ("llm_url", str, None),
    "llm.token": ("llm_token", str, None),
    "llm.model": ("llm_model", str, None),
    "llm.max_inflight": ("llm_max_inflight", int, lambda v: v >= 1),
    "llm.timeout_ms": ("llm_timeout_ms", int, lambda v: v > 0),
    "llm.max_output_chars": ("llm_max_output_chars", int, lambda v: v >= 1),
    "llm.temperature": ("llm_temperature", float, lambda v: v >= 0.0),
    "llm.mock_script": ("llm_mock_script", str, None),
    "embedding.provider": ("embedding_provider", str, lambda v: v in ("baseline", "remote")),
    "embedding.url": ("embedding_url", str, None),
    "embedding.dim": ("embedding_dim", int, lambda v: v >= 1),
    "embedding.token": ("embedding_token", str, None),
    "embedding.timeout_ms": ("embedding_timeout_ms", int, lambda v: v > 0),
    "embedding.prepend_section_path": ("embedding_prepend_section_path", _bool, None),
    "kg.endpoint": ("kg_endpoint", str, None),
    "kg.timeout_ms": ("kg_timeout_ms", int, lambda v: v > 0),
    "kg.row_cap": ("kg_row_cap", int, lambda v: v >= 1),
    "kg.llm_gloss": ("kg_llm_gloss", _bool, None),
    "biblio.url": ("biblio_url", str, None),
    "biblio.token": ("biblio_token", str, None),
    "biblio.timeout_ms": ("biblio_timeout_ms", int, lambda v: v > 0),
    "service.cors_origins": ("service_cors_origins", str, None),
}


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8080"
    corpus_path: str | None = None
    index_path: str | None = None
    ingest_strict: bool = True
    ingest_min_chars: int = 800
    retrieval_k: int = 8
    router_threshold: float = 0.5
    router_rules_path: str | None = None
    router_prompt_path: str | None = None
    grounding_threshold: float = 0.85
    compose_budget_chars: int = 10_000
    compose_templates_dir: str | None = None
    llm_url: str | None = None
    llm_token: str | None = None
    llm_model: str = "llama-3.2-3b-instruct"
    llm_max_inflight: int = 4
    llm_timeout_ms: int = 60_000
    llm_max_output_chars: int = 4_000
    llm_temperature: float = 0.0
    llm_mock_script: str | None = None
    embedding_provider: str = "baseline"
    embedding_url: str | None = None
    embedding_dim: int = 384
    embedding_token: str | None = None
    embedding_timeout_ms: int = 10_000
    embedding_prepend_section_path: bool = False
    kg_endpoint: str = "https://semopenalex.org/sparql"
    kg_timeout_ms: int = 15_000
    kg_row_cap: int = 200
    kg_llm_gloss: bool = False
    biblio_url: str | None = None
    biblio_token: str | None = None
    biblio_timeout_ms: int = 5_000
    service_cors_origins: str = "*"

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)


def _flatten(tree: dict, prefix: str = "") -> dict[str, object]:
    flat: dict[str, object] = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _apply(config: ServiceConfig, dotted: str, value: object, origin: str) -> None:
    if dotted not in KNOWN_KEYS:
        raise ConfigError(f"unknown config key {dotted!r} (from {origin})")
    attr, coerce, validate = KNOWN_KEYS[dotted]
    try:
        coerced = coerce(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {dotted!r}: {value!r} ({exc})") from exc
    if validate is not None and not validate(coerced):
        raise ConfigError(f"value for {dotted!r} out of range: {coerced!r}")
    setattr(config, attr, coerced)


def load_config(
    flags: dict[str, object] | None = None,
    env: dict[str, str] | None = None,
    file: str | Path | None = None,
) -> ServiceConfig:
    """Resolution order: flags beat environment beat file beat defaults."""
    config = ServiceConfig()
    if file is not None:
        raw = yaml.safe_load(Path(file).read_text(encoding="utf-8"))
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {file} must hold a key-value tree")
        for dotted, value in sorted(_flatten(raw).items()):
            _apply(config, dotted, value, origin=str(file))
    env = os.environ if env is None else env
    for dotted in KNOWN_KEYS:
        env_name = ENV_PREFIX + dotted.replace(".", "_").upper()
        if env_name in env:
            _apply(config, dotted, env[env_name], origin=env_name)
    for dotted, value in sorted((flags or {}).items()):
        if value is not None:
            _apply(config, dotted, value, origin="flags")
    return config


def config_echo(config: ServiceConfig) -> dict[str, object]:
    """Flat dotted-key view, secrets masked."""
    by_attr = {attr: dotted for dotted, (attr, _, _) in KNOWN_KEYS.items()}
    out = {}
    for f in fields(config):
        dotted = by_attr.get(f.name, f.name)
        value = getattr(config, f.name)
        if value is not None and dotted.endswith(".token"):
            value = "***"
        out[dotted] = value
    return out
