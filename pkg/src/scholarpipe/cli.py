"""Command-line interface: ask, ingest, serve, and the eval subcommands."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .config import ConfigError, load_config
from .corpus import load_corpus
from .embedding import build_provider
from .evalkit import (
    BenchmarkMode,
    CitationJudgment,
    LabeledPrediction,
    SummaryPair,
    best_reference_score,
    citation_prf,
    compression_ratio,
    label_metrics,
    rouge_l,
    rouge_n,
    run_benchmark,
    smog_index,
    InsufficientTextError,
)
from .generate import PipelineStageError
from .service import build_index, build_pipeline, record_answer


def _parse_sets(pairs: tuple[str, ...]) -> dict[str, str]:
    flags = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        flags[key.strip()] = value.strip()
    return flags


def _load_config(config_file: str | None, sets: tuple[str, ...], extra: dict | None = None):
    flags = _parse_sets(sets)
    if extra:
        flags.update({k: v for k, v in extra.items() if v is not None})
    try:
        return load_config(flags=flags, file=config_file)
    except ConfigError as exc:
        raise click.ClickException(f"[config] {exc}") from exc


@click.group()
def main():
    """Task-aware retrieval-augmented pipeline for scholarly assistance."""


@main.command()
@click.argument("query")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True, help="Override a config key, e.g. --set retrieval.k=4")
@click.option("-k", "k", type=int, default=None, help="Top-k chunks to retrieve")
@click.option("--json", "as_json", is_flag=True, help="Emit the machine-readable answer record")
def ask(query, config_file, sets, k, as_json):
    """Answer a query through the full pipeline."""
    config = _load_config(config_file, sets, extra={"retrieval.k": k})
    try:
        pipeline = build_pipeline(config)
        answer = pipeline.answer(query)
    except PipelineStageError as exc:
        raise click.ClickException(str(exc)) from exc
    except Exception as exc:
        raise click.ClickException(f"[startup] {exc}") from exc
    record = record_answer(answer)
    if as_json:
        click.echo(json.dumps(record, ensure_ascii=False, indent=2))
        return
    click.echo(record["text"])
    if record["citations"]:
        click.echo("\nCitations: " + ", ".join(f"[{n}]" for n in record["citations"]))
    if record["bibliography"]:
        click.echo("Bibliography:")
        for entry in record["bibliography"]:
            refs = ",".join(str(n) for n in entry["ref_nos"])
            line = f"  [{refs}] {entry['title']}"
            if entry["authors"]:
                line += f" — {'; '.join(entry['authors'])}"
            if entry["year"]:
                line += f" ({entry['year']})"
            if entry["external_id"]:
                line += f" <{entry['external_id']}>"
            click.echo(line)
    prov = record["provenance"]
    click.echo(
        f"\n[task={prov['routing']['label']} trigger={prov['routing']['trigger']} "
        f"k={prov['k']} model={prov['model_id']}"
        + (" ungrounded" if prov["ungrounded"] else "")
        + "]"
    )


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.argument("index_path", type=click.Path())
@click.option("--min-chars", type=int, default=800, show_default=True)
@click.option("--dim", type=int, default=384, show_default=True)
@click.option("--lenient", is_flag=True, help="Skip malformed files instead of failing")
def ingest(corpus_path, index_path, min_chars, dim, lenient):
    """Parse a corpus directory, build the vector index, and save it."""
    started = time.monotonic()
    try:
        corpus = load_corpus(corpus_path, strict=not lenient)
        embedder = build_provider("baseline", dim=dim)
        index, chunks = build_index(corpus, embedder, min_chars=min_chars)
        if not len(index):
            raise click.ClickException("corpus produced zero chunks")
        index.save(index_path)
    except click.ClickException:
        raise
    except Exception as exc:
        raise click.ClickException(f"[ingest] {exc}") from exc
    elapsed = time.monotonic() - started
    click.echo(
        f"documents={len(corpus)} chunks={len(chunks)} dim={dim} "
        f"index={index_path} elapsed={elapsed:.2f}s"
    )
    for warning in corpus.warnings:
        click.echo(f"warning: {warning.source}: {warning.message}", err=True)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True)
@click.option("--build-index", "build_missing", is_flag=True,
              help="Build the index at startup when the file is missing")
def serve(config_file, sets, build_missing):
    """Run the HTTP service."""
    from .service import serve as _serve

    config = _load_config(config_file, sets)
    try:
        _serve(config, build_missing_index=build_missing or config.index_path is None)
    except Exception as exc:
        raise click.ClickException(f"[startup] {exc}") from exc


@main.group()
def eval():
    """Evaluation subcommands over line-delimited JSON records."""


def _read_jsonl(path: str) -> list[dict]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise click.ClickException(f"{path}: no records")
    return rows


def _emit(rows: list[dict], aggregate: dict, as_json: bool) -> None:
    if as_json:
        for row in rows:
            click.echo(json.dumps(row, ensure_ascii=False))
        click.echo(json.dumps({"aggregate": aggregate}, ensure_ascii=False))
        return
    if rows:
        keys = [k for k in rows[0] if k != "id"]
        click.echo("id\t" + "\t".join(keys))
        for row in rows:
            click.echo(
                str(row.get("id", "")) + "\t"
                + "\t".join(_fmt(row.get(k)) for k in keys)
            )
    click.echo("-" * 40)
    for key, value in aggregate.items():
        click.echo(f"{key}: {_fmt(value)}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


@eval.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def citations(input_path, as_json):
    """Score records of {"predicted": [...], "gold": [...]}."""
    rows = []
    for i, raw in enumerate(_read_jsonl(input_path)):
        scores = citation_prf(CitationJudgment.of(raw["predicted"], raw["gold"]))
        rows.append({
            "id": raw.get("id", i),
            "precision": scores.precision,
            "recall": scores.recall,
            "f1": scores.f1,
        })
    aggregate = {
        key: sum(r[key] for r in rows) / len(rows) for key in ("precision", "recall", "f1")
    }
    _emit(rows, aggregate, as_json)


@eval.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def labels(input_path, as_json):
    """Score records of {"predicted_label": ..., "gold_label": ...}."""
    raws = _read_jsonl(input_path)
    preds = [
        LabeledPrediction(predicted_label=r["predicted_label"], gold_label=r["gold_label"])
        for r in raws
    ]
    metrics = label_metrics(preds)
    rows = [
        {
            "id": raw.get("id", i),
            "predicted": p.predicted_label,
            "gold": p.gold_label,
            "correct": p.predicted_label == p.gold_label,
        }
        for i, (raw, p) in enumerate(zip(raws, preds))
    ]
    _emit(rows, {"accuracy": metrics.accuracy, "macro_f1": metrics.macro_f1}, as_json)


@eval.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def summaries(input_path, as_json):
    """Score records of {"source_text": ..., "generated": ..., "references": [...]}."""
    rows = []
    generated_texts = []
    for i, raw in enumerate(_read_jsonl(input_path)):
        pair = SummaryPair(
            source_text=raw.get("source_text") or raw.get("source", ""),
            generated=raw["generated"],
            references=tuple(raw["references"]),
        )
        generated_texts.append(pair.generated)
        rows.append({
            "id": raw.get("id", i),
            "rouge1_f1": best_reference_score(pair, lambda c, r: rouge_n(c, r, 1).f1),
            "rouge2_f1": best_reference_score(pair, lambda c, r: rouge_n(c, r, 2).f1),
            "rougeL_f1": best_reference_score(pair, lambda c, r: rouge_l(c, r).f1),
            "compression": compression_ratio(pair),
        })
    aggregate = {
        key: sum(r[key] for r in rows) / len(rows)
        for key in ("rouge1_f1", "rouge2_f1", "rougeL_f1", "compression")
    }
    try:
        aggregate["smog"] = smog_index(generated_texts)
    except InsufficientTextError:
        aggregate["smog"] = None
    aggregate["bertscore"] = "unavailable (no remote scorer configured)"
    _emit(rows, aggregate, as_json)


@eval.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice([m.value for m in BenchmarkMode]), required=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Write per-example pipeline traces to this path")
@click.option("--json", "as_json", is_flag=True)
def run(dataset, mode, config_file, sets, trace_path, as_json):
    """Drive the pipeline over a dataset file and report metrics."""
    config = _load_config(config_file, sets)
    try:
        pipeline = build_pipeline(config)
        report = run_benchmark(pipeline, dataset, mode, trace_path=trace_path)
    except Exception as exc:
        raise click.ClickException(f"[eval] {exc}") from exc
    rows = [dict(row) for row in report.per_example]
    for row in rows:
        row.pop("text", None)  # keep the table readable; traces hold full text
    if as_json:
        for row in report.per_example:
            click.echo(json.dumps(row, ensure_ascii=False))
        click.echo(json.dumps(
            {"aggregate": report.aggregate, "config_echo": report.config_echo},
            ensure_ascii=False,
        ))
    else:
        _emit(rows, report.aggregate, as_json=False)
        click.echo("-" * 40)
        for key, value in report.config_echo.items():
            click.echo(f"{key}: {value}")


if __name__ == "__main__":
    sys.exit(main())
