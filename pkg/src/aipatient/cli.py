"""Command-line entry points: ingest notes, serve the API, run ad-hoc graph
queries, and drive the evaluation suites."""

from __future__ import annotations

import statistics
import sys
from pathlib import Path

import click
import uvicorn

from aipatient import gql
from aipatient.adapters import AdapterParams, CallLog, HttpAdapter
from aipatient.evalharness import (
    load_qa_items,
    run_ablation,
    run_robustness,
    run_stability,
    save_outcomes,
)
from aipatient.ingest import (
    EntityCategory,
    extract_entities,
    build_graph,
    load_notes,
    load_spans,
    score_ner,
    spans_by_note,
    sum_breakdowns,
)
from aipatient.kgstore import PatientGraph
from aipatient.metrics import EmptyText, confusion_metrics, readability_scores
from aipatient.mocks import build_identity_mock, build_ner_mock
from aipatient.service import ConfigError, create_app, load_config


@click.group()
def main() -> None:
    """Simulated-patient system: knowledge graph, interview agents, evaluation."""


def _make_adapter(kind: str, endpoint: str | None, model: str, api_key_env: str | None,
                  gold: str | None = None, call_log: CallLog | None = None):
    if kind == "mock":
        spans = load_spans(gold) if gold else None
        return build_identity_mock(gold_spans=spans, call_log=call_log)
    if not endpoint:
        raise click.UsageError("--endpoint is required with --adapter http")
    return HttpAdapter(AdapterParams(model=model, endpoint=endpoint, api_key_env=api_key_env),
                       call_log=call_log)


@main.command()
@click.option("--notes", "notes_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--adapter", "adapter_kind", type=click.Choice(["mock", "http"]), default="mock")
@click.option("--gold", type=click.Path(exists=True, dir_okay=False),
              help="gold span file backing the mock extractor")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--endpoint", default=None)
@click.option("--model", default="gpt-4-turbo")
@click.option("--api-key-env", default=None)
@click.option("--call-log", "call_log_path", default=None, type=click.Path(dir_okay=False),
              help="write the adapter call log as JSON lines")
def ingest(notes_dir, adapter_kind, gold, out_path, endpoint, model, api_key_env, call_log_path):
    """Extract entities from discharge notes and write the graph file."""
    if adapter_kind == "mock" and not gold:
        raise click.UsageError("--gold is required with --adapter mock")
    call_log = CallLog()
    adapter = (
        build_ner_mock(load_spans(gold), call_log=call_log)
        if adapter_kind == "mock"
        else _make_adapter(adapter_kind, endpoint, model, api_key_env, call_log=call_log)
    )
    notes = load_notes(notes_dir)
    extractions = [extract_entities(note, adapter) for note in notes]
    graph = build_graph(extractions, notes)
    graph.validate()
    graph.save(out_path)
    if call_log_path:
        call_log.write_jsonl(call_log_path)
    stats = graph.stats()
    click.echo(f"wrote {out_path}: {stats.total_nodes} nodes, {stats.total_edges} edges")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def serve(config_path):
    """Run the HTTP interview service."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")


@main.command()
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.argument("query_text", required=False)
def query(kg_path, query_text):
    """Run one graph query (argument or stdin) and print TSV rows."""
    graph = PatientGraph.load(kg_path)
    text = query_text if query_text else sys.stdin.read()
    try:
        table = gql.execute(gql.parse(text), graph)
    except gql.QueryError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(table.to_tsv())


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation suites."""


@eval_group.command(name="ner")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
def eval_ner(pred_path, gold_path):
    """Score predicted spans against gold annotations, per entity category."""
    predicted = spans_by_note(load_spans(pred_path))
    gold = spans_by_note(load_spans(gold_path))
    breakdowns = []
    for key in sorted(set(predicted) | set(gold)):
        breakdowns.append(score_ner(predicted.get(key, []), gold.get(key, [])))
    total = sum_breakdowns(breakdowns)
    header = ["Entity Category", "TPR", "FPR", "Precision", "Recall", "F1"]
    click.echo("\t".join(header))
    for category in EntityCategory:
        rates = confusion_metrics(total.per_category[category])
        click.echo(
            f"{category.value}\t{rates.tpr:.4f}\t{rates.fpr:.4f}"
            f"\t{rates.precision:.4f}\t{rates.recall:.4f}\t{rates.f1:.4f}"
        )
    pooled = confusion_metrics(total.pooled)
    click.echo(
        f"Total\t{pooled.tpr:.4f}\t{pooled.fpr:.4f}"
        f"\t{pooled.precision:.4f}\t{pooled.recall:.4f}\t{pooled.f1:.4f}"
    )


def _eval_common(kg_path, qa_path, adapter_kind, endpoint, model, api_key_env):
    graph = PatientGraph.load(kg_path)
    items = load_qa_items(qa_path)
    call_log = CallLog()
    adapter = _make_adapter(adapter_kind, endpoint, model, api_key_env, call_log=call_log)
    return graph, items, adapter, call_log


_eval_options = [
    click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--qa", "qa_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--adapter", "adapter_kind", type=click.Choice(["mock", "http"]), default="mock"),
    click.option("--endpoint", default=None),
    click.option("--model", default="gpt-4-turbo"),
    click.option("--api-key-env", default=None),
    click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
                 help="write per-item outcomes as JSON lines"),
    click.option("--call-log", "call_log_path", default=None, type=click.Path(dir_okay=False),
                 help="write the adapter call log as JSON lines"),
]


def _with_eval_options(fn):
    for option in reversed(_eval_options):
        fn = option(fn)
    return fn


@eval_group.command(name="qa")
@_with_eval_options
def eval_qa(kg_path, qa_path, adapter_kind, endpoint, model, api_key_env, out_path,
            call_log_path):
    """QA-accuracy ablation over the eight agent configurations."""
    graph, items, adapter, call_log = _eval_common(
        kg_path, qa_path, adapter_kind, endpoint, model, api_key_env
    )
    report = run_ablation(items, graph, adapter)
    if out_path:
        save_outcomes(report.outcomes, out_path)
    if call_log_path:
        call_log.write_jsonl(call_log_path)
    click.echo(report.to_tsv())
    click.echo()
    click.echo(_readability_tsv(report.outcomes))


def _readability_tsv(outcomes) -> str:
    """Median readability of the patient utterances (non-fallback turns)."""
    fre, fkg = [], []
    for outcome in outcomes:
        if outcome.fallback or not outcome.utterance:
            continue
        try:
            scores = readability_scores(outcome.utterance)
        except EmptyText:
            continue
        fre.append(scores.flesch_reading_ease)
        fkg.append(scores.fk_grade)
    lines = ["Readability\tMedian"]
    if fre:
        lines.append(f"Flesch Reading Ease\t{statistics.median(fre):.2f}")
        lines.append(f"Flesch-Kincaid Grade\t{statistics.median(fkg):.2f}")
    else:
        lines.append("Flesch Reading Ease\tn/a")
        lines.append("Flesch-Kincaid Grade\tn/a")
    return "\n".join(lines)


@eval_group.command(name="robustness")
@_with_eval_options
def eval_robustness(kg_path, qa_path, adapter_kind, endpoint, model, api_key_env, out_path,
                    call_log_path):
    """Accuracy over the original questions and their three paraphrase sets."""
    graph, items, adapter, call_log = _eval_common(
        kg_path, qa_path, adapter_kind, endpoint, model, api_key_env
    )
    report = run_robustness(items, graph, adapter)
    if out_path:
        save_outcomes(report.outcomes, out_path)
    if call_log_path:
        call_log.write_jsonl(call_log_path)
    click.echo(report.to_tsv())


@eval_group.command(name="stability")
@_with_eval_options
def eval_stability(kg_path, qa_path, adapter_kind, endpoint, model, api_key_env, out_path,
                   call_log_path):
    """Personality-induced data loss over the 32 profiles."""
    graph, items, adapter, call_log = _eval_common(
        kg_path, qa_path, adapter_kind, endpoint, model, api_key_env
    )
    report = run_stability(items, graph, adapter)
    if out_path:
        save_outcomes(report.outcomes, out_path)
    if call_log_path:
        call_log.write_jsonl(call_log_path)
    click.echo(report.to_tsv())


if __name__ == "__main__":
    main()
