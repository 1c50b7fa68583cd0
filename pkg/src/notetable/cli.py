"""Command-line entry point: ingest | build-ontology | verify | evaluate | tool."""
from __future__ import annotations

import concurrent.futures
import functools
import json
import sys
from pathlib import Path
from typing import List, Optional

import click

from .datastore import ingest_tables
from .errors import ConfigError, EmptyItems, LlmUnavailable, NotetableError
from .lexicon import AbbreviationLexicon
from .runconfig import RunConfig, load_run_config
from .schema import default_schema_path, load_schema_config
from .util import write_atomic


def _fail(exc: NotetableError) -> None:
    click.echo(f"ERROR {type(exc).__name__}: {exc}", err=True)
    sys.exit(2)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NotetableError as exc:
            _fail(exc)

    return wrapper


def _load_dataset(config: RunConfig):
    schema_path = config.schema or str(default_schema_path())
    schema = load_schema_config(schema_path)
    files = config.files or None
    return ingest_tables(schema, files=files)


def _lexicon(config: RunConfig) -> AbbreviationLexicon:
    if config.lexicon:
        return AbbreviationLexicon.from_file(config.lexicon)
    return AbbreviationLexicon.bundled()


@click.group()
def cli() -> None:
    """Verify clinical notes against structured EHR-style tables."""


@cli.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True), help="Schema config document.")
@click.option("--files", "-f", multiple=True, type=click.Path(exists=True), help="Restrict/locate table files.")
@click.option("--report", "report_path", type=click.Path(), help="Write a machine-readable ingest report.")
@click.option("--jobs", default=1, show_default=True, help="Parallel per-file loading.")
@_guard
def ingest(schema_path: Optional[str], files, report_path: Optional[str], jobs: int) -> None:
    """Load tables and print the per-table ingest report."""
    schema = load_schema_config(schema_path or default_schema_path())
    dataset, report = ingest_tables(schema, files=list(files) or None, jobs=jobs)
    for line in report.summary_lines():
        click.echo(line, err=True)
    click.echo(f"tables: {len(dataset.rows)}  items: {len(dataset.item_labels)}", err=True)
    if report_path:
        write_atomic(report_path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


@cli.command("build-ontology")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config (for the LLM backend).")
@click.option("--items", "items_path", type=click.Path(exists=True), help="Item list, one label per line (defaults to the dataset's item set).")
@click.option("--window", default=None, type=int, help="Sliding-window size (default from config, else 200).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Ontology document to write.")
@click.option("--unassigned-report", "unassigned_path", type=click.Path(), help="Write quarantined items here.")
@_guard
def build_ontology_cmd(config_path, items_path, window, out_path, unassigned_path) -> None:
    """Construct the two-level ontology over an item list."""
    from .ontology import build_ontology

    config = load_run_config(config_path)
    if items_path:
        items = [
            line.strip()
            for line in Path(items_path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    else:
        dataset, _ = _load_dataset(config)
        items = dataset.item_labels
    if not items:
        raise EmptyItems("no items supplied (empty --items file and empty dataset)")
    llm = config.llm.build()
    if llm is None:
        raise LlmUnavailable("build-ontology needs an LLM backend (scripted or http)")
    w = window or config.pipeline.ontology_window
    ontology, unassigned = build_ontology(items, w, llm, config.pipeline.templates_dir)
    ontology.save(out_path)
    click.echo(f"groups: {len(ontology.groups)}  items: {len(ontology.item_index)}", err=True)
    if unassigned:
        click.echo(f"unassigned items: {len(unassigned)}", err=True)
        if unassigned_path:
            write_atomic(unassigned_path, "\n".join(unassigned) + "\n")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--note", "note_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), help="Output directory (default from config).")
@click.option("--dry-run", is_flag=True, help="Print the stage plan without any LLM calls.")
@click.option("--parallel", default=1, show_default=True, help="Notes verified concurrently.")
@click.option("--timings", is_flag=True, help="Also write wall-clock stage timings sidecars.")
@_guard
def verify(config_path, note_paths, out_dir, dry_run, parallel, timings) -> None:
    """Run the full verification pipeline over one or more notes."""
    from .ontology import Ontology
    from .pipeline import load_note, run_pipeline

    config = load_run_config(config_path)
    notes = [load_note(p) for p in note_paths]
    if dry_run:
        for note in notes:
            click.echo(f"note {note.note_id} ({note.note_type}, {len(note.lines)} lines):")
            for stage in (
                "context",
                "segment",
                "anchors",
                "extract_patient",
                "extract_ontology" if config.ontology else "extract_ontology (skipped: no ontology)",
                "merge",
                "classify_status",
                "filter_scope",
                f"verify (budget={config.pipeline.tool_budget}, cache m={config.pipeline.cache_size})",
            ):
                click.echo(f"  - {stage}")
        return
    dataset, _ = _load_dataset(config)
    ontology = Ontology.load(config.ontology) if config.ontology else None
    llm = config.llm.build()
    if llm is None:
        raise LlmUnavailable("verify needs an LLM backend (scripted or http)")
    lexicon = _lexicon(config)
    out = Path(out_dir or config.output_dir)

    def run_one(note):
        return run_pipeline(note, dataset, llm, ontology, config.pipeline, lexicon)

    if parallel > 1 and len(notes) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=parallel) as pool:
            reports = list(pool.map(run_one, notes))
    else:
        reports = [run_one(note) for note in notes]

    for report in reports:
        write_atomic(out / f"report_{report.note_id}.json", report.to_json())
        records = "".join(
            json.dumps(r, sort_keys=True) + "\n" for r in report.entity_records()
        )
        write_atomic(out / f"entities_{report.note_id}.jsonl", records)
        if timings:
            write_atomic(
                out / f"timings_{report.note_id}.json",
                json.dumps(report.timings_s, indent=2, sort_keys=True) + "\n",
            )
        status = f"failed at {report.failed_stage}" if report.failed_stage else "ok"
        click.echo(
            f"note {report.note_id}: {status}; verified {len(report.results)} entities",
            err=True,
        )
    if any(r.failed_stage for r in reports):
        sys.exit(1)


@cli.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["deterministic", "harsh", "lenient"]), default="deterministic", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config (LLM backend for judge modes).")
@click.option("--group-by", "group_by", type=click.Choice(["note_type", "none"]), default="note_type", show_default=True)
@click.option("--micro", is_flag=True, help="Pooled counts instead of per-note macro averaging.")
@click.option("--out", "out_path", type=click.Path(), help="Write machine-readable scores here.")
@_guard
def evaluate(gold_path, pred_path, mode, config_path, group_by, micro, out_path) -> None:
    """Score predictions against gold annotations."""
    from collections import defaultdict

    from .eval import (
        aggregate,
        judge,
        load_gold,
        load_predictions,
        score_note,
        score_note_judged,
    )

    gold_items, totals = load_gold(gold_path)
    predictions = load_predictions(pred_path)
    for line in totals.summary_lines():
        click.echo(line, err=True)

    llm = None
    if mode in ("harsh", "lenient"):
        config = load_run_config(config_path)
        llm = config.llm.build()
        if llm is None:
            raise LlmUnavailable(
                "judge modes need an LLM backend; configure one or use --mode deterministic"
            )
        templates_dir = config.pipeline.templates_dir
    else:
        templates_dir = None

    gold_by_note = defaultdict(list)
    for item in gold_items:
        gold_by_note[item.note_id].append(item)
    pred_by_note = defaultdict(list)
    for record in predictions:
        pred_by_note[record.note_id].append(record)

    scores = []
    verdict_docs = []
    for note_id in sorted(set(gold_by_note) | set(pred_by_note)):
        g = gold_by_note.get(note_id, [])
        p = pred_by_note.get(note_id, [])
        if mode == "deterministic":
            scores.append(score_note(g, p))
        else:
            verdicts = [judge(item, p, mode, llm, templates_dir) for item in g]
            verdict_docs.extend(v.to_dict() for v in verdicts)
            scores.append(score_note_judged(g, p, [v.verdict for v in verdicts]))

    summary = aggregate(scores, group_by_type=(group_by == "note_type"), micro=micro)
    width = max(len(k) for k in summary)
    click.echo(f"{'group':<{width}}  notes  recall  precision  f1")
    for name, row in summary.items():
        click.echo(
            f"{name:<{width}}  {row['notes']:>5}  {row['recall']:.4f}  "
            f"{row['precision']:>9.4f}  {row['f1']:.4f}"
        )
    if out_path:
        doc = {
            "mode": mode,
            "summary": summary,
            "notes": [s.to_dict() for s in scores],
        }
        if verdict_docs:
            doc["judge_verdicts"] = verdict_docs
        write_atomic(out_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


@cli.command()
@click.argument("name")
@click.option("--arg", "args", multiple=True, help="Tool argument as key=value (repeatable).")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config (dataset + patient).")
@click.option("--patient", help="Patient id for patient-scoped tools.")
@click.option("--admission", help="Admission id for patient-scoped tools.")
@_guard
def tool(name, args, config_path, patient, admission) -> None:
    """Invoke one exploration tool by name; NAME 'list' prints all specs."""
    from .tools import REGISTRY, ToolCall, ToolRuntime

    if name == "list":
        click.echo(json.dumps(REGISTRY.schema_doc(), indent=2))
        return
    canonical = REGISTRY.resolve(name)  # raises UnknownTool before any loading
    config = load_run_config(config_path)
    dataset, _ = _load_dataset(config)
    ctx = None
    if patient and admission:
        ctx = dataset.patient_context(patient, admission)
    llm = config.llm.build()
    runtime = ToolRuntime(
        dataset,
        ctx=ctx,
        llm=llm,
        lexicon=_lexicon(config),
        max_rows=config.pipeline.max_result_rows,
        top_values_k=config.pipeline.top_values_k,
    )
    parsed = {}
    for token in args:
        key, eq, value = token.partition("=")
        if not eq:
            raise ConfigError(f"--arg must be key=value, got {token!r}")
        parsed[key.strip()] = value.strip()
    result = REGISTRY.dispatch(ToolCall(name=canonical, args=parsed, call_id="cli"), runtime)
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    if result.status != "ok":
        sys.exit(1)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
