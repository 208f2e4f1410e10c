"""Command-line pipeline driver.

Exit codes: 0 success, 2 invalid configuration (the offending key is named),
3 a phase was requested before its prerequisites ran. Errors are emitted as
one JSON object on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .config import PipelineConfig
from .errors import ConfigError, MailMineError, PhaseOrderError
from .export import build_event_log, mine_dfg, write_csv, write_xes
from .ingest import parse_csv, parse_mbox, write_csv as write_corpus_csv
from .labeling import apply_labels_file, classify, propose_medoids
from .runstate import RunState

EXIT_CONFIG = 2
EXIT_PHASE = 3


def _fail(exc: Exception, code: int) -> None:
    click.echo(json.dumps({"error": str(exc), "type": type(exc).__name__}), err=True)
    sys.exit(code)


def _load_config(path: str | None) -> PipelineConfig:
    try:
        return PipelineConfig.load(path) if path else PipelineConfig()
    except ConfigError as exc:
        _fail(exc, EXIT_CONFIG)


def _load_run(path: str) -> RunState:
    try:
        return RunState.load(path)
    except FileNotFoundError as exc:
        _fail(PhaseOrderError(f"run file {path} not found; run `ingest` first"), EXIT_PHASE)
    except ConfigError as exc:
        _fail(exc, EXIT_CONFIG)
    except MailMineError as exc:
        _fail(exc, 1)


@click.group()
@click.version_option(__version__)
@click.option("--run", "run_path", default="run.json", show_default=True,
              help="Path of the pipeline run file.")
@click.option("--config", "config_path", default=None, help="JSON pipeline configuration.")
@click.pass_context
def main(ctx: click.Context, run_path: str, config_path: str | None) -> None:
    """Mine process event logs from a raw email log."""
    ctx.ensure_object(dict)
    ctx.obj["run_path"] = run_path
    ctx.obj["config_path"] = config_path


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.option("--mbox", is_flag=True, help="Treat the source as an RFC-4155 mbox.")
@click.option("--to-csv", default=None, help="Also write the parsed corpus to this CSV.")
@click.pass_context
def ingest(ctx, source: str, mbox: bool, to_csv: str | None) -> None:
    """Parse SOURCE into a corpus and start a new run file."""
    config = _load_config(ctx.obj["config_path"])
    try:
        if mbox:
            corpus = parse_mbox(source)
            csv_path = to_csv or str(Path(source).with_suffix(".corpus.csv"))
            write_corpus_csv(corpus, csv_path)
            state = RunState.create(csv_path, config)
            if corpus.warnings:
                click.echo(f"skipped {corpus.warnings} malformed message(s)", err=True)
        else:
            state = RunState.create(source, config)
            if to_csv:
                write_corpus_csv(state.corpus, to_csv)
        state.save(ctx.obj["run_path"])
    except ConfigError as exc:
        _fail(exc, EXIT_CONFIG)
    except MailMineError as exc:
        _fail(exc, 1)
    click.echo(f"ingested {len(state.corpus)} emails -> {ctx.obj['run_path']}")


@main.command()
@click.option("--k", type=int, default=None, help="Number of topic clusters.")
@click.option("--height", type=float, default=None, help="Dendrogram cut height.")
@click.pass_context
def topics(ctx, k: int | None, height: float | None) -> None:
    """Cluster the corpus into process topics."""
    state = _load_run(ctx.obj["run_path"])
    try:
        result = state.run_topics(k=k, height=height)
        state.save(ctx.obj["run_path"])
    except MailMineError as exc:
        _fail(exc, 1)
    for tc in result.clusters:
        click.echo(f"topic {tc.cluster_id}: {len(tc.email_ids)} emails {list(tc.email_ids)}")


@main.command()
@click.option("--topic", type=int, default=None, help="Restrict to one topic cluster.")
@click.option("--k", type=int, default=None, help="Number of instances.")
@click.option("--height", type=float, default=None)
@click.pass_context
def instances(ctx, topic: int | None, k: int | None, height: float | None) -> None:
    """Discover process instances inside topic clusters."""
    state = _load_run(ctx.obj["run_path"])
    try:
        state.run_instances(topic_id=topic, k=k, height=height)
        state.save(ctx.obj["run_path"])
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)
    except MailMineError as exc:
        _fail(exc, 1)
    for topic_id, entry in sorted(state.instances.items()):
        for inst in entry.instances:
            click.echo(f"topic {topic_id} instance {inst.instance_id}: {list(inst.email_ids)}")


@main.command()
@click.option("--topic", type=int, required=True)
@click.option("--k", type=int, default=None, help="Force this k instead of the silhouette pick.")
@click.option("--seed-instance", type=int, default=None, help="Instance id seeding the centroids.")
@click.pass_context
def activities(ctx, topic: int, k: int | None, seed_instance: int | None) -> None:
    """Cluster a topic's emails into activities with seeded k-means."""
    state = _load_run(ctx.obj["run_path"])
    try:
        result = state.run_activities(topic, k=k, seed_override=seed_instance)
        state.save(ctx.obj["run_path"])
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)
    except MailMineError as exc:
        _fail(exc, 1)
    click.echo(f"N={result.stats_average} sizes={result.stats_sizes} k={result.chosen_k}")
    for cluster in result.clusters:
        click.echo(
            f"activity {cluster.activity_id}: emails {list(cluster.email_ids)} medoid {cluster.medoid_id}"
        )


@main.command()
@click.option("--labels-file", type=click.Path(exists=True), default=None,
              help="CSV of activity_id,label rows; skips the interactive prompt.")
@click.pass_context
def label(ctx, labels_file: str | None) -> None:
    """Attach activity names, either from a file or by labeling medoids."""
    state = _load_run(ctx.obj["run_path"])
    try:
        if labels_file:
            count = apply_labels_file(state, labels_file)
            click.echo(f"applied {count} labels")
        else:
            for activity_id, email in propose_medoids(state):
                current = state.label_of(activity_id)
                if current:
                    continue
                click.echo(f"--- activity {activity_id} medoid (email {email.id}) ---")
                click.echo(f"subject: {email.subject}")
                click.echo(f"from: {email.sender} at {email.timestamp}")
                click.echo(email.body)
                text = click.prompt("label")
                state.assign_label(activity_id, text, labeled_by="user")
        state.save(ctx.obj["run_path"])
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)
    except MailMineError as exc:
        _fail(exc, 1)


@main.command()
@click.option("--email", "email_csv", type=click.Path(exists=True), required=True,
              help="CSV (corpus schema) with the emails to classify.")
@click.option("--topic", type=int, default=None)
@click.pass_context
def classify_cmd(ctx, email_csv: str, topic: int | None) -> None:
    """Recommend an activity for new emails."""
    state = _load_run(ctx.obj["run_path"])
    try:
        if not state.activity_labels:
            raise PhaseOrderError("no labels yet; run `label` first")
        corpus = parse_csv(email_csv)
        results = [classify(e, state, topic) for e in corpus.emails]
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)
    except MailMineError as exc:
        _fail(exc, 1)
    for r in results:
        click.echo(
            json.dumps(
                {
                    "email_id": r.email_id,
                    "activity_id": r.predicted_activity_id,
                    "label": r.predicted_label,
                    "distance": r.distance_to_centroid,
                    "confidence": r.confidence,
                    "unclassifiable": r.unclassifiable,
                }
            )
        )


main.add_command(classify_cmd, name="classify")


@main.command()
@click.option("--topic", type=int, required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "xes", "dot"]), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
def export(ctx, topic: int, fmt: str, out: str) -> None:
    """Write the event log (csv/xes) or the directly-follows graph (dot)."""
    state = _load_run(ctx.obj["run_path"])
    try:
        log = build_event_log(state, topic)
        if fmt == "csv":
            write_csv(log, out)
        elif fmt == "xes":
            write_xes(log, out, state.corpus)
        else:
            Path(out).write_text(mine_dfg(log).to_dot(), "utf-8")
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)
    except MailMineError as exc:
        _fail(exc, 1)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--gold", type=click.Path(exists=True), required=True,
              help="CSV of email_id,cluster gold assignments.")
@click.option("--phase", type=click.Choice(["topics", "instances", "activities"]), default="topics")
@click.option("--topic", type=int, default=None, help="Topic id for instance/activity phases.")
@click.pass_context
def report(ctx, gold: str, phase: str, topic: int | None) -> None:
    """Score a phase's clustering against a gold-standard file."""
    import csv as _csv

    from .cluster.hierarchy import FlatClustering
    from .cluster.metrics import pair_f_measure, purity, rand_index

    state = _load_run(ctx.obj["run_path"])
    gold_map: dict[int, int] = {}
    with open(gold, newline="", encoding="utf-8") as fh:
        for row in _csv.reader(fh):
            if not row or row[0].strip().lower() == "email_id":
                continue
            gold_map[int(row[0])] = int(row[1])
    try:
        if phase == "topics":
            if state.topics is None:
                raise PhaseOrderError("topics phase has not run")
            pred_map = {i: c.cluster_id for c in state.topics.clusters for i in c.email_ids}
        elif phase == "instances":
            if topic is None or topic not in state.instances:
                raise PhaseOrderError("instances phase has not run for this topic")
            pred_map = {
                i: inst.instance_id
                for inst in state.instances[topic].instances
                for i in inst.email_ids
            }
        else:
            if topic is None or topic not in state.activities:
                raise PhaseOrderError("activities phase has not run for this topic")
            pred_map = {
                i: c.activity_id
                for c in state.activities[topic].clusters
                for i in c.email_ids
            }
    except PhaseOrderError as exc:
        _fail(exc, EXIT_PHASE)

    shared = sorted(set(pred_map) & set(gold_map))
    if not shared:
        _fail(MailMineError("gold file shares no email ids with the phase output"), 1)

    def dense(mapping):
        values = sorted({mapping[i] for i in shared})
        remap = {v: n for n, v in enumerate(values)}
        return FlatClustering(assignments={i: remap[mapping[i]] for i in shared}, k=len(values))

    pred, gold_flat = dense(pred_map), dense(gold_map)
    click.echo(
        json.dumps(
            {
                "emails_scored": len(shared),
                "purity": purity(pred, gold_flat),
                "rand_index": rand_index(pred, gold_flat),
                "f_measure": pair_f_measure(pred, gold_flat),
            }
        )
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Directory with the labeling-studio static build.")
@click.pass_context
def serve(ctx, host: str, port: int, ui_dir: str | None) -> None:
    """Serve the JSON API (and the labeling UI) for the run file."""
    import uvicorn

    from .service import create_app

    state = _load_run(ctx.obj["run_path"])
    app = create_app(state, ctx.obj["run_path"], ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
