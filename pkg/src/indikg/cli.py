"""Command-line driver: ingest -> index -> extract -> fuse -> validate/stats/qa/serve.

Exit codes: 0 ok, 1 data error (including constraint violations from
`validate`), 2 configuration error. Every command appends a run manifest to
<work_dir>/manifest.jsonl.
"""

from __future__ import annotations

import json
import sys
import time

import click

from .config import PipelineConfig
from .errors import ConfigError, IndikgError
from .pipeline import Pipeline

_OVERRIDE_OPTIONS = [
    ("--corpus-dir", "corpus_dir", str),
    ("--work-dir", "work_dir", str),
    ("--graph-file", "graph_file", str),
    ("--index-file", "index_file", str),
    ("--retrieval-k", "retrieval_k", int),
    ("--prompt-budget", "prompt_budget", int),
    ("--qa-hop-limit", "qa_hop_limit", int),
    ("--embedding-dimension", "embedding_dimension", int),
    ("--chunk-max-tokens", "chunk_max_tokens", int),
    ("--chunk-overlap-tokens", "chunk_overlap_tokens", int),
    ("--model-provider", "model_provider", str),
    ("--mock-responses-dir", "mock_responses_dir", str),
    ("--serve-host", "serve_host", str),
    ("--serve-port", "serve_port", int),
]


def _with_overrides(fn):
    for flag, key, kind in reversed(_OVERRIDE_OPTIONS):
        fn = click.option(flag, key, type=kind, default=None, help=f"override config key {key}")(fn)
    return fn


def _pipeline(ctx, **overrides) -> Pipeline:
    config = PipelineConfig.from_file(ctx.obj["config_path"], overrides=overrides)
    return Pipeline(config)


def _run_stage(ctx, command: str, fn, **overrides) -> dict:
    started = time.time()
    pipeline = _pipeline(ctx, **overrides)
    counts = fn(pipeline)
    manifest = pipeline.write_manifest(command, counts, started)
    click.echo(json.dumps({"command": command, "counts": counts, "run_id": manifest["run_id"]}))
    return counts


@click.group()
@click.option("--config", "config_path", default="fixtures/config.json", show_default=True,
              help="pipeline configuration file")
@click.pass_context
def main(ctx, config_path):
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@_with_overrides
@click.pass_context
def ingest(ctx, **overrides):
    """Load, preprocess, and chunk the guideline corpus."""
    _run_stage(ctx, "ingest", lambda p: p.ingest(), **overrides)


@main.command()
@_with_overrides
@click.pass_context
def index(ctx, **overrides):
    """Embed chunks and build the dense vector index."""
    _run_stage(ctx, "index", lambda p: p.build_index(), **overrides)


@main.command()
@_with_overrides
@click.pass_context
def extract(ctx, **overrides):
    """Run retrieval-grounded extraction for every configured intent."""
    _run_stage(ctx, "extract", lambda p: p.extract(), **overrides)


@main.command()
@_with_overrides
@click.pass_context
def fuse(ctx, **overrides):
    """Align extraction batches against the ontology and fuse into the graph."""
    counts = _run_stage(ctx, "fuse", lambda p: p.fuse_batches(), **overrides)
    if counts.get("conflicts_escalated"):
        click.echo(f"note: {counts['conflicts_escalated']} conflicts escalated to expert review", err=True)


@main.command()
@_with_overrides
@click.pass_context
def validate(ctx, **overrides):
    """Check graph-level ontology constraints; exit 1 when any are violated."""
    started = time.time()
    pipeline = _pipeline(ctx, **overrides)
    violations = pipeline.validate_graph()
    pipeline.write_manifest("validate", {"violations": len(violations)}, started)
    for v in violations:
        click.echo(f"violation {v.code} [{v.rule_id}]: {v.message}")
    if violations:
        sys.exit(1)
    click.echo("graph satisfies all schema constraints")


@main.command()
@click.option("--out", "out_path", default="-", help="output path, - for stdout")
@_with_overrides
@click.pass_context
def export(ctx, out_path, **overrides):
    """Write the canonical JSON Lines export of the graph."""
    started = time.time()
    pipeline = _pipeline(ctx, **overrides)
    graph = pipeline.load_graph()
    payload = graph.canonical_bytes().decode("utf-8")
    if out_path == "-":
        click.echo(payload, nl=False)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    pipeline.write_manifest("export", {"nodes": len(graph.nodes()), "edges": len(graph.edges())}, started)


@main.command()
@_with_overrides
@click.pass_context
def stats(ctx, **overrides):
    """Print graph coverage statistics."""
    started = time.time()
    pipeline = _pipeline(ctx, **overrides)
    payload = pipeline.graph_stats()
    pipeline.write_manifest("stats", payload, started)
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@main.command()
@click.argument("question")
@click.option("--mode", type=click.Choice(["grounded", "generative"]), default="grounded")
@click.option("--hops", "hop_limit", type=int, default=None)
@_with_overrides
@click.pass_context
def qa(ctx, question, mode, hop_limit, **overrides):
    """Answer an indicator/disease question with citations."""
    started = time.time()
    pipeline = _pipeline(ctx, **overrides)
    answer = pipeline.answer(question, mode=mode, hop_limit=hop_limit)
    pipeline.write_manifest("qa", {"cited_edges": len(answer.cited_edge_ids)}, started)
    click.echo(answer.text)
    if answer.cited_edge_ids:
        click.echo(f"cited edges: {', '.join(answer.cited_edge_ids)}")
    if answer.cited_chunk_ids:
        click.echo(f"cited chunks: {', '.join(answer.cited_chunk_ids)}")


@main.command()
@_with_overrides
@click.pass_context
def serve(ctx, **overrides):
    """Host the review and QA HTTP APIs."""
    import uvicorn

    from .service import ServiceRuntime, create_app

    pipeline = _pipeline(ctx, **overrides)
    runtime = ServiceRuntime(pipeline)
    app = create_app(runtime)
    uvicorn.run(app, host=pipeline.config.serve_host, port=pipeline.config.serve_port)


def entrypoint() -> None:
    try:
        main(standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except IndikgError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
