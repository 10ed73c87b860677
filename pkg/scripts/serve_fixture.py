#!/usr/bin/env python3
"""Serve the review + QA API over a freshly built fixture graph.

Most candidate edges are pre-asserted so the queue starts with a small,
demo-sized number of pending items (default 5). Used by the frontend
integration tests and for manual UI work.

Usage: python3 scripts/serve_fixture.py [--port 8123] [--pending 5]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

import uvicorn

from indikg.config import PipelineConfig
from indikg.pipeline import Pipeline
from indikg.service import ServiceRuntime, create_app


def build_runtime(workdir: Path, pending: int) -> ServiceRuntime:
    config = PipelineConfig.from_file(
        REPO / "fixtures" / "config.json",
        overrides={
            "work_dir": str(workdir / "work"),
            "graph_file": str(workdir / "graph.jsonl"),
            "index_file": str(workdir / "index.ikgx"),
            "review_log": str(workdir / "decisions.jsonl"),
        },
    )
    pipeline = Pipeline(config)
    pipeline.ingest()
    pipeline.build_index()
    pipeline.extract()
    pipeline.fuse_batches()

    graph = pipeline.load_graph()
    candidates = sorted((e for e in graph.edges() if e.status == "candidate"), key=lambda e: e.edge_id)
    for edge in candidates[pending:]:
        graph.set_edge_status(edge.edge_id, "asserted")
    graph.save(config.resolve(config.graph_file), schema_version=pipeline.schema.version)
    return ServiceRuntime(Pipeline(config))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8123)
    parser.add_argument("--pending", type=int, default=5)
    parser.add_argument("--workdir", default=str(REPO / "build" / "serve-demo"))
    args = parser.parse_args()

    runtime = build_runtime(Path(args.workdir), args.pending)
    print(f"queue: {runtime.queue.pending_count()} pending items")
    uvicorn.run(create_app(runtime), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
