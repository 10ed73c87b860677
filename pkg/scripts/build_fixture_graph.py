#!/usr/bin/env python3
"""Build the fixture knowledge graph end to end and show what came out.

Runs ingest -> index -> extract (mock provider) -> fuse, accepts every
candidate edge as a stand-in reviewer, validates constraints, prints stats,
and answers two demo questions.

Usage: python3 scripts/build_fixture_graph.py [--workdir build/demo]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from indikg.config import PipelineConfig
from indikg.ontology import check_graph_constraints
from indikg.pipeline import Pipeline
from indikg.review import ReviewQueue
from indikg.qa import Question, answer_question, retrieve_context
from indikg.vindex import VectorIndex


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=str(REPO / "build" / "demo"))
    args = parser.parse_args()
    work = Path(args.workdir)

    config = PipelineConfig.from_file(
        REPO / "fixtures" / "config.json",
        overrides={
            "work_dir": str(work / "work"),
            "graph_file": str(work / "graph.jsonl"),
            "index_file": str(work / "index.ikgx"),
            "review_log": str(work / "decisions.jsonl"),
        },
    )
    pipeline = Pipeline(config)
    print("ingest:", pipeline.ingest())
    print("index:", pipeline.build_index())
    print("extract:", pipeline.extract())
    print("fuse:", pipeline.fuse_batches())

    graph = pipeline.load_graph()
    queue = ReviewQueue(graph, log_path=config.resolve(config.review_log))
    items = queue.enqueue_batch([e for e in graph.edges() if e.status == "candidate"])
    for item in items:
        queue.submit_decision(item.item_id, "accept", expected_version=1, reviewer_id="demo-expert")
    graph.save(config.resolve(config.graph_file), schema_version=pipeline.schema.version)
    stats = queue.stats()
    print(f"review: accepted {stats.accepted}/{stats.reviewed} ({stats.percent_display()})")

    violations = check_graph_constraints(pipeline.schema, graph)
    print(f"constraints: {len(violations)} violations")
    print("stats:", json.dumps(graph.stats(), indent=2))

    index = VectorIndex.load(config.resolve(config.index_file))
    for text, hops in [
        ("Which diseases are associated with HDL?", 1),
        ("Which indicators relate to diseases that Cholesterol also relates to?", 2),
    ]:
        question = Question(text=text)
        bundle = retrieve_context(question, graph, index, pipeline.embedder, k=8, hop_limit=hops)
        answer = answer_question(question, bundle, graph)
        print(f"\nQ: {text}\nA: {answer.text}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
