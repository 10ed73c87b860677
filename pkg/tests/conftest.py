"""Shared fixtures: fixture-corpus paths and a deterministic hypothesis profile."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


def build_pipeline(work_root: Path):
    """Fresh Pipeline over the fixture corpus, writing into work_root."""
    from indikg.config import PipelineConfig
    from indikg.pipeline import Pipeline

    config = PipelineConfig.from_file(
        FIXTURES / "config.json",
        overrides={
            "work_dir": str(work_root / "work"),
            "graph_file": str(work_root / "graph.jsonl"),
            "index_file": str(work_root / "index.ikgx"),
            "review_log": str(work_root / "decisions.jsonl"),
        },
    )
    return Pipeline(config)


def run_all_stages(pipeline) -> dict:
    counts = {}
    counts["ingest"] = pipeline.ingest()
    counts["index"] = pipeline.build_index()
    counts["extract"] = pipeline.extract()
    counts["fuse"] = pipeline.fuse_batches()
    return counts


@pytest.fixture(scope="session")
def fused_pipeline(tmp_path_factory):
    """Pipeline that has ingested, indexed, extracted, and fused the fixture corpus."""
    pipeline = build_pipeline(tmp_path_factory.mktemp("fixture-build"))
    run_all_stages(pipeline)
    return pipeline


@pytest.fixture(scope="session")
def asserted_graph(fused_pipeline):
    """The fused fixture graph with every candidate edge accepted by review."""
    from indikg.review import ReviewQueue

    graph = fused_pipeline.load_graph()
    queue = ReviewQueue(graph)
    items = queue.enqueue_batch([e for e in graph.edges() if e.status == "candidate"])
    for item in items:
        queue.submit_decision(item.item_id, "accept", expected_version=1, reviewer_id="fixture")
    return graph
