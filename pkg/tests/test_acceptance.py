"""Acceptance suite: one test per release criterion, each timed against its
runtime budget and printing a PASS line. Run with `pytest tests/test_acceptance.py -v -s`.
"""

from __future__ import annotations

import random
import time
from decimal import Decimal
from fractions import Fraction

import pytest

from indikg.embeddings import HashingEmbedder, unit_normalized
from indikg.errors import ParseError
from indikg.extraction import align_candidates
from indikg.fusion import AliasTable, SourcePriority, fuse
from indikg.graph import GraphStore, Node
from indikg.ontology import check_graph_constraints, default_schema
from indikg.pipeline import Pipeline, _candidate_from_json, _read_jsonl
from indikg.qa import Question, answer_question, retrieve_context
from indikg.ranges import (
    ClosedInterval,
    Compound,
    LessThan,
    Qualifier,
    Qualitative,
    Quantity,
    Stratum,
    parse_reference_range,
    render,
)
from indikg.review import ReviewDecision, ReviewQueue, compute_stats
from indikg.vindex import VectorIndex

from conftest import build_pipeline, run_all_stages
from table1_expected import (
    DISTINCT_GUIDELINES,
    EXPECTED,
    RANGE_STRINGS,
    SYSTEMS,
    two_hop_join_oracle,
)


class Budget:
    def __init__(self, criterion: int, seconds: float, summary: str):
        self.criterion = criterion
        self.seconds = seconds
        self.summary = summary

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is None:
            assert elapsed < self.seconds, f"criterion {self.criterion} took {elapsed:.2f}s >= {self.seconds}s"
            print(f"ACCEPTANCE {self.criterion} PASS ({elapsed:.2f}s < {self.seconds:.0f}s): {self.summary}")
        else:
            print(f"ACCEPTANCE {self.criterion} FAIL ({elapsed:.2f}s): {self.summary}")
        return False


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    pipeline = build_pipeline(tmp_path_factory.mktemp("acceptance"))
    run_all_stages(pipeline)
    return pipeline


def q(value: str, unit: str) -> Quantity:
    return Quantity(Decimal(value), unit)


def test_criterion_1_range_parser_corpus():
    """All 20 range strings parse, round-trip, and the 7 structural spot-checks hold."""
    with Budget(1, 1.0, "range-parser corpus total, round-trips, 7 spot checks"):
        assert len(RANGE_STRINGS) == 20
        for text in RANGE_STRINGS:
            rng = parse_reference_range(text)  # total over the corpus
            assert parse_reference_range(render(rng)) == rng, text

        # spot check 1: plain interval
        assert parse_reference_range("2–10 mU/L").strata == (
            Stratum(Qualifier.none(), ClosedInterval(q("2", "mU/L"), q("10", "mU/L"))),
        )
        # spot check 2: sex-stratified intervals
        assert parse_reference_range("Male: 300–1000 ng/L Female: 200–800 ng/L").strata == (
            Stratum(Qualifier.sex("male"), ClosedInterval(q("300", "ng/L"), q("1000", "ng/L"))),
            Stratum(Qualifier.sex("female"), ClosedInterval(q("200", "ng/L"), q("800", "ng/L"))),
        )
        # spot check 3: one-sided bound
        assert parse_reference_range("<200 mg/dL").single() == Stratum(
            Qualifier.none(), LessThan(q("200", "mg/dL"))
        )
        # spot check 4: qualitative
        assert parse_reference_range("Negative").single() == Stratum(
            Qualifier.none(), Qualitative("Negative")
        )
        # spot check 5: systolic/diastolic compound
        assert parse_reference_range("<120/80 mmHg").single() == Stratum(
            Qualifier.none(),
            Compound((("systolic", LessThan(q("120", "mmHg"))), ("diastolic", LessThan(q("80", "mmHg"))))),
        )
        # spot check 6: period qualifier
        assert parse_reference_range("24 h: <150 mg").single() == Stratum(
            Qualifier.period(24, "h"), LessThan(q("150", "mg"))
        )
        # spot check 7: empty input
        with pytest.raises(ParseError):
            parse_reference_range("")


def test_criterion_2_precision_reproduction():
    """240 reviewed / 212 accepted gives exactly 212/240, displayed as 88%."""
    with Budget(2, 1.0, "precision 212/240 exact, displays 88%"):
        decisions = [
            ReviewDecision(f"d{i:03d}", f"item{i:03d}", "accept" if i < 212 else "reject", "expert")
            for i in range(240)
        ]
        stats = compute_stats(decisions)
        assert stats.reviewed == 240
        assert stats.accepted == 212
        assert stats.precision == Fraction(212, 240)  # exact rational, zero tolerance
        assert stats.percent_display() == "88%"


def test_criterion_3_end_to_end_fixture_run(tmp_path):
    """Ingest -> extract (mock) -> fuse reproduces the fixture indicator table."""
    with Budget(3, 30.0, "end-to-end fixture run: 20 indicators, 4x5 systems, ranges, edges"):
        pipeline = build_pipeline(tmp_path)
        run_all_stages(pipeline)
        graph = pipeline.load_graph()
        stats = graph.stats()
        assert stats["nodes_by_type"]["ClinicalIndicator"] == 20
        assert set(stats["indicators_by_system"]) == SYSTEMS
        assert all(count == 5 for count in stats["indicators_by_system"].values())
        assert stats["guidelines_covered"] == len(DISTINCT_GUIDELINES) == 15

        for indicator, (system, org, range_text, direct, indirect) in EXPECTED.items():
            nodes = graph.find(entity_type="ClinicalIndicator", label=indicator)
            assert len(nodes) == 1, indicator
            node = nodes[0]
            assert node.system_tag == system
            # parsed reference range, canonically rendered
            att = node.attributes.get("reference_range")
            assert att is not None, indicator
            assert parse_reference_range(att.value) == parse_reference_range(range_text)
            # guideline provenance on the attribute and on every edge
            assert att.provenance, indicator
            prov_orgs = {graph.get_document(p.doc_id).issuing_org for p in att.provenance}
            assert org in prov_orgs
            edges = [e for e in graph.edges() if e.subject == node.entity_id and e.status != "retracted"]
            assert all(e.provenance for e in edges)
            direct_got = {
                graph.get_node(e.object).label.casefold()
                for e in edges
                if e.relation == "indicates_risk_of"
            }
            indirect_got = {
                graph.get_node(e.object).label.casefold()
                for e in edges
                if e.relation == "indirectly_associated_with"
            }
            assert direct_got == direct, indicator
            assert indirect_got == indirect, indicator
            assert len(direct_got) >= 1 and len(indirect_got) >= 1


def test_criterion_4_retrieval_correctness():
    """search == brute_force_search on 1000 random chunks x 50 queries; rank-1
    self-retrieval for every chunk; scores within [-1, 1] +- 1e-9."""
    with Budget(4, 10.0, "retrieval: oracle equivalence, self-retrieval, score bounds"):
        dim = 256
        rng = random.Random(20260808)
        index = VectorIndex(dim)
        vectors = []
        for i in range(1000):
            v = unit_normalized([rng.gauss(0.0, 1.0) for _ in range(dim)])
            vectors.append((f"synthetic:{i:04d}", v))
            index.add_chunk(f"synthetic:{i:04d}", v)

        for _ in range(50):
            query = unit_normalized([rng.gauss(0.0, 1.0) for _ in range(dim)])
            fast = index.search(query, k=10)
            slow = index.brute_force_search(query, k=10)
            assert [h.chunk_id for h in fast] == [h.chunk_id for h in slow]
            for hit in fast:
                assert -1.0 - 1e-9 <= hit.score <= 1.0 + 1e-9

        for chunk_id, v in vectors:
            top = index.search(v, k=1)[0]
            assert top.chunk_id == chunk_id
            assert abs(top.score - 1.0) <= 1e-9


def test_criterion_5_fusion_properties(built):
    """100 batch permutations fuse to canonically equal graphs; double fusion
    is a no-op; report counts reconcile with no silent loss."""
    with Budget(5, 20.0, "fusion permutation invariance, idempotence, count reconciliation"):
        pipeline = built
        documents = pipeline.load_documents()
        batches = list(_read_jsonl(pipeline.work_dir / "batches.jsonl"))
        candidates = [_candidate_from_json(c) for raw in batches for c in raw["candidates"]]
        aligned, rejected = align_candidates(pipeline.schema, candidates)
        assert len(aligned) + len(rejected) == len(candidates)

        def fuse_into_empty(batch):
            graph = GraphStore()
            report = fuse(
                batch, graph, pipeline.aliases, pipeline.priority, pipeline.schema,
                extractor=("indicator-extraction", 1, "mock"), documents=documents,
                unit_table=pipeline.unit_table,
            )
            return graph, report

        baseline_graph, baseline_report = fuse_into_empty(aligned)
        assert baseline_report.reconciles()
        baseline_bytes = baseline_graph.canonical_bytes()

        rng = random.Random(99)
        for _ in range(100):
            shuffled = aligned[:]
            rng.shuffle(shuffled)
            permuted_graph, permuted_report = fuse_into_empty(shuffled)
            assert permuted_graph.canonical_bytes() == baseline_bytes
            assert permuted_report.reconciles()
            assert permuted_report.input_count == len(aligned)

        # double fusion: re-fusing the same batch changes nothing
        second = fuse(
            aligned, baseline_graph, pipeline.aliases, pipeline.priority, pipeline.schema,
            extractor=("indicator-extraction", 1, "mock"), documents=documents,
            unit_table=pipeline.unit_table,
        )
        assert baseline_graph.canonical_bytes() == baseline_bytes
        assert second.duplicates_removed == second.input_count - second.merged_count


def test_criterion_6_constraint_enforcement(built):
    """An unlinked rehabilitation indicator triggers exactly one required_link
    violation; the clean fixture graph triggers none."""
    with Budget(6, 1.0, "required_link constraint fires once on injected node, zero on clean graph"):
        pipeline = built
        schema = pipeline.schema
        clean = pipeline.load_graph()
        assert check_graph_constraints(schema, clean) == []

        injected = pipeline.load_graph()
        indicator = injected.find(entity_type="ClinicalIndicator", label="Cholesterol")[0]
        injected.upsert_node(
            Node(
                entity_id="nrehab0001",
                entity_type="RehabilitationIndicator",
                label="Six-minute walk distance",
                attributes=dict(indicator.attributes),  # satisfies attribute_required
            )
        )
        violations = check_graph_constraints(schema, injected)
        required_link = [v for v in violations if v.code == "required_link"]
        assert len(required_link) == 1
        assert required_link[0].subject == "nrehab0001"
        assert len(violations) == 1


def test_criterion_7_grounded_qa(built):
    """1-hop grounded answers equal each indicator's disease sets with citations
    resolving to asserted edges; 2-hop join matches the brute-force oracle."""
    with Budget(7, 5.0, "grounded QA: 20 one-hop answers exact, 2-hop join vs oracle"):
        pipeline = built
        graph = pipeline.load_graph()
        queue = ReviewQueue(graph)
        for item in queue.enqueue_batch([e for e in graph.edges() if e.status == "candidate"]):
            queue.submit_decision(item.item_id, "accept", expected_version=1, reviewer_id="expert")
        index = VectorIndex.load(pipeline.config.resolve(pipeline.config.index_file))

        for indicator, (_, _, _, direct, indirect) in EXPECTED.items():
            question = Question(text=f"Which diseases are associated with {indicator}?")
            bundle = retrieve_context(question, graph, index, pipeline.embedder, k=8, hop_limit=1)
            answer = answer_question(question, bundle, graph)
            got_direct = {
                f.object_label.casefold() for f in answer.facts if f.relation == "indicates_risk_of"
            }
            got_indirect = {
                f.object_label.casefold()
                for f in answer.facts
                if f.relation == "indirectly_associated_with"
            }
            assert got_direct == direct, indicator
            assert got_indirect == indirect, indicator
            assert answer.cited_edge_ids
            for eid in answer.cited_edge_ids:
                edge = graph.get_edge(eid)
                assert edge is not None and edge.status == "asserted"

        for seed in ("CEA", "High-density lipoprotein", "Cholesterol", "Glomerular filtration rate"):
            question = Question(text=f"Which indicators relate to diseases that {seed} also relates to?")
            bundle = retrieve_context(question, graph, index, pipeline.embedder, k=8, hop_limit=2)
            two_hop = {
                graph.get_node(nid).label
                for nid, d in bundle.distances.items()
                if d == 2 and graph.get_node(nid).entity_type == "ClinicalIndicator"
            }
            assert two_hop == two_hop_join_oracle(seed), seed


def test_criterion_8_persistence(built, tmp_path):
    """Graph export/import round-trips to canonical equality; the index file
    round-trips bit-exactly."""
    with Budget(8, 5.0, "graph canonical round-trip, index file bit-exact round-trip"):
        pipeline = built
        graph = pipeline.load_graph()
        export_path = tmp_path / "roundtrip.jsonl"
        graph.save(export_path, schema_version=pipeline.schema.version)
        reloaded = GraphStore.load(export_path)
        assert reloaded.equal_canonical(graph)
        again = tmp_path / "again.jsonl"
        reloaded.save(again, schema_version=pipeline.schema.version)
        assert again.read_bytes() == export_path.read_bytes()

        index_src = pipeline.config.resolve(pipeline.config.index_file)
        loaded = VectorIndex.load(index_src)
        resaved = tmp_path / "index.ikgx"
        loaded.save(resaved)
        assert resaved.read_bytes() == index_src.read_bytes()
