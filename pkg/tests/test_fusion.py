"""Entity normalization, deduplication, conflicts, and fuse() invariants."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from indikg.extraction import CandidateAttribute, CandidateTriple
from indikg.fusion import (
    AliasTable,
    CanonicalEntity,
    Conflict,
    Contender,
    NormalizedTriple,
    SourcePriority,
    dedupe,
    entity_id_for,
    fuse,
    normalize_mention,
    resolve_conflict,
)
from indikg.graph import DocumentRecord, GraphStore, Provenance
from indikg.ontology import default_schema

ALIASES = AliasTable({"High-density lipoprotein": ["HDL", "HDL-C"], "Hypertension": []})
PRIORITY = SourcePriority(["World Health Organization", "American Heart Association", "Org C"])


class TestNormalizeMention:
    def test_alias_hit(self):
        entity = normalize_mention("HDL", "ClinicalIndicator", ALIASES)
        assert entity.label == "High-density lipoprotein"
        assert not entity.provisional
        assert "HDL" in entity.aliases

    def test_folding_same_entity_id(self):
        a = normalize_mention("  hypertension ", "Disease", ALIASES)
        b = normalize_mention("Hypertension", "Disease", ALIASES)
        assert a.entity_id == b.entity_id

    def test_unseen_mention_provisional_preserves_surface(self):
        entity = normalize_mention("CA19-9", "ClinicalIndicator", AliasTable.empty())
        assert entity.provisional
        assert entity.label == "CA19-9"

    def test_type_separates_identity(self):
        a = normalize_mention("Cholesterol", "ClinicalIndicator", ALIASES)
        b = normalize_mention("Cholesterol", "Medication", ALIASES)
        assert a.entity_id != b.entity_id

    def test_punctuation_stripped(self):
        a = normalize_mention("(Gout)", "Disease", ALIASES)
        b = normalize_mention("Gout", "Disease", ALIASES)
        assert a.entity_id == b.entity_id


def _entity(label: str, etype: str = "ClinicalIndicator") -> CanonicalEntity:
    return CanonicalEntity(entity_id_for(etype, label), label, etype, frozenset({label}))


def _nt(subj: str, rel: str, obj: str, provs: tuple[str, ...] = ("dA:0000",)) -> NormalizedTriple:
    return NormalizedTriple(
        subject=_entity(subj),
        relation=rel,
        object=_entity(obj, "Disease"),
        attributes=(),
        provenance=tuple(Provenance(p.rpartition(":")[0], p) for p in provs),
    )


class TestDedupe:
    def test_same_triple_two_guidelines(self):
        out = dedupe([_nt("TSH", "indicates_risk_of", "Thyroid diseases", ("dA:0000",)),
                      _nt("TSH", "indicates_risk_of", "Thyroid diseases", ("dB:0000",))])
        assert len(out) == 1
        assert len(out[0].provenance) == 2

    def test_empty(self):
        assert dedupe([]) == []

    def test_permutations_give_set_equal_output(self):
        triples = [
            _nt("TSH", "indicates_risk_of", "Thyroid diseases", ("dA:0000",)),
            _nt("TSH", "indicates_risk_of", "Thyroid diseases", ("dB:0000",)),
            _nt("HDL", "indicates_risk_of", "Coronary heart disease", ("dC:0000",)),
            _nt("HDL", "indirectly_associated_with", "Obesity", ("dC:0001",)),
        ]
        rng = random.Random(1)
        baseline = {t.key: t for t in dedupe(triples)}
        for _ in range(100):
            shuffled = triples[:]
            rng.shuffle(shuffled)
            got = {t.key: t for t in dedupe(shuffled)}
            assert got == baseline


class TestResolveConflict:
    def _conflict(self, orgs: list[str]) -> Conflict:
        return Conflict(
            subject_id="n1",
            subject_label="Cholesterol",
            name="reference_range",
            contenders=[Contender(f"v{i}", None, (), org) for i, org in enumerate(orgs)],
        )

    def test_rank_order_wins(self):
        c = resolve_conflict(self._conflict(["Org C", "World Health Organization"]), PRIORITY)
        assert c.resolution == "resolved"
        assert c.winner == 1

    def test_same_org_escalates(self):
        c = resolve_conflict(self._conflict(["Org C", "Org C"]), PRIORITY)
        assert c.resolution == "escalated"

    def test_unlisted_orgs_escalate(self):
        c = resolve_conflict(self._conflict(["Nobody A", "Nobody B"]), PRIORITY)
        assert c.resolution == "escalated"


def _candidate(
    subject: str,
    relation: str,
    obj: str,
    chunk: str,
    range_text: str | None = None,
) -> CandidateTriple:
    attrs = (CandidateAttribute("reference_range", range_text),) if range_text else ()
    return CandidateTriple(
        subject_mention=subject,
        subject_type="ClinicalIndicator",
        relation=relation,
        object_mention=obj,
        object_type="Disease",
        attributes=attrs,
        provenance=(chunk,),
        status="aligned",
    )


def _align(cands):
    from indikg.extraction import align_candidates

    aligned, rejected = align_candidates(default_schema(), cands)
    assert rejected == []
    return aligned


DOCS = {
    "dEsc": DocumentRecord("dEsc", "Lipoprotein guide", "European Society of Cardiology", "Circulatory"),
    "dAha": DocumentRecord("dAha", "Cholesterol guide", "American Heart Association", "Circulatory"),
    "dWho": DocumentRecord("dWho", "BP report", "World Health Organization", "Circulatory"),
}


class TestFuse:
    def _batch(self):
        return _align(
            [
                _candidate("HDL", "indicates_risk_of", "Coronary heart disease", "dEsc:0000", "Male: >40 mg/dL Female: >50 mg/dL"),
                _candidate("HDL", "indirectly_associated_with", "Obesity", "dEsc:0000"),
                _candidate("HDL", "indirectly_associated_with", "insulin resistance", "dEsc:0000"),
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0000", "<200 mg/dL"),
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0000", "<200 mg/dL"),
            ]
        )

    def test_fuse_builds_nodes_edges_attributes(self):
        graph = GraphStore()
        report = fuse(self._batch(), graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        assert report.reconciles()
        assert report.duplicates_removed == 1
        assert report.conflicts == []
        hdl = graph.find(label="hdl")[0]
        assert hdl.label == "High-density lipoprotein"
        assert hdl.system_tag == "Circulatory"
        assert hdl.attributes["reference_range"].value == "Male: >40 mg/dL Female: >50 mg/dL"
        assert len(graph.find(relation="indicates_risk_of")) == 2
        assert all(e.status == "candidate" for e in graph.edges())

    def test_fuse_idempotent(self):
        graph = GraphStore()
        batch = self._batch()
        fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        before = graph.canonical_bytes()
        report = fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        assert graph.canonical_bytes() == before
        assert report.duplicates_removed >= 1

    def test_fuse_order_invariant(self):
        batch = self._batch()
        rng = random.Random(7)
        baseline = None
        for _ in range(30):
            shuffled = batch[:]
            rng.shuffle(shuffled)
            graph = GraphStore()
            fuse(shuffled, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
            payload = graph.canonical_bytes()
            if baseline is None:
                baseline = payload
            assert payload == baseline

    def test_equal_after_unit_conversion_merges(self):
        # children's growth hormone bound, stated in µg/L and ng/L
        batch = _align(
            [
                _candidate("Growth Hormone", "indicates_risk_of", "Gigantism", "dEsc:0000", "<20 µg/L"),
                _candidate("Growth Hormone", "indicates_risk_of", "Gigantism", "dAha:0000", "<20000 ng/L"),
            ]
        )
        graph = GraphStore()
        report = fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        assert report.conflicts == []
        gh = graph.find(label="growth hormone")[0]
        assert gh.attributes["reference_range"].value in ("<20 µg/L", "<20000 ng/L")
        assert len(gh.attributes["reference_range"].provenance) == 2

    def test_contradictory_range_conflict_resolved_by_priority(self):
        batch = _align(
            [
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0000", "<200 mg/dL"),
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dWho:0000", "<190 mg/dL"),
            ]
        )
        graph = GraphStore()
        report = fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        assert len(report.conflicts) == 1
        conflict = report.conflicts[0]
        assert conflict.resolution == "resolved"
        assert len(conflict.contenders) == 2
        chol = graph.find(label="cholesterol")[0]
        assert chol.attributes["reference_range"].value == "<190 mg/dL"  # WHO outranks AHA

    def test_tied_sources_escalate_and_keep_existing(self):
        batch = _align(
            [
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0000", "<200 mg/dL"),
            ]
        )
        graph = GraphStore()
        fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        second = _align(
            [
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0001", "<195 mg/dL"),
                _candidate("Cholesterol", "indicates_risk_of", "Atherosclerosis", "dAha:0002", "<185 mg/dL"),
            ]
        )
        report = fuse(second, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        assert report.conflicts_escalated == 1
        chol = graph.find(label="cholesterol")[0]
        assert chol.attributes["reference_range"].value == "<200 mg/dL"

    def test_provenance_conservation(self):
        batch = self._batch()
        graph = GraphStore()
        fuse(batch, graph, ALIASES, PRIORITY, default_schema(), documents=DOCS)
        input_provs = {(c.provenance[0], c.subject_mention, c.relation, c.object_mention) for c in batch}
        edge_provs = set()
        for e in graph.edges():
            for p in e.provenance:
                edge_provs.add(p.chunk_id)
        assert {c.provenance[0] for c in batch} <= edge_provs


@settings(max_examples=25)
@given(data=st.data())
def test_fuse_property_idempotent_and_order_invariant(data):
    subjects = ["TSH", "HDL", "Uric acid"]
    diseases = ["Gout", "Obesity", "Thyroid diseases"]
    relations = ["indicates_risk_of", "indirectly_associated_with"]
    n = data.draw(st.integers(min_value=1, max_value=12))
    cands = []
    for i in range(n):
        cands.append(
            _candidate(
                data.draw(st.sampled_from(subjects), label=f"s{i}"),
                data.draw(st.sampled_from(relations), label=f"r{i}"),
                data.draw(st.sampled_from(diseases), label=f"o{i}"),
                data.draw(st.sampled_from(["dAha:0000", "dEsc:0000", "dWho:0000"]), label=f"p{i}"),
            )
        )
    batch = _align(cands)
    g1 = GraphStore()
    fuse(batch, g1, ALIASES, PRIORITY, default_schema(), documents=DOCS)
    once = g1.canonical_bytes()
    fuse(batch, g1, ALIASES, PRIORITY, default_schema(), documents=DOCS)
    assert g1.canonical_bytes() == once
    shuffled = data.draw(st.permutations(batch))
    g2 = GraphStore()
    fuse(list(shuffled), g2, ALIASES, PRIORITY, default_schema(), documents=DOCS)
    assert g2.canonical_bytes() == once
