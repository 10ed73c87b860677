"""Knowledge fusion: entity normalization, deduplication, attribute
standardization, and rule-based conflict resolution with escalation.

fuse() is idempotent and order-invariant: re-fusing a batch changes nothing,
and any permutation of a batch produces a canonically equal graph.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

from .corpus import load_tsv_groups
from .extraction import CandidateAttribute, CandidateTriple
from .graph import (
    AttributeValue,
    DocumentRecord,
    Edge,
    GraphStore,
    Node,
    Provenance,
    edge_id_for,
)
from .ontology import OntologySchema
from .ranges import ClosedInterval, Compound, GreaterThan, LessThan, Quantity, ReferenceRange, render
from .units import UnitTable, default_unit_table

_STRIP_CHARS = " \t\n.,;:()[]{}'\"“”‘’"


@dataclass(frozen=True)
class CanonicalEntity:
    entity_id: str
    label: str
    entity_type: str
    aliases: frozenset[str]
    external_codes: tuple = ()
    provisional: bool = False


class AliasTable:
    """casefolded surface -> canonical label, from `canonical<TAB>alias...` rows."""

    def __init__(self, entries: dict[str, list[str]]):
        self._canonical: dict[str, str] = {}
        self._surfaces: dict[str, frozenset[str]] = {}
        for canonical, aliases in entries.items():
            self._canonical[canonical.casefold()] = canonical
            for alias in aliases:
                self._canonical[alias.casefold()] = canonical
            self._surfaces[canonical] = frozenset({canonical, *aliases})

    @classmethod
    def from_file(cls, path: str | Path) -> "AliasTable":
        return cls({c: a for c, a in load_tsv_groups(path)})

    @classmethod
    def empty(cls) -> "AliasTable":
        return cls({})

    def lookup(self, folded: str) -> str | None:
        return self._canonical.get(folded)

    def surfaces_of(self, canonical: str) -> frozenset[str]:
        return self._surfaces.get(canonical, frozenset({canonical}))


class SourcePriority:
    """Ordered issuing orgs, highest priority first; unlisted share default_rank."""

    def __init__(self, ordered: list[str], default_rank: int | None = None):
        if len(set(ordered)) != len(ordered):
            raise ValueError("duplicate org in priority list")
        self._rank = {org: i for i, org in enumerate(ordered)}
        self.default_rank = default_rank if default_rank is not None else len(ordered)

    @classmethod
    def from_file(cls, path: str | Path) -> "SourcePriority":
        return cls([org for org, _ in load_tsv_groups(path)])

    def rank(self, org: str) -> int:
        return self._rank.get(org, self.default_rank)


@dataclass
class Contender:
    value: str  # canonical text form
    unit: str | None
    provenance: tuple[Provenance, ...]
    issuing_org: str
    flaw: str | None = None  # e.g. a unit-conversion failure


@dataclass
class Conflict:
    subject_id: str
    subject_label: str
    name: str  # attribute or relation name
    contenders: list[Contender]
    resolution: str = "open"  # open | resolved | escalated
    winner: int | None = None
    rationale: str = ""


@dataclass
class FusionReport:
    input_count: int = 0
    merged_count: int = 0
    duplicates_removed: int = 0
    conflicts_resolved: int = 0
    conflicts_escalated: int = 0
    conflicts: list[Conflict] = field(default_factory=list)
    edge_ids: list[str] = field(default_factory=list)
    entity_ids: list[str] = field(default_factory=list)

    def reconciles(self) -> bool:
        return self.input_count == self.merged_count + self.duplicates_removed


def clean_mention(mention: str) -> str:
    return " ".join(mention.split()).strip(_STRIP_CHARS)


def entity_id_for(entity_type: str, label: str) -> str:
    digest = hashlib.sha256(f"{entity_type}|{label.casefold()}".encode("utf-8")).hexdigest()
    return "n" + digest[:16]


def normalize_mention(mention: str, entity_type: str, aliases: AliasTable) -> CanonicalEntity:
    """Resolve a surface mention to a canonical entity.

    Case is folded for identity only; an unseen mention keeps its surface as
    the provisional label (so "CA19-9" stays "CA19-9"), while "  hypertension "
    and "Hypertension" share one entity_id.
    """
    surface = clean_mention(mention)
    if not surface:
        raise ValueError("empty mention")
    canonical = aliases.lookup(surface.casefold())
    if canonical is not None:
        return CanonicalEntity(
            entity_id=entity_id_for(entity_type, canonical),
            label=canonical,
            entity_type=entity_type,
            aliases=frozenset({surface}) | aliases.surfaces_of(canonical),
            provisional=False,
        )
    return CanonicalEntity(
        entity_id=entity_id_for(entity_type, surface),
        label=surface,
        entity_type=entity_type,
        aliases=frozenset({surface}),
        provisional=True,
    )


@dataclass(frozen=True)
class NormalizedTriple:
    subject: CanonicalEntity
    relation: str
    object: CanonicalEntity
    attributes: tuple[CandidateAttribute, ...]
    provenance: tuple[Provenance, ...]
    confidence: float | None = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject.entity_id, self.relation, self.object.entity_id)


def dedupe(triples: list[NormalizedTriple]) -> list[NormalizedTriple]:
    """Merge triples sharing (subject, relation, object); provenance becomes
    the order-normalized union, output keeps first-occurrence order."""
    merged: dict[tuple[str, str, str], NormalizedTriple] = {}
    order: list[tuple[str, str, str]] = []
    for t in triples:
        prior = merged.get(t.key)
        if prior is None:
            merged[t.key] = t
            order.append(t.key)
            continue
        confidences = [c for c in (prior.confidence, t.confidence) if c is not None]
        merged[t.key] = replace(
            prior,
            provenance=_prov_union(prior.provenance, t.provenance),
            attributes=tuple(dict.fromkeys(prior.attributes + t.attributes)),
            confidence=max(confidences) if confidences else None,
        )
    return [merged[k] for k in order]


def _prov_union(*groups) -> tuple[Provenance, ...]:
    seen = set()
    for g in groups:
        seen.update(g)
    return tuple(
        sorted(seen, key=lambda p: (p.doc_id, p.chunk_id, p.template_id, p.template_version, p.provider))
    )


def _quantity_in_base(q: Quantity, table: UnitTable) -> Quantity:
    if not q.normalized or not table.knows(q.unit):
        return q
    base = table.base_symbol(table.dimension(q.unit))
    if not base:
        return q
    return Quantity(table.convert(q.value, q.unit, base), base)


def _bound_in_base(bound, table: UnitTable):
    if isinstance(bound, ClosedInterval):
        return ClosedInterval(_quantity_in_base(bound.lo, table), _quantity_in_base(bound.hi, table))
    if isinstance(bound, LessThan):
        return LessThan(_quantity_in_base(bound.limit, table))
    if isinstance(bound, GreaterThan):
        return GreaterThan(_quantity_in_base(bound.limit, table))
    if isinstance(bound, Compound):
        return Compound(tuple((label, _bound_in_base(b, table)) for label, b in bound.components))
    return bound  # Qualitative


def range_in_base_units(rng: ReferenceRange, table: UnitTable) -> ReferenceRange:
    return ReferenceRange(
        tuple(replace(s, bound=_bound_in_base(s.bound, table)) for s in rng.strata)
    )


def canonical_decimal(value: Decimal) -> str:
    return format(value.normalize(), "f")


def attribute_canonical_forms(
    attr: CandidateAttribute, schema: OntologySchema, table: UnitTable
) -> tuple[str, str, str | None]:
    """(display value, comparison key, unit) for a parsed candidate attribute."""
    adef = schema.attribute_defs[attr.name]
    if adef.value_kind == "reference_range" and isinstance(attr.parsed_value, ReferenceRange):
        display = render(attr.parsed_value)
        compare = render(range_in_base_units(attr.parsed_value, table))
        return display, compare, None
    if adef.value_kind == "numeric" and isinstance(attr.parsed_value, Decimal):
        text = canonical_decimal(attr.parsed_value)
        return text, text, adef.unit
    return str(attr.raw_value).strip(), str(attr.raw_value).strip().casefold(), adef.unit


def integrate_attributes(
    entity: CanonicalEntity,
    existing: AttributeValue | None,
    name: str,
    incoming: list[tuple[str, str, tuple[Provenance, ...], str]],
    priority: SourcePriority,
    existing_org: str = "",
) -> tuple[AttributeValue | None, Conflict | None]:
    """Merge incoming (display, compare-key, provenance, org) values for one attribute.

    Equal-after-conversion values merge; disagreement yields a Conflict that
    resolve_conflict settles by source priority.
    """
    groups: dict[str, dict] = {}
    for display, compare, prov, org in incoming:
        g = groups.setdefault(compare, {"displays": set(), "prov": set(), "orgs": set()})
        g["displays"].add(display)
        g["prov"].update(prov)
        g["orgs"].add(org)
    if existing is not None:
        g = groups.setdefault(_existing_compare_key(existing), {"displays": set(), "prov": set(), "orgs": set()})
        g["displays"].add(existing.value)
        g["prov"].update(existing.provenance)
        g["orgs"].add(existing_org)

    if len(groups) == 1:
        g = next(iter(groups.values()))
        return (
            AttributeValue(
                value=min(g["displays"]),
                kind="",  # caller fills the kind
                provenance=tuple(sorted(g["prov"], key=_prov_sort_key)),
            ),
            None,
        )

    contenders = [
        Contender(
            value=min(g["displays"]),
            unit=None,
            provenance=tuple(sorted(g["prov"], key=_prov_sort_key)),
            issuing_org=min(g["orgs"]),
        )
        for _, g in sorted(groups.items())
    ]
    conflict = Conflict(
        subject_id=entity.entity_id,
        subject_label=entity.label,
        name=name,
        contenders=contenders,
    )
    return None, conflict


def _existing_compare_key(existing: AttributeValue) -> str:
    if existing.kind == "reference_range":
        from .ranges import parse_reference_range

        try:
            return render(range_in_base_units(parse_reference_range(existing.value), default_unit_table()))
        except Exception:
            return existing.value
    if existing.kind in ("categorical", "text"):
        return existing.value.casefold()
    return existing.value


def _prov_sort_key(p: Provenance):
    return (p.doc_id, p.chunk_id, p.template_id, p.template_version, p.provider)


def resolve_conflict(conflict: Conflict, priority: SourcePriority) -> Conflict:
    """Highest-priority issuing org wins; rank ties escalate to expert review."""
    ranks = [priority.rank(c.issuing_org) for c in conflict.contenders]
    best = min(ranks)
    winners = [i for i, r in enumerate(ranks) if r == best]
    if len(winners) == 1:
        conflict.resolution = "resolved"
        conflict.winner = winners[0]
        conflict.rationale = (
            f"source {conflict.contenders[winners[0]].issuing_org!r} outranks the others (rank {best})"
        )
    else:
        conflict.resolution = "escalated"
        conflict.rationale = f"{len(winners)} contenders share rank {best}; routed to expert review"
    return conflict


def fuse(
    candidates: list[CandidateTriple],
    graph: GraphStore,
    aliases: AliasTable,
    priority: SourcePriority,
    schema: OntologySchema,
    *,
    extractor: tuple[str, int, str] = ("", 0, ""),
    documents: dict[str, DocumentRecord] | None = None,
    unit_table: UnitTable | None = None,
) -> FusionReport:
    """Normalize -> dedupe -> integrate -> resolve, then upsert into the graph.

    Fused relational claims enter as candidate edges awaiting review;
    attribute winners land on the subject node. Escalated conflicts are
    reported, with the existing value (if any) left untouched.
    """
    table = unit_table or default_unit_table()
    documents = documents or {}
    template_id, template_version, provider = extractor
    report = FusionReport(input_count=len(candidates))

    def provenance_for(chunk_ids: tuple[str, ...]) -> tuple[Provenance, ...]:
        out = []
        for cid in chunk_ids:
            doc_id = cid.rpartition(":")[0]
            out.append(
                Provenance(
                    doc_id=doc_id,
                    chunk_id=cid,
                    template_id=template_id,
                    template_version=template_version,
                    provider=provider,
                )
            )
        return tuple(out)

    normalized: list[NormalizedTriple] = []
    for cand in candidates:
        normalized.append(
            NormalizedTriple(
                subject=normalize_mention(cand.subject_mention, cand.subject_type, aliases),
                relation=cand.relation,
                object=normalize_mention(cand.object_mention, cand.object_type, aliases),
                attributes=cand.attributes,
                provenance=provenance_for(cand.provenance),
                confidence=cand.model_confidence,
            )
        )

    merged = dedupe(normalized)
    report.merged_count = len(merged)
    report.duplicates_removed = report.input_count - report.merged_count

    for doc in sorted(documents.values(), key=lambda d: d.doc_id):
        graph.register_document(doc)

    # group attribute claims per subject entity before touching the graph,
    # so integration sees the whole batch at once (order cannot matter)
    attr_claims: dict[tuple[str, str], list] = {}
    entities: dict[str, tuple[CanonicalEntity, str | None]] = {}

    def note_entity(entity: CanonicalEntity, system: str | None) -> None:
        prior = entities.get(entity.entity_id)
        if prior is None:
            entities[entity.entity_id] = (entity, system)
            return
        prior_entity, prior_system = prior
        # label choice must not depend on batch order: canonical labels beat
        # provisional ones, otherwise the lexicographically smaller survives
        if prior_entity.provisional and not entity.provisional:
            label, provisional = entity.label, False
        elif entity.provisional and not prior_entity.provisional:
            label, provisional = prior_entity.label, False
        else:
            label = min(prior_entity.label, entity.label)
            provisional = prior_entity.provisional
        systems = sorted(s for s in (prior_system, system) if s)
        entities[entity.entity_id] = (
            replace(
                prior_entity,
                label=label,
                provisional=provisional,
                aliases=prior_entity.aliases | entity.aliases,
            ),
            systems[0] if systems else None,
        )

    # attribute claims keep their own candidate's provenance and issuing org,
    # so a claim merged away by edge-level dedupe still votes under its source
    for t in normalized:
        subject_system = None
        for p in sorted(t.provenance, key=_prov_sort_key):
            doc = documents.get(p.doc_id) or graph.get_document(p.doc_id)
            if doc is not None and doc.physiological_system:
                subject_system = doc.physiological_system
                break
        note_entity(t.subject, subject_system)
        note_entity(t.object, None)
        org = ""
        for p in sorted(t.provenance, key=_prov_sort_key):
            doc = documents.get(p.doc_id) or graph.get_document(p.doc_id)
            if doc is not None:
                org = doc.issuing_org
                break
        for attr in t.attributes:
            if attr.name not in schema.attribute_defs:
                continue
            display, compare, _ = attribute_canonical_forms(attr, schema, table)
            attr_claims.setdefault((t.subject.entity_id, attr.name), []).append(
                (display, compare, t.provenance, org)
            )

    for entity_id, (entity, system) in sorted(entities.items()):
        graph.upsert_node(
            Node(
                entity_id=entity.entity_id,
                entity_type=entity.entity_type,
                label=entity.label,
                aliases=tuple(sorted(entity.aliases)),
                system_tag=system,
            )
        )

    for (entity_id, name), claims in sorted(attr_claims.items()):
        entity = entities[entity_id][0]
        node = graph.get_node(entity_id)
        existing = node.attributes.get(name) if node else None
        existing_org = ""
        if existing is not None and existing.provenance:
            first = sorted(existing.provenance, key=_prov_sort_key)[0]
            doc = documents.get(first.doc_id) or graph.get_document(first.doc_id)
            existing_org = doc.issuing_org if doc else ""
        value, conflict = integrate_attributes(entity, existing, name, claims, priority, existing_org)
        kind = schema.attribute_defs[name].value_kind
        if conflict is None:
            graph.set_node_attribute(
                entity_id, name, replace(value, kind=kind, unit=schema.attribute_defs[name].unit)
            )
            continue
        conflict = resolve_conflict(conflict, priority)
        report.conflicts.append(conflict)
        if conflict.resolution == "resolved":
            report.conflicts_resolved += 1
            winner = conflict.contenders[conflict.winner]
            graph.set_node_attribute(
                entity_id,
                name,
                AttributeValue(
                    value=winner.value,
                    kind=kind,
                    unit=schema.attribute_defs[name].unit,
                    provenance=winner.provenance,
                ),
            )
        else:
            report.conflicts_escalated += 1

    for t in merged:
        eid = edge_id_for(t.subject.entity_id, t.relation, t.object.entity_id)
        graph.upsert_edge(
            Edge(
                edge_id=eid,
                subject=t.subject.entity_id,
                relation=t.relation,
                object=t.object.entity_id,
                provenance=t.provenance,
                status="candidate",
            )
        )
        report.edge_ids.append(eid)
    report.entity_ids = sorted(entities)
    return report
