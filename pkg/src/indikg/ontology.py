"""Ontology schema: entity/relation/attribute definitions and graph constraints.

The schema gates every extracted triple. Validation returns violations
rather than raising, so callers can route bad candidates to review instead
of dropping them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

from .corpus import load_tsv_groups
from .errors import ParseError, SchemaError, VocabLookupError
from .ranges import parse_reference_range

KNOWN_VOCABULARIES = ("SNOMED_CT", "UMLS")


@dataclass(frozen=True)
class EntityTypeDef:
    name: str
    parent: str | None = None
    required_attributes: tuple[str, ...] = ()


@dataclass(frozen=True)
class RelationTypeDef:
    name: str
    domain_types: frozenset[str]
    range_types: frozenset[str]
    description: str = ""


@dataclass(frozen=True)
class AttributeDef:
    name: str
    value_kind: str  # numeric | reference_range | categorical | text
    unit: str | None = None
    allowed_values: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ConstraintRule:
    rule_id: str
    kind: str  # required_link | cardinality | attribute_required
    subject_type: str
    relation: str | None = None
    object_type: str | None = None
    attribute: str | None = None
    min_count: int | None = None
    max_count: int | None = None
    description: str = ""


@dataclass(frozen=True)
class ExternalCodeRef:
    vocabulary: str  # SNOMED_CT | UMLS | any other registry name
    code: str

    def __post_init__(self):
        if not self.code:
            raise ValueError("external code must be non-empty")


@dataclass(frozen=True)
class Violation:
    code: str  # unknown_relation | domain | range | attribute_kind | required_link | cardinality | attribute_required
    message: str
    subject: str | None = None
    rule_id: str | None = None


@dataclass(frozen=True)
class OntologySchema:
    version: str
    entity_types: dict[str, EntityTypeDef]
    relation_types: dict[str, RelationTypeDef]
    attribute_defs: dict[str, AttributeDef]
    constraints: tuple[ConstraintRule, ...]

    def ancestors(self, type_name: str) -> tuple[str, ...]:
        chain = []
        cur = self.entity_types.get(type_name)
        while cur is not None and cur.parent is not None:
            chain.append(cur.parent)
            cur = self.entity_types.get(cur.parent)
        return tuple(chain)

    def is_subtype_of(self, type_name: str, supertype: str) -> bool:
        return type_name == supertype or supertype in self.ancestors(type_name)


def _check_closure(schema: OntologySchema) -> None:
    for et in schema.entity_types.values():
        if et.parent is not None and et.parent not in schema.entity_types:
            raise SchemaError(f"entity type {et.name!r}: unknown parent {et.parent!r}")
        for attr in et.required_attributes:
            if attr not in schema.attribute_defs:
                raise SchemaError(f"entity type {et.name!r}: unknown required attribute {attr!r}")
    for rt in schema.relation_types.values():
        if not rt.domain_types or not rt.range_types:
            raise SchemaError(f"relation {rt.name!r}: empty domain or range")
        for t in rt.domain_types | rt.range_types:
            if t not in schema.entity_types:
                raise SchemaError(f"relation {rt.name!r}: unknown type {t!r}")
    for rule in schema.constraints:
        if rule.subject_type not in schema.entity_types:
            raise SchemaError(f"constraint {rule.rule_id!r}: unknown subject type {rule.subject_type!r}")
        if rule.kind in ("required_link", "cardinality"):
            if rule.relation not in schema.relation_types:
                raise SchemaError(f"constraint {rule.rule_id!r}: unknown relation {rule.relation!r}")
            if rule.object_type is not None and rule.object_type not in schema.entity_types:
                raise SchemaError(f"constraint {rule.rule_id!r}: unknown object type {rule.object_type!r}")
        elif rule.kind == "attribute_required":
            if rule.attribute not in schema.attribute_defs:
                raise SchemaError(f"constraint {rule.rule_id!r}: unknown attribute {rule.attribute!r}")
        else:
            raise SchemaError(f"constraint {rule.rule_id!r}: unknown kind {rule.kind!r}")
        if rule.min_count is not None and rule.max_count is not None and rule.min_count > rule.max_count:
            raise SchemaError(f"constraint {rule.rule_id!r}: min > max")
    for ad in schema.attribute_defs.values():
        if ad.value_kind not in ("numeric", "reference_range", "categorical", "text"):
            raise SchemaError(f"attribute {ad.name!r}: unknown value kind {ad.value_kind!r}")
        if ad.value_kind == "categorical" and not ad.allowed_values:
            raise SchemaError(f"attribute {ad.name!r}: categorical without allowed_values")


def _check_acyclic(schema: OntologySchema) -> None:
    for name in schema.entity_types:
        seen = [name]
        cur = schema.entity_types[name].parent
        while cur is not None and cur in schema.entity_types:
            if cur in seen:
                raise SchemaError(f"entity hierarchy cycle: {' -> '.join(seen + [cur])}")
            seen.append(cur)
            cur = schema.entity_types[cur].parent


def load_schema(source: str | Path | dict) -> OntologySchema:
    """Load and validate a schema file (JSON with entity_types/relation_types/attributes/constraints)."""
    if isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text(encoding="utf-8")
        if not text.strip():
            raise SchemaError(f"schema file {source} is empty")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema file {source} is not valid JSON: {exc}") from exc
    if not raw:
        raise SchemaError("schema is empty")

    entity_types = {
        e["name"]: EntityTypeDef(
            e["name"], e.get("parent"), tuple(e.get("required_attributes", ()))
        )
        for e in raw.get("entity_types", [])
    }
    relation_types = {
        r["name"]: RelationTypeDef(
            r["name"],
            frozenset(r["domain_types"]),
            frozenset(r["range_types"]),
            r.get("description", ""),
        )
        for r in raw.get("relation_types", [])
    }
    attribute_defs = {
        a["name"]: AttributeDef(
            a["name"],
            a["value_kind"],
            a.get("unit"),
            tuple(a["allowed_values"]) if a.get("allowed_values") else None,
        )
        for a in raw.get("attributes", [])
    }
    constraints = tuple(
        ConstraintRule(
            c["rule_id"],
            c["kind"],
            c["subject_type"],
            c.get("relation"),
            c.get("object_type"),
            c.get("attribute"),
            c.get("min"),
            c.get("max"),
            c.get("description", ""),
        )
        for c in raw.get("constraints", [])
    )
    if not entity_types:
        raise SchemaError("schema defines no entity types")
    schema = OntologySchema(
        version=str(raw.get("version", "1")),
        entity_types=entity_types,
        relation_types=relation_types,
        attribute_defs=attribute_defs,
        constraints=constraints,
    )
    _check_acyclic(schema)
    _check_closure(schema)
    return schema


def default_schema() -> OntologySchema:
    with resources.as_file(resources.files("indikg.data").joinpath("default_schema.json")) as p:
        return load_schema(p)


def check_attribute_value(schema: OntologySchema, name: str, raw_value: str):
    """Validate an attribute value against its definition.

    Returns (parsed_value, None) on success or (None, Violation) on failure.
    Parsed values: Decimal for numeric, ReferenceRange for reference_range,
    the token itself for categorical/text.
    """
    adef = schema.attribute_defs.get(name)
    if adef is None:
        return None, Violation("attribute_kind", f"unknown attribute {name!r}")
    if adef.value_kind == "numeric":
        try:
            return Decimal(str(raw_value).strip()), None
        except InvalidOperation:
            return None, Violation("attribute_kind", f"attribute {name!r}: {raw_value!r} is not numeric")
    if adef.value_kind == "reference_range":
        try:
            return parse_reference_range(str(raw_value)), None
        except ParseError as exc:
            return None, Violation(
                "attribute_kind", f"attribute {name!r}: range {raw_value!r} failed to parse: {exc}"
            )
    if adef.value_kind == "categorical":
        token = str(raw_value).strip()
        if token not in (adef.allowed_values or ()):
            return None, Violation(
                "attribute_kind",
                f"attribute {name!r}: {token!r} not in allowed values {sorted(adef.allowed_values or ())}",
            )
        return token, None
    return str(raw_value), None


def validate_triple(schema: OntologySchema, triple) -> list[Violation]:
    """Check one aligned triple: relation exists, types satisfy domain/range
    (subtypes allowed via the hierarchy), attribute values match their kinds.
    """
    violations: list[Violation] = []
    rel = schema.relation_types.get(triple.relation)
    if rel is None:
        return [Violation("unknown_relation", f"unknown relation {triple.relation!r}", triple.subject_mention)]
    if triple.subject_type not in schema.entity_types:
        violations.append(Violation("domain", f"unknown subject type {triple.subject_type!r}", triple.subject_mention))
    elif not any(schema.is_subtype_of(triple.subject_type, d) for d in rel.domain_types):
        violations.append(
            Violation(
                "domain",
                f"subject type {triple.subject_type!r} not in domain of {triple.relation!r} "
                f"{sorted(rel.domain_types)}",
                triple.subject_mention,
            )
        )
    if triple.object_type not in schema.entity_types:
        violations.append(Violation("range", f"unknown object type {triple.object_type!r}", triple.subject_mention))
    elif not any(schema.is_subtype_of(triple.object_type, r) for r in rel.range_types):
        violations.append(
            Violation(
                "range",
                f"object type {triple.object_type!r} not in range of {triple.relation!r} "
                f"{sorted(rel.range_types)}",
                triple.subject_mention,
            )
        )
    for attr in getattr(triple, "attributes", ()):
        _, violation = check_attribute_value(schema, attr.name, attr.raw_value)
        if violation is not None:
            violations.append(dataclasses.replace(violation, subject=triple.subject_mention))
    return violations


def check_graph_constraints(schema: OntologySchema, graph) -> list[Violation]:
    """Evaluate every constraint rule over a graph snapshot.

    required_link counts candidate and asserted edges (fusion-time checks run
    before review); cardinality counts asserted edges only.
    """
    violations: list[Violation] = []
    nodes = list(graph.nodes())
    edges = [e for e in graph.edges() if e.status != "retracted"]
    by_subject: dict[tuple[str, str], list] = {}
    for e in edges:
        by_subject.setdefault((e.subject, e.relation), []).append(e)

    for rule in schema.constraints:
        for node in nodes:
            if not schema.is_subtype_of(node.entity_type, rule.subject_type):
                continue
            if rule.kind == "required_link":
                linked = [
                    e
                    for e in by_subject.get((node.entity_id, rule.relation), [])
                    if rule.object_type is None
                    or schema.is_subtype_of(_node_type(graph, e.object), rule.object_type)
                ]
                if not linked:
                    violations.append(
                        Violation(
                            "required_link",
                            f"{node.entity_type} {node.label!r} has no {rule.relation} link"
                            + (f" to a {rule.object_type}" if rule.object_type else ""),
                            subject=node.entity_id,
                            rule_id=rule.rule_id,
                        )
                    )
            elif rule.kind == "cardinality":
                count = sum(
                    1 for e in by_subject.get((node.entity_id, rule.relation), []) if e.status == "asserted"
                )
                if rule.min_count is not None and count < rule.min_count:
                    violations.append(
                        Violation(
                            "cardinality",
                            f"{node.label!r} has {count} asserted {rule.relation} edges, needs >= {rule.min_count}",
                            subject=node.entity_id,
                            rule_id=rule.rule_id,
                        )
                    )
                if rule.max_count is not None and count > rule.max_count:
                    violations.append(
                        Violation(
                            "cardinality",
                            f"{node.label!r} has {count} asserted {rule.relation} edges, allows <= {rule.max_count}",
                            subject=node.entity_id,
                            rule_id=rule.rule_id,
                        )
                    )
            elif rule.kind == "attribute_required":
                if rule.attribute not in node.attributes:
                    violations.append(
                        Violation(
                            "attribute_required",
                            f"{node.entity_type} {node.label!r} is missing attribute {rule.attribute!r}",
                            subject=node.entity_id,
                            rule_id=rule.rule_id,
                        )
                    )
    return violations


def _node_type(graph, entity_id: str) -> str:
    node = graph.get_node(entity_id)
    return node.entity_type if node else ""


class VocabularyLookup:
    """File-backed label -> external code table (stand-in for terminology services)."""

    def __init__(self, rows: list[tuple[str, str, str]]):
        self._by_label: dict[str, list[ExternalCodeRef]] = {}
        for label, vocabulary, code in rows:
            self._by_label.setdefault(label.casefold(), []).append(ExternalCodeRef(vocabulary, code))

    @classmethod
    def from_file(cls, path: str | Path) -> "VocabularyLookup":
        try:
            rows = []
            for first, rest in load_tsv_groups(path):
                if len(rest) != 2:
                    raise VocabLookupError(f"lookup file {path}: bad row for {first!r}")
                rows.append((first, rest[0], rest[1]))
        except OSError as exc:
            raise VocabLookupError(f"cannot read lookup file {path}: {exc}") from exc
        return cls(rows)

    def codes_for(self, label: str) -> list[ExternalCodeRef]:
        return list(self._by_label.get(label.casefold(), []))


def map_external_codes(entity, lookup: VocabularyLookup):
    """Attach codes for the entity's label; idempotent, label and type unchanged."""
    found = lookup.codes_for(entity.label)
    existing = list(entity.external_codes)
    merged = existing + [c for c in found if c not in existing]
    if merged == existing:
        return entity
    return dataclasses.replace(entity, external_codes=tuple(merged))
