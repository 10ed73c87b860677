"""Provenance-tracked property graph: typed nodes/edges, pattern queries,
multi-hop paths, canonical JSON Lines persistence, and coverage stats.

Single writer, many readers: mutations take the store lock, readers work on
immutable snapshots. The canonical export is byte-stable, so two equal graphs
always serialize identically.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, GraphImportError, IntegrityError

MAX_HOPS = 4


@dataclass(frozen=True)
class Provenance:
    doc_id: str
    chunk_id: str
    template_id: str = ""
    template_version: int = 0
    provider: str = ""
    review_decision_id: str | None = None

    def to_json(self) -> dict:
        out = {
            "doc_id": self.doc_id,
            "chunk_id": self.chunk_id,
            "template_id": self.template_id,
            "template_version": self.template_version,
            "provider": self.provider,
        }
        if self.review_decision_id is not None:
            out["review_decision_id"] = self.review_decision_id
        return out

    @classmethod
    def from_json(cls, raw: dict) -> "Provenance":
        return cls(
            raw["doc_id"],
            raw["chunk_id"],
            raw.get("template_id", ""),
            raw.get("template_version", 0),
            raw.get("provider", ""),
            raw.get("review_decision_id"),
        )


@dataclass(frozen=True)
class AttributeValue:
    value: str  # canonical text form (rendered range, decimal string, token)
    kind: str  # numeric | reference_range | categorical | text
    unit: str | None = None
    provenance: tuple[Provenance, ...] = ()


@dataclass(frozen=True)
class Node:
    entity_id: str
    entity_type: str
    label: str
    aliases: tuple[str, ...] = ()
    attributes: dict[str, AttributeValue] = field(default_factory=dict)
    external_codes: tuple[tuple[str, str], ...] = ()  # (vocabulary, code)
    system_tag: str | None = None
    retracted: bool = False


@dataclass(frozen=True)
class Edge:
    edge_id: str
    subject: str
    relation: str
    object: str
    provenance: tuple[Provenance, ...]
    status: str = "candidate"  # candidate | asserted | retracted


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    title: str
    issuing_org: str
    physiological_system: str = ""


def edge_id_for(subject: str, relation: str, obj: str) -> str:
    digest = hashlib.sha256(f"{subject}|{relation}|{obj}".encode("utf-8")).hexdigest()
    return "e" + digest[:16]


def _sorted_prov(provs) -> tuple[Provenance, ...]:
    return tuple(
        sorted(
            set(provs),
            key=lambda p: (p.doc_id, p.chunk_id, p.template_id, p.template_version, p.provider, p.review_decision_id or ""),
        )
    )


class GraphStore:
    def __init__(self):
        self._nodes: dict[str, Node] = {}
        self._edges: dict[str, Edge] = {}
        self._documents: dict[str, DocumentRecord] = {}
        self._lock = threading.RLock()
        self._wal_path: Path | None = None

    # --- write path -------------------------------------------------------

    def attach_wal(self, path: str | Path) -> None:
        self._wal_path = Path(path)

    def _log(self, op: str, payload: dict) -> None:
        if self._wal_path is None:
            return
        with open(self._wal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"op": op, **payload}, ensure_ascii=False, sort_keys=True) + "\n")

    def register_document(self, doc: DocumentRecord) -> None:
        with self._lock:
            self._documents[doc.doc_id] = doc
            self._log("document", _doc_json(doc))

    def upsert_node(self, node: Node) -> None:
        """Insert, or merge aliases/codes/attributes into the existing node.

        Conflicting attribute values are the fusion layer's problem; the
        store keeps the existing value when values differ.
        """
        with self._lock:
            old = self._nodes.get(node.entity_id)
            if old is None:
                merged = node
            else:
                attributes = dict(old.attributes)
                for name, incoming in node.attributes.items():
                    existing = attributes.get(name)
                    if existing is None:
                        attributes[name] = incoming
                    elif (existing.value, existing.unit) == (incoming.value, incoming.unit):
                        attributes[name] = replace(
                            existing, provenance=_sorted_prov(existing.provenance + incoming.provenance)
                        )
                # min() keeps both label and tag independent of merge order
                label = min(old.label, node.label)
                if old.system_tag and node.system_tag:
                    system_tag = min(old.system_tag, node.system_tag)
                else:
                    system_tag = old.system_tag or node.system_tag
                merged = Node(
                    entity_id=old.entity_id,
                    entity_type=old.entity_type,
                    label=label,
                    aliases=tuple(sorted(set(old.aliases) | set(node.aliases))),
                    attributes=attributes,
                    external_codes=tuple(sorted(set(old.external_codes) | set(node.external_codes))),
                    system_tag=system_tag,
                    retracted=old.retracted,
                )
            self._nodes[node.entity_id] = merged
            self._log("node", _node_json(merged))

    def set_node_attribute(self, entity_id: str, name: str, value: AttributeValue) -> None:
        with self._lock:
            node = self._require_node(entity_id)
            attributes = dict(node.attributes)
            attributes[name] = replace(value, provenance=_sorted_prov(value.provenance))
            updated = replace(node, attributes=attributes)
            self._nodes[entity_id] = updated
            self._log("node", _node_json(updated))

    def upsert_edge(self, edge: Edge) -> None:
        """Insert or merge provenance. Retracted edges stay retracted: pipeline
        re-runs must not resurface reviewer-rejected triples."""
        with self._lock:
            if edge.subject not in self._nodes or edge.object not in self._nodes:
                missing = edge.subject if edge.subject not in self._nodes else edge.object
                raise IntegrityError(f"edge {edge.edge_id} references missing node {missing!r}")
            old = self._edges.get(edge.edge_id)
            if old is None:
                merged = replace(edge, provenance=_sorted_prov(edge.provenance))
            else:
                merged = replace(
                    old, provenance=_sorted_prov(old.provenance + edge.provenance)
                )
            self._edges[merged.edge_id] = merged
            self._log("edge", _edge_json(merged))

    def set_edge_status(self, edge_id: str, status: str, review_decision_id: str | None = None) -> Edge:
        if status not in ("candidate", "asserted", "retracted"):
            raise ConfigError(f"unknown edge status {status!r}")
        with self._lock:
            edge = self._edges.get(edge_id)
            if edge is None:
                raise IntegrityError(f"unknown edge {edge_id!r}")
            prov = edge.provenance
            if review_decision_id is not None:
                prov = _sorted_prov(replace(p, review_decision_id=review_decision_id) for p in prov)
            updated = replace(edge, status=status, provenance=prov)
            self._edges[edge_id] = updated
            self._log("edge", _edge_json(updated))
            return updated

    def retract_node(self, entity_id: str) -> None:
        """Tombstone a node; every incident edge is retracted with it."""
        with self._lock:
            node = self._require_node(entity_id)
            self._nodes[entity_id] = replace(node, retracted=True)
            self._log("node", _node_json(self._nodes[entity_id]))
            for edge in list(self._edges.values()):
                if edge.status != "retracted" and entity_id in (edge.subject, edge.object):
                    self.set_edge_status(edge.edge_id, "retracted")

    def _require_node(self, entity_id: str) -> Node:
        node = self._nodes.get(entity_id)
        if node is None:
            raise IntegrityError(f"unknown node {entity_id!r}")
        return node

    # --- read path ----------------------------------------------------------

    def nodes(self) -> list[Node]:
        return [n for n in self._nodes.values() if not n.retracted]

    def edges(self) -> list[Edge]:
        return list(self._edges.values())

    def documents(self) -> list[DocumentRecord]:
        return list(self._documents.values())

    def get_node(self, entity_id: str) -> Node | None:
        node = self._nodes.get(entity_id)
        return None if node is None or node.retracted else node

    def get_edge(self, edge_id: str) -> Edge | None:
        return self._edges.get(edge_id)

    def get_document(self, doc_id: str) -> DocumentRecord | None:
        return self._documents.get(doc_id)

    def find(self, entity_type: str | None = None, label: str | None = None,
             relation: str | None = None, status: str | None = None):
        """Conjunctive pattern filter. Relation or status patterns return
        edges; otherwise nodes (label matches case-folded label or alias)."""
        if relation is not None or status is not None:
            out = [e for e in self._edges.values() if e.status != "retracted" or status == "retracted"]
            if relation is not None:
                out = [e for e in out if e.relation == relation]
            if status is not None:
                out = [e for e in out if e.status == status]
            return sorted(out, key=lambda e: e.edge_id)
        out = self.nodes()
        if entity_type is not None:
            out = [n for n in out if n.entity_type == entity_type]
        if label is not None:
            needle = label.casefold()
            out = [
                n
                for n in out
                if n.label.casefold() == needle or any(a.casefold() == needle for a in n.aliases)
            ]
        return sorted(out, key=lambda n: n.entity_id)

    def snapshot(self) -> "GraphStore":
        """Immutable-enough copy: a reader's view never sees later writes."""
        with self._lock:
            copy = GraphStore()
            copy._nodes = dict(self._nodes)
            copy._edges = dict(self._edges)
            copy._documents = dict(self._documents)
            return copy

    def neighborhood(self, entity_id: str, hops: int) -> tuple[set[str], list[Edge], dict[str, int]]:
        """Nodes/edges reachable within `hops` over asserted edges, both directions.

        Returns (node ids, edges, distance per node id).
        """
        self._require_live(entity_id)
        dist = {entity_id: 0}
        frontier = {entity_id}
        asserted = [
            e
            for e in self._edges.values()
            if e.status == "asserted"
            and self.get_node(e.subject) is not None
            and self.get_node(e.object) is not None
        ]
        for depth in range(1, hops + 1):
            nxt = set()
            for edge in asserted:
                for here, there in ((edge.subject, edge.object), (edge.object, edge.subject)):
                    if here in frontier and there not in dist:
                        dist[there] = depth
                        nxt.add(there)
            frontier = nxt
            if not frontier:
                break
        edges = [e for e in asserted if e.subject in dist and e.object in dist]
        return set(dist), sorted(edges, key=lambda e: e.edge_id), dist

    def paths(self, src: str, dst: str, max_hops: int) -> list[tuple[str, ...]]:
        """All simple paths (edge-id sequences) of length <= max_hops over
        asserted edges, traversed in either direction, lexicographic order."""
        if max_hops > MAX_HOPS:
            raise ConfigError(f"max_hops capped at {MAX_HOPS}")
        self._require_live(src)
        self._require_live(dst)
        adjacency: dict[str, list[tuple[str, Edge]]] = {}
        for e in self._edges.values():
            if e.status != "asserted":
                continue
            if self.get_node(e.subject) is None or self.get_node(e.object) is None:
                continue
            adjacency.setdefault(e.subject, []).append((e.object, e))
            adjacency.setdefault(e.object, []).append((e.subject, e))
        if src == dst:
            return [()]
        results: list[tuple[str, ...]] = []

        def walk(here: str, visited: set[str], trail: tuple[str, ...]) -> None:
            if here == dst:
                results.append(trail)
                return
            if len(trail) >= max_hops:
                return
            for there, edge in adjacency.get(here, ()):
                if there in visited:
                    continue
                walk(there, visited | {there}, trail + (edge.edge_id,))

        walk(src, {src}, ())
        return sorted(set(results))

    def _require_live(self, entity_id: str) -> None:
        if self.get_node(entity_id) is None:
            raise IntegrityError(f"unknown node {entity_id!r}")

    def stats(self) -> dict:
        nodes = self.nodes()
        live_edges = [e for e in self._edges.values() if e.status != "retracted"]
        nodes_by_type: dict[str, int] = {}
        for n in nodes:
            nodes_by_type[n.entity_type] = nodes_by_type.get(n.entity_type, 0) + 1
        edges_by_relation: dict[str, int] = {}
        for e in live_edges:
            edges_by_relation[e.relation] = edges_by_relation.get(e.relation, 0) + 1
        indicators_by_system: dict[str, int] = {}
        for n in nodes:
            if n.system_tag:
                indicators_by_system[n.system_tag] = indicators_by_system.get(n.system_tag, 0) + 1
        orgs = set()
        for e in live_edges:
            for p in e.provenance:
                doc = self._documents.get(p.doc_id)
                if doc is not None:
                    orgs.add(doc.issuing_org)
        return {
            "nodes_by_type": dict(sorted(nodes_by_type.items())),
            "edges_by_relation": dict(sorted(edges_by_relation.items())),
            "indicators_by_system": dict(sorted(indicators_by_system.items())),
            "guidelines_covered": len(orgs),
        }

    # --- persistence --------------------------------------------------------

    def export_lines(self, schema_version: str = "1") -> list[str]:
        with self._lock:
            header = {
                "kind": "header",
                "schema_version": schema_version,
                "node_count": len(self._nodes),
                "edge_count": len(self._edges),
            }
            lines = [_dump(header)]
            for doc in sorted(self._documents.values(), key=lambda d: d.doc_id):
                lines.append(_dump({"kind": "document", **_doc_json(doc)}))
            for node in sorted(self._nodes.values(), key=lambda n: n.entity_id):
                lines.append(_dump({"kind": "node", **_node_json(node)}))
            for edge in sorted(self._edges.values(), key=lambda e: e.edge_id):
                lines.append(_dump({"kind": "edge", **_edge_json(edge)}))
            return lines

    def save(self, path: str | Path, schema_version: str = "1") -> None:
        Path(path).write_text("\n".join(self.export_lines(schema_version)) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GraphStore":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())

    @classmethod
    def from_lines(cls, lines: list[str]) -> "GraphStore":
        store = cls()
        header = None
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphImportError(f"malformed JSON: {exc.msg}", lineno)
            kind = record.get("kind")
            if lineno == 1 and kind != "header":
                raise GraphImportError("first record must be the header", lineno)
            if kind == "header":
                header = record
            elif kind == "document":
                store._documents[record["doc_id"]] = DocumentRecord(
                    record["doc_id"], record.get("title", ""), record.get("issuing_org", ""),
                    record.get("physiological_system", ""),
                )
            elif kind == "node":
                node = _node_from_json(record)
                store._nodes[node.entity_id] = node
            elif kind == "edge":
                edge = _edge_from_json(record)
                for endpoint in (edge.subject, edge.object):
                    if endpoint not in store._nodes:
                        raise GraphImportError(f"edge {edge.edge_id} references missing node {endpoint!r}", lineno)
                store._edges[edge.edge_id] = edge
            else:
                raise GraphImportError(f"unknown record kind {kind!r}", lineno)
        if header is None:
            raise GraphImportError("missing header record", 1)
        if header.get("node_count") != len(store._nodes) or header.get("edge_count") != len(store._edges):
            raise GraphImportError(
                f"truncated file: header promises {header.get('node_count')} nodes / "
                f"{header.get('edge_count')} edges, found {len(store._nodes)} / {len(store._edges)}",
                len([l for l in lines if l.strip()]) + 1,
            )
        return store

    @classmethod
    def recover(cls, base_path: str | Path | None, wal_path: str | Path) -> "GraphStore":
        """Rebuild from a canonical file plus an append-only write-ahead log."""
        store = cls.load(base_path) if base_path and Path(base_path).exists() else cls()
        wal = Path(wal_path)
        if wal.exists():
            for lineno, line in enumerate(wal.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise GraphImportError(f"malformed WAL entry: {exc.msg}", lineno)
                op = record.pop("op", None)
                if op == "node":
                    node = _node_from_json(record)
                    store._nodes[node.entity_id] = node
                elif op == "edge":
                    edge = _edge_from_json(record)
                    store._edges[edge.edge_id] = edge
                elif op == "document":
                    store._documents[record["doc_id"]] = DocumentRecord(
                        record["doc_id"], record.get("title", ""), record.get("issuing_org", ""),
                        record.get("physiological_system", ""),
                    )
                else:
                    raise GraphImportError(f"unknown WAL op {op!r}", lineno)
        return store

    def canonical_bytes(self) -> bytes:
        return ("\n".join(self.export_lines()) + "\n").encode("utf-8")

    def equal_canonical(self, other: "GraphStore") -> bool:
        return self.canonical_bytes() == other.canonical_bytes()


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _doc_json(doc: DocumentRecord) -> dict:
    return {
        "doc_id": doc.doc_id,
        "title": doc.title,
        "issuing_org": doc.issuing_org,
        "physiological_system": doc.physiological_system,
    }


def _node_json(node: Node) -> dict:
    return {
        "entity_id": node.entity_id,
        "entity_type": node.entity_type,
        "label": node.label,
        "aliases": sorted(node.aliases),
        "attributes": {
            name: {
                "value": av.value,
                "kind": av.kind,
                **({"unit": av.unit} if av.unit else {}),
                "provenance": [p.to_json() for p in av.provenance],
            }
            for name, av in sorted(node.attributes.items())
        },
        "external_codes": sorted([list(c) for c in node.external_codes]),
        "system_tag": node.system_tag,
        "retracted": node.retracted,
    }


def _node_from_json(raw: dict) -> Node:
    return Node(
        entity_id=raw["entity_id"],
        entity_type=raw["entity_type"],
        label=raw["label"],
        aliases=tuple(raw.get("aliases", ())),
        attributes={
            name: AttributeValue(
                value=av["value"],
                kind=av["kind"],
                unit=av.get("unit"),
                provenance=tuple(Provenance.from_json(p) for p in av.get("provenance", ())),
            )
            for name, av in raw.get("attributes", {}).items()
        },
        external_codes=tuple((v, c) for v, c in raw.get("external_codes", ())),
        system_tag=raw.get("system_tag"),
        retracted=raw.get("retracted", False),
    )


def _edge_json(edge: Edge) -> dict:
    return {
        "edge_id": edge.edge_id,
        "subject": edge.subject,
        "relation": edge.relation,
        "object": edge.object,
        "provenance": [p.to_json() for p in edge.provenance],
        "status": edge.status,
    }


def _edge_from_json(raw: dict) -> Edge:
    return Edge(
        edge_id=raw["edge_id"],
        subject=raw["subject"],
        relation=raw["relation"],
        object=raw["object"],
        provenance=tuple(Provenance.from_json(p) for p in raw.get("provenance", ())),
        status=raw.get("status", "candidate"),
    )


