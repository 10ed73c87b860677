"""Graph-grounded question answering: neighborhood expansion plus chunk
retrieval, with a deterministic sentence composer that cites every claim.

Multi-hop results are reported as associations with path evidence, never as
causal claims.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .embeddings import EmbeddingProvider
from .errors import EmptyIndexError, NoContextError, UngroundedAnswerError
from .graph import Edge, GraphStore, Node
from .vindex import SearchHit, VectorIndex

MAX_QA_HOPS = 2

_RANGE_QUESTION_RE = re.compile(r"\b(reference range|normal range|normal value)\b", re.IGNORECASE)

RELATION_PHRASES = {
    "indicates_risk_of": "is directly associated with",
    "indirectly_associated_with": "is indirectly associated with",
}

REVERSE_PHRASES = {
    "indicates_risk_of": "is directly flagged by",
    "indirectly_associated_with": "is indirectly flagged by",
}


@dataclass(frozen=True)
class Question:
    text: str
    mode: str = "grounded"  # grounded | generative

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("question text must be non-empty")
        if self.mode not in ("grounded", "generative"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class ContextBundle:
    seed_entities: list[str]  # entity ids
    subgraph_nodes: set[str]
    subgraph_edges: list[Edge]
    distances: dict[str, int]
    chunks: list[SearchHit]
    hop_limit: int


@dataclass(frozen=True)
class AnswerFact:
    edge_id: str
    subject_label: str
    relation: str
    object_label: str
    hop: int


@dataclass
class Answer:
    text: str
    cited_edge_ids: tuple[str, ...]
    cited_chunk_ids: tuple[str, ...]
    hops_used: int
    facts: tuple[AnswerFact, ...] = ()


def find_seed_entities(question_text: str, graph: GraphStore) -> list[str]:
    """Entities whose label or alias occurs (case-folded, word-bounded) in the question."""
    folded = question_text.casefold()
    seeds = []
    for node in graph.nodes():
        for surface in {node.label, *node.aliases}:
            pattern = r"(?<!\w)" + re.escape(surface.casefold()) + r"(?!\w)"
            if re.search(pattern, folded):
                seeds.append(node.entity_id)
                break
    return sorted(seeds)


def retrieve_context(
    question: Question,
    graph: GraphStore,
    index: VectorIndex | None,
    embedder: EmbeddingProvider | None,
    k: int = 8,
    hop_limit: int = 1,
) -> ContextBundle:
    """Seeds from lexical entity matches; subgraph from asserted-edge BFS;
    chunks from the dense index. No seeds and no hits is an error."""
    if hop_limit > MAX_QA_HOPS:
        raise ValueError(f"hop_limit capped at {MAX_QA_HOPS}")
    seeds = find_seed_entities(question.text, graph)
    nodes: set[str] = set()
    edges: dict[str, Edge] = {}
    distances: dict[str, int] = {}
    for seed in seeds:
        seed_nodes, seed_edges, dist = graph.neighborhood(seed, hop_limit)
        nodes |= seed_nodes
        for e in seed_edges:
            edges[e.edge_id] = e
        for nid, d in dist.items():
            if nid not in distances or d < distances[nid]:
                distances[nid] = d
    hits: list[SearchHit] = []
    if index is not None and embedder is not None:
        try:
            hits = index.search(embedder.embed(question.text), k)
        except EmptyIndexError:
            hits = []
    if not seeds and not hits:
        raise NoContextError(f"no graph entities or indexed chunks match {question.text!r}")
    return ContextBundle(
        seed_entities=seeds,
        subgraph_nodes=nodes,
        subgraph_edges=sorted(edges.values(), key=lambda e: e.edge_id),
        distances=distances,
        chunks=hits,
        hop_limit=hop_limit,
    )


def _label(graph: GraphStore, entity_id: str) -> str:
    node = graph.get_node(entity_id)
    return node.label if node else entity_id


def _edge_hop(edge: Edge, distances: dict[str, int]) -> int:
    return max(distances.get(edge.subject, 0), distances.get(edge.object, 0))


def compose_grounded(question: Question, bundle: ContextBundle, graph: GraphStore) -> Answer:
    """Deterministic answer from fixed per-relation sentence templates.

    Every factual clause cites the edge ids (or, for reference ranges, the
    attribute provenance chunks) it derives from.
    """
    sentences: list[str] = []
    cited_edges: list[str] = []
    cited_chunks: list[str] = []
    facts: list[AnswerFact] = []

    for seed in bundle.seed_entities:
        node = graph.get_node(seed)
        if node is None:
            continue
        if _RANGE_QUESTION_RE.search(question.text):
            att = node.attributes.get("reference_range")
            if att is not None:
                chunk_ids = sorted({p.chunk_id for p in att.provenance})
                sentences.append(
                    f"The reference range for {node.label} is {att.value}."
                    + (f" [chunks: {', '.join(chunk_ids)}]" if chunk_ids else "")
                )
                cited_chunks.extend(chunk_ids)

        forward: dict[str, list[tuple[str, Edge]]] = {}
        reverse: dict[str, list[tuple[str, Edge]]] = {}
        for edge in bundle.subgraph_edges:
            if _edge_hop(edge, bundle.distances) > 1:
                continue
            if edge.subject == seed:
                forward.setdefault(edge.relation, []).append((_label(graph, edge.object), edge))
            elif edge.object == seed:
                reverse.setdefault(edge.relation, []).append((_label(graph, edge.subject), edge))
        for group, phrases in ((forward, RELATION_PHRASES), (reverse, REVERSE_PHRASES)):
            for relation in sorted(group):
                pairs = sorted(group[relation], key=lambda p: p[0].casefold())
                phrase = phrases.get(relation, f"relates via {relation} to")
                listed = ", ".join(label for label, _ in pairs)
                ids = [e.edge_id for _, e in pairs]
                sentences.append(f"{node.label} {phrase}: {listed}. [edges: {', '.join(ids)}]")
                cited_edges.extend(ids)
                facts.extend(
                    AnswerFact(
                        e.edge_id,
                        node.label if group is forward else label,
                        relation,
                        label if group is forward else node.label,
                        hop=1,
                    )
                    for label, e in pairs
                )

    if bundle.hop_limit >= 2 and bundle.seed_entities:
        two_hop = sorted(
            (nid for nid, d in bundle.distances.items() if d == 2),
            key=lambda nid: _label(graph, nid).casefold(),
        )
        if two_hop:
            connecting = [e for e in bundle.subgraph_edges if _edge_hop(e, bundle.distances) == 2]
            seed_labels = ", ".join(_label(graph, s) for s in bundle.seed_entities)
            labels = ", ".join(_label(graph, nid) for nid in two_hop)
            ids = [e.edge_id for e in connecting]
            sentences.append(
                f"Related to {seed_labels} through shared associations (2 hops): {labels}. "
                f"[edges: {', '.join(ids)}]"
            )
            cited_edges.extend(ids)
            facts.extend(
                AnswerFact(e.edge_id, _label(graph, e.subject), e.relation, _label(graph, e.object), hop=2)
                for e in connecting
            )

    if not sentences:
        sentences.append("No asserted graph knowledge matches the question; see retrieved chunks.")
        cited_chunks.extend(h.chunk_id for h in bundle.chunks)
    hops_used = max([d for d in bundle.distances.values()] or [0])
    return Answer(
        text=" ".join(sentences),
        cited_edge_ids=tuple(dict.fromkeys(cited_edges)),
        cited_chunk_ids=tuple(dict.fromkeys(cited_chunks)),
        hops_used=hops_used,
        facts=tuple(facts),
    )


def serialize_bundle(bundle: ContextBundle, graph: GraphStore) -> str:
    lines = ["Entities:"]
    for nid in sorted(bundle.subgraph_nodes, key=lambda n: _label(graph, n).casefold()):
        node = graph.get_node(nid)
        if node:
            lines.append(f"- {node.label} ({node.entity_type})")
    lines.append("Associations:")
    for e in bundle.subgraph_edges:
        lines.append(f"- {_label(graph, e.subject)} {e.relation} {_label(graph, e.object)} [{e.edge_id}]")
    return "\n".join(lines)


def answer_question(
    question: Question,
    bundle: ContextBundle,
    graph: GraphStore,
    provider=None,
) -> Answer:
    """Grounded mode composes offline; generative mode calls the provider and
    post-validates that every graph entity mentioned exists in the bundle."""
    if question.mode == "grounded":
        return compose_grounded(question, bundle, graph)
    if provider is None:
        raise ValueError("generative mode needs a model provider")
    prompt = (
        "Answer strictly from this context. Cite edge ids in brackets.\n\n"
        + serialize_bundle(bundle, graph)
        + f"\n\nQuestion: {question.text}\nAnswer:"
    )
    text = provider.complete(prompt)
    offending = []
    bundle_labels = {_label(graph, nid).casefold() for nid in bundle.subgraph_nodes}
    folded = text.casefold()
    for node in graph.nodes():
        surface = node.label.casefold()
        if surface in folded and surface not in bundle_labels:
            offending.append(node.label)
    if offending:
        raise UngroundedAnswerError(
            f"generative answer mentions entities outside the context: {sorted(offending)}",
            mentions=tuple(sorted(offending)),
        )
    cited = tuple(e.edge_id for e in bundle.subgraph_edges if e.edge_id in text)
    return Answer(
        text=text,
        cited_edge_ids=cited,
        cited_chunk_ids=tuple(h.chunk_id for h in bundle.chunks),
        hops_used=bundle.hop_limit,
    )
