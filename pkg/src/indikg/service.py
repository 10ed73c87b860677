"""HTTP service hosting the review loop, QA, and read-only graph endpoints.

Decision writes go through the review queue's optimistic-concurrency check;
everything else is read-only over the live graph. A bearer token (env
INDIKG_REVIEW_TOKEN) guards the mutating endpoints when set.
"""

from __future__ import annotations

import os
from fractions import Fraction

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .errors import (
    IndikgError,
    NoContextError,
    NotFoundError,
    ReviewConflictError,
    StateError,
)
from .extraction import align_candidates
from .fusion import fuse
from .pipeline import Pipeline, _candidate_from_json
from .qa import Question, answer_question, retrieve_context
from .review import CHECKLIST, FeedbackAction, ReviewQueue
from .vindex import VectorIndex


class ServiceRuntime:
    """Live stores shared by all requests: graph, queue, templates, retriever."""

    def __init__(self, pipeline: Pipeline):
        self.pipeline = pipeline
        self.config = pipeline.config
        self.graph = pipeline.load_graph()
        self.chunks = pipeline.load_chunks()
        self.documents = pipeline.load_documents()
        index_path = pipeline.config.resolve(pipeline.config.index_file)
        self.index = VectorIndex.load(index_path) if index_path.exists() else None
        self.queue = ReviewQueue(self.graph, log_path=pipeline.config.resolve(pipeline.config.review_log))
        self.queue._decisions = ReviewQueue.load_decisions(
            pipeline.config.resolve(pipeline.config.review_log)
        )
        self.queue.on_edit = self._handle_edit
        candidates = [e for e in self.graph.edges() if e.status == "candidate"]
        self.queue.enqueue_batch(candidates)

    def _handle_edit(self, edited_triple: dict, decision) -> None:
        """Edited triples re-enter alignment and fusion as fresh candidates."""
        record = dict(edited_triple)
        record.setdefault("attributes", [])
        record.setdefault("provenance", [])
        candidate = _candidate_from_json(record)
        aligned, rejected = align_candidates(self.pipeline.schema, [candidate])
        if rejected:
            messages = "; ".join(v.message for _, violations in rejected for v in violations)
            raise StateError(f"edited triple fails ontology alignment: {messages}")
        report = fuse(
            aligned,
            self.graph,
            self.pipeline.aliases,
            self.pipeline.priority,
            self.pipeline.schema,
            extractor=("review-edit", 0, f"reviewer:{decision.reviewer_id}"),
            documents=self.documents,
            unit_table=self.pipeline.unit_table,
        )
        new_candidates = [
            self.graph.get_edge(eid)
            for eid in report.edge_ids
            if self.graph.get_edge(eid) is not None and self.graph.get_edge(eid).status == "candidate"
        ]
        self.queue.enqueue_batch(new_candidates)

    def save_graph(self) -> None:
        self.graph.save(
            self.config.resolve(self.config.graph_file), schema_version=self.pipeline.schema.version
        )


class DecisionBody(BaseModel):
    action: str = Field(pattern="^(accept|reject|edit)$")
    expected_version: int
    note: str = ""
    edited_triple: dict | None = None
    reviewer: str = "anonymous"


class FeedbackBody(BaseModel):
    kind: str = Field(pattern="^(prompt_revision|rule_adjustment)$")
    new_body: str | None = None
    rule_patch: str | None = None
    justification: str = ""


class QABody(BaseModel):
    text: str
    mode: str = "grounded"
    k: int | None = None
    hop_limit: int | None = None


def _item_json(item) -> dict:
    return {
        "item_id": item.item_id,
        "edge_id": item.edge_id,
        "status": item.status,
        "version": item.version,
        "context": item.context,
    }


def _stats_json(queue: ReviewQueue) -> dict:
    stats = queue.stats()
    precision = None
    if stats.precision is not None:
        precision = {"numerator": stats.precision.numerator, "denominator": stats.precision.denominator,
                     "value": float(stats.precision)}
    return {
        "reviewed": stats.reviewed,
        "accepted": stats.accepted,
        "precision": precision,
        "percent": stats.percent_display(),
        "pending": queue.pending_count(),
    }


def create_app(runtime: ServiceRuntime) -> FastAPI:
    app = FastAPI(title="indikg review and QA service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=os.environ.get("INDIKG_CORS_ORIGINS", "*").split(","),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    token = os.environ.get("INDIKG_REVIEW_TOKEN", "")

    def require_token(authorization: str = Header(default="")) -> None:
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.exception_handler(IndikgError)
    async def _domain_errors(request, exc: IndikgError):
        from fastapi.responses import JSONResponse

        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, (ReviewConflictError, StateError)):
            status = 409
        elif isinstance(exc, NoContextError):
            status = 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    # --- review ---------------------------------------------------------------

    @app.get("/review/next")
    def review_next(reviewer: str = "anonymous"):
        item = runtime.queue.next_pending()
        return {"item": _item_json(item) if item else None, "reviewer": reviewer}

    @app.get("/review/items")
    def review_items(status: str | None = None):
        return {"items": [_item_json(i) for i in runtime.queue.items(status)]}

    @app.post("/review/items/{item_id}/decision", dependencies=[Depends(require_token)])
    def review_decide(item_id: str, body: DecisionBody):
        item = runtime.queue.submit_decision(
            item_id,
            body.action,
            expected_version=body.expected_version,
            reviewer_id=body.reviewer,
            note=body.note,
            edited_triple=body.edited_triple,
        )
        runtime.save_graph()
        return {"item": _item_json(item), "stats": _stats_json(runtime.queue)}

    @app.get("/review/stats")
    def review_stats():
        return _stats_json(runtime.queue)

    @app.get("/review/checklist")
    def review_checklist():
        return {"checklist": list(CHECKLIST)}

    # --- templates --------------------------------------------------------------

    @app.get("/templates/{template_id}/versions")
    def template_versions(template_id: str):
        versions = runtime.pipeline.templates.versions(template_id)
        return {
            "versions": [
                {"template_id": t.template_id, "version": t.version, "created_from": t.created_from}
                for t in versions
            ]
        }

    @app.post("/templates/{template_id}/feedback", dependencies=[Depends(require_token)])
    def template_feedback(template_id: str, body: FeedbackBody):
        action = FeedbackAction(
            action_id=f"fa-{len(runtime.pipeline.templates.versions(template_id)) + 1:04d}",
            kind=body.kind,
            target_template_id=template_id,
            new_body=body.new_body,
            rule_patch=body.rule_patch,
            justification=body.justification,
        )
        revised = runtime.pipeline.templates.record_feedback(action)
        return {
            "template_id": revised.template_id,
            "version": revised.version,
            "created_from": revised.created_from,
        }

    # --- graph ----------------------------------------------------------------

    @app.get("/graph/stats")
    def graph_stats():
        return runtime.graph.stats()

    @app.get("/graph/search")
    def graph_search(q: str = "", type: str | None = None):
        nodes = runtime.graph.find(entity_type=type) if type else runtime.graph.nodes()
        needle = q.casefold()
        out = [
            n
            for n in nodes
            if not needle
            or needle in n.label.casefold()
            or any(needle in a.casefold() for a in n.aliases)
        ]
        out.sort(key=lambda n: n.label.casefold())
        return {"nodes": [_node_json(n) for n in out[:50]]}

    @app.get("/graph/nodes/{entity_id}")
    def graph_node(entity_id: str):
        node = runtime.graph.get_node(entity_id)
        if node is None:
            raise NotFoundError(f"unknown entity {entity_id!r}")
        return _node_json(node)

    @app.get("/graph/nodes/{entity_id}/neighborhood")
    def graph_neighborhood(entity_id: str, hops: int = 1):
        if not (1 <= hops <= 2):
            raise HTTPException(status_code=422, detail="hops must be 1 or 2")
        nodes, edges, dist = runtime.graph.neighborhood(entity_id, hops)
        return {
            "nodes": [_node_json(runtime.graph.get_node(n)) for n in sorted(nodes) if runtime.graph.get_node(n)],
            "edges": [
                {
                    "edge_id": e.edge_id,
                    "subject": e.subject,
                    "relation": e.relation,
                    "object": e.object,
                    "status": e.status,
                    "provenance": [p.to_json() for p in e.provenance],
                }
                for e in edges
            ],
            "distances": dist,
        }

    @app.get("/graph/chunks/{chunk_id}")
    def graph_chunk(chunk_id: str):
        chunk = runtime.chunks.get(chunk_id)
        if chunk is None:
            raise NotFoundError(f"unknown chunk {chunk_id!r}")
        doc = runtime.documents.get(chunk.doc_id)
        return {
            "chunk_id": chunk.chunk_id,
            "doc_id": chunk.doc_id,
            "text": chunk.text,
            "section_path": list(chunk.section_path),
            "issuing_org": doc.issuing_org if doc else "",
            "title": doc.title if doc else "",
        }

    # --- qa ------------------------------------------------------------------

    @app.post("/qa")
    def qa(body: QABody):
        question = Question(text=body.text, mode=body.mode)
        bundle = retrieve_context(
            question,
            runtime.graph,
            runtime.index,
            runtime.pipeline.embedder if runtime.index is not None else None,
            k=body.k or runtime.config.retrieval_k,
            hop_limit=body.hop_limit or runtime.config.qa_hop_limit,
        )
        provider = runtime.pipeline.provider() if body.mode == "generative" else None
        answer = answer_question(question, bundle, runtime.graph, provider)
        return {
            "text": answer.text,
            "cited_edge_ids": list(answer.cited_edge_ids),
            "cited_chunk_ids": list(answer.cited_chunk_ids),
            "hops_used": answer.hops_used,
            "facts": [
                {
                    "edge_id": f.edge_id,
                    "subject": f.subject_label,
                    "relation": f.relation,
                    "object": f.object_label,
                    "hop": f.hop,
                }
                for f in answer.facts
            ],
        }

    return app


def _node_json(node) -> dict:
    return {
        "entity_id": node.entity_id,
        "entity_type": node.entity_type,
        "label": node.label,
        "aliases": sorted(node.aliases),
        "system_tag": node.system_tag,
        "attributes": {
            name: {"value": av.value, "kind": av.kind, "unit": av.unit,
                   "provenance": [p.to_json() for p in av.provenance]}
            for name, av in sorted(node.attributes.items())
        },
        "external_codes": [list(c) for c in node.external_codes],
    }
