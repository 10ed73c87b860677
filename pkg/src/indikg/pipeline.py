"""End-to-end pipeline stages over a PipelineConfig, shared by CLI and service.

Each stage reads and writes plain work files (JSON Lines) under work_dir, so
stages are individually resumable and their outputs inspectable.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from .config import PipelineConfig
from .corpus import (
    BoilerplatePatterns,
    Chunk,
    ChunkPolicy,
    ControlledVocabulary,
    chunk_document,
    load_document_with_sidecar,
    preprocess,
)
from .embeddings import HashingEmbedder
from .errors import ConfigError, EmptyIndexError, ProviderError
from .extraction import (
    CandidateAttribute,
    CandidateTriple,
    ExtractionIntent,
    HTTPProvider,
    MockProvider,
    Retriever,
    align_candidates,
    run_extraction,
)
from .fusion import AliasTable, SourcePriority, fuse
from .graph import DocumentRecord, GraphStore
from .ontology import OntologySchema, check_graph_constraints, default_schema, load_schema
from .qa import Question, answer_question, retrieve_context
from .review import ReviewQueue, TemplateRegistry
from .units import UnitTable, default_unit_table
from .vindex import VectorIndex


def _packaged(name: str) -> Path:
    with resources.as_file(resources.files("indikg.data").joinpath(name)) as p:
        return p


class Pipeline:
    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.work_dir = config.resolve(config.work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)

        self.schema: OntologySchema = (
            load_schema(config.resolve(config.schema_file)) if config.schema_file else default_schema()
        )
        self.unit_table: UnitTable = (
            UnitTable.from_file(config.resolve(config.unit_file)) if config.unit_file else default_unit_table()
        )
        self.vocabulary = (
            ControlledVocabulary.from_file(config.resolve(config.vocabulary_file))
            if config.vocabulary_file
            else ControlledVocabulary.empty()
        )
        self.aliases = (
            AliasTable.from_file(config.resolve(config.alias_file)) if config.alias_file else AliasTable.empty()
        )
        self.priority = (
            SourcePriority.from_file(config.resolve(config.priority_file))
            if config.priority_file
            else SourcePriority([])
        )
        self.patterns = (
            BoilerplatePatterns.from_file(config.resolve(config.boilerplate_file))
            if config.boilerplate_file
            else BoilerplatePatterns.default()
        )
        self.templates = TemplateRegistry.from_file(
            config.resolve(config.templates_file) if config.templates_file else _packaged("default_templates.json")
        )
        self.embedder = HashingEmbedder(config.embedding_dimension)

    # --- providers -----------------------------------------------------------

    def provider(self):
        if self.config.model_provider == "mock":
            return MockProvider(self.config.resolve(self.config.mock_responses_dir))
        return HTTPProvider(
            self.config.model_base_url,
            self.config.model_name,
            token_env=self.config.model_token_env,
            audit_path=self.config.resolve(self.config.audit_log) if self.config.audit_log else None,
        )

    # --- stage: ingest ---------------------------------------------------------

    def ingest(self) -> dict:
        corpus_dir = self.config.resolve(self.config.corpus_dir)
        policy = ChunkPolicy(self.config.chunk_max_tokens, self.config.chunk_overlap_tokens)
        docs_out = []
        chunks_out = []
        for md in sorted(corpus_dir.glob("*.md")):
            doc = load_document_with_sidecar(md)
            ndoc = preprocess(doc, self.vocabulary, self.patterns)
            chunks = chunk_document(ndoc, policy)
            docs_out.append(
                {
                    "doc_id": doc.doc_id,
                    "title": doc.title,
                    "issuing_org": doc.issuing_org,
                    "physiological_system": doc.physiological_system,
                    "source_uri": doc.source_uri,
                    "normalized_text": ndoc.normalized_text,
                    "removed_spans": [[s.start, s.end, s.reason] for s in ndoc.removed_spans],
                    "substitutions": [[s.surface, s.canonical, s.vocabulary_id] for s in ndoc.substitutions],
                }
            )
            for c in chunks:
                chunks_out.append(
                    {
                        "chunk_id": c.chunk_id,
                        "doc_id": c.doc_id,
                        "text": c.text,
                        "char_span": list(c.char_span),
                        "section_path": list(c.section_path),
                        "approx_token_count": c.approx_token_count,
                    }
                )
        _write_jsonl(self.work_dir / "docs.jsonl", docs_out)
        _write_jsonl(self.work_dir / "chunks.jsonl", chunks_out)
        return {"documents": len(docs_out), "chunks": len(chunks_out)}

    def load_documents(self) -> dict[str, DocumentRecord]:
        out = {}
        for raw in _read_jsonl(self.work_dir / "docs.jsonl"):
            out[raw["doc_id"]] = DocumentRecord(
                raw["doc_id"], raw["title"], raw["issuing_org"], raw.get("physiological_system", "")
            )
        return out

    def load_chunks(self) -> dict[str, Chunk]:
        out = {}
        for raw in _read_jsonl(self.work_dir / "chunks.jsonl"):
            chunk = Chunk(
                chunk_id=raw["chunk_id"],
                doc_id=raw["doc_id"],
                text=raw["text"],
                char_span=tuple(raw["char_span"]),
                section_path=tuple(raw["section_path"]),
                approx_token_count=raw["approx_token_count"],
            )
            out[chunk.chunk_id] = chunk
        return out

    # --- stage: index ------------------------------------------------------------

    def build_index(self) -> dict:
        chunks = self.load_chunks()
        index = VectorIndex(self.config.embedding_dimension)
        skipped = 0
        for chunk in sorted(chunks.values(), key=lambda c: c.chunk_id):
            vector = self.embedder.embed(chunk.text)
            if vector.is_zero:
                skipped += 1
                continue
            index.add_chunk(chunk, vector)
        index.save(self.config.resolve(self.config.index_file))
        return {"indexed": index.size(), "skipped_empty": skipped}

    def retriever(self) -> Retriever:
        index = VectorIndex.load(self.config.resolve(self.config.index_file))
        return Retriever(self.embedder, index, self.load_chunks())

    # --- stage: extract ---------------------------------------------------------

    def load_intents(self) -> list[ExtractionIntent]:
        if not self.config.intents_file:
            raise ConfigError("no intents_file configured")
        raw = json.loads(self.config.resolve(self.config.intents_file).read_text(encoding="utf-8"))
        return [
            ExtractionIntent(
                query_text=i["query_text"],
                target_entity_types=frozenset(i.get("target_entity_types", ())),
                target_relations=frozenset(i.get("target_relations", ())),
                focus_indicator=i.get("focus_indicator"),
            )
            for i in raw
        ]

    def extract(self) -> dict:
        retriever = self.retriever()
        provider = self.provider()
        template = self.templates.latest("indicator-extraction")
        batches_out = []
        counts = {"batches": 0, "candidates": 0, "issues": 0, "failed": 0}
        for intent in self.load_intents():
            try:
                batch = run_extraction(
                    intent,
                    retriever,
                    provider,
                    template,
                    self.schema,
                    k=self.config.retrieval_k,
                    budget_tokens=self.config.prompt_budget,
                )
            except ProviderError as exc:
                counts["failed"] += 1
                if exc.batch is not None:
                    batches_out.append(_batch_json(exc.batch))
                continue
            counts["batches"] += 1
            counts["candidates"] += len(batch.candidates)
            counts["issues"] += len(batch.issues)
            batches_out.append(_batch_json(batch))
        _write_jsonl(self.work_dir / "batches.jsonl", batches_out)
        return counts

    # --- stage: fuse -------------------------------------------------------------

    def load_graph(self) -> GraphStore:
        path = self.config.resolve(self.config.graph_file)
        return GraphStore.load(path) if path.exists() else GraphStore()

    def fuse_batches(self) -> dict:
        documents = self.load_documents()
        graph = self.load_graph()
        counts = {"candidates": 0, "aligned": 0, "rejected": 0, "fused_edges": 0,
                  "conflicts_resolved": 0, "conflicts_escalated": 0, "enqueued": 0}
        queue = ReviewQueue(graph)
        all_edge_ids: list[str] = []
        for raw in _read_jsonl(self.work_dir / "batches.jsonl"):
            if raw.get("status") == "failed":
                continue
            candidates = [_candidate_from_json(c) for c in raw["candidates"]]
            counts["candidates"] += len(candidates)
            aligned, rejected = align_candidates(self.schema, candidates)
            counts["aligned"] += len(aligned)
            counts["rejected"] += len(rejected)
            report = fuse(
                aligned,
                graph,
                self.aliases,
                self.priority,
                self.schema,
                extractor=(raw["template_id"], raw["template_version"], raw["provider_identity"]),
                documents=documents,
                unit_table=self.unit_table,
            )
            counts["fused_edges"] += report.merged_count
            counts["conflicts_resolved"] += report.conflicts_resolved
            counts["conflicts_escalated"] += report.conflicts_escalated
            all_edge_ids.extend(report.edge_ids)
        pending = [graph.get_edge(eid) for eid in dict.fromkeys(all_edge_ids)]
        counts["enqueued"] = len(queue.enqueue_batch([e for e in pending if e and e.status == "candidate"]))
        graph.save(self.config.resolve(self.config.graph_file), schema_version=self.schema.version)
        return counts

    # --- stage: validate / stats / qa ---------------------------------------------

    def validate_graph(self) -> list:
        return check_graph_constraints(self.schema, self.load_graph())

    def graph_stats(self) -> dict:
        return self.load_graph().stats()

    def answer(self, text: str, mode: str = "grounded", k: int | None = None, hop_limit: int | None = None):
        graph = self.load_graph()
        index_path = self.config.resolve(self.config.index_file)
        index = VectorIndex.load(index_path) if index_path.exists() else None
        question = Question(text=text, mode=mode)
        bundle = retrieve_context(
            question,
            graph,
            index,
            self.embedder if index is not None else None,
            k=k or self.config.retrieval_k,
            hop_limit=hop_limit or self.config.qa_hop_limit,
        )
        provider = self.provider() if mode == "generative" else None
        return answer_question(question, bundle, graph, provider)

    # --- manifests ----------------------------------------------------------------

    def write_manifest(self, command: str, counts: dict, started: float) -> dict:
        manifest = {
            "run_id": uuid.uuid4().hex[:12],
            "command": command,
            "config_digest": self.config.digest(),
            "started_at": started,
            "finished_at": time.time(),
            "counts": counts,
        }
        with open(self.work_dir / "manifest.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, ensure_ascii=False) + "\n")
        return manifest


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path):
    if not path.exists():
        raise ConfigError(f"missing work file {path}; run the earlier pipeline stages first")
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            yield json.loads(line)


def _batch_json(batch) -> dict:
    return {
        "intent": {
            "query_text": batch.intent.query_text,
            "target_entity_types": sorted(batch.intent.target_entity_types),
            "target_relations": sorted(batch.intent.target_relations),
            "focus_indicator": batch.intent.focus_indicator,
        },
        "template_id": batch.template_id,
        "template_version": batch.template_version,
        "provider_identity": batch.provider_identity,
        "retrieved_chunk_ids": list(batch.retrieved_chunk_ids),
        "candidates": [
            {
                "subject": c.subject_mention,
                "subject_type": c.subject_type,
                "relation": c.relation,
                "object": c.object_mention,
                "object_type": c.object_type,
                "attributes": [{"name": a.name, "value": a.raw_value} for a in c.attributes],
                "provenance": list(c.provenance),
                **({"confidence": c.model_confidence} if c.model_confidence is not None else {}),
            }
            for c in batch.candidates
        ],
        "issues": [[i.position, i.message] for i in batch.issues],
        "status": batch.status,
        "started_at": batch.started_at,
        "finished_at": batch.finished_at,
    }


def _candidate_from_json(raw: dict) -> CandidateTriple:
    return CandidateTriple(
        subject_mention=raw["subject"],
        subject_type=raw["subject_type"],
        relation=raw["relation"],
        object_mention=raw["object"],
        object_type=raw["object_type"],
        attributes=tuple(CandidateAttribute(a["name"], a["value"]) for a in raw["attributes"]),
        provenance=tuple(raw["provenance"]),
        model_confidence=raw.get("confidence"),
    )
