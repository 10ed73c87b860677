"""Retrieval-grounded extraction: prompts, model providers, output parsing,
and ontology alignment of candidate triples.

The structured output contract is a JSON array of records with required keys
subject, subject_type, relation, object, object_type, attributes, provenance
(see docs/formats.md). Anything else becomes a ParseIssue, never an exception,
so a batch is always resumable.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .corpus import Chunk
from .embeddings import EmbeddingProvider
from .errors import ConfigError, PromptBudgetError, ProviderError
from .ontology import OntologySchema, Violation, check_attribute_value, validate_triple
from .vindex import VectorIndex

REQUIRED_RECORD_KEYS = (
    "subject",
    "subject_type",
    "relation",
    "object",
    "object_type",
    "attributes",
    "provenance",
)


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: int
    body: str
    created_from: str | None = None  # feedback action id

    PLACEHOLDERS = ("{ontology_summary}", "{chunks}", "{intent}")

    def __post_init__(self):
        if self.version < 1:
            raise ConfigError(f"template {self.template_id!r}: version must be >= 1")
        for ph in self.PLACEHOLDERS:
            if self.body.count(ph) != 1:
                raise ConfigError(
                    f"template {self.template_id!r} v{self.version}: needs exactly one {ph}"
                )


@dataclass(frozen=True)
class ExtractionIntent:
    query_text: str
    target_entity_types: frozenset[str] = frozenset()
    target_relations: frozenset[str] = frozenset()
    focus_indicator: str | None = None

    def validate_against(self, schema: OntologySchema) -> None:
        unknown = [t for t in self.target_entity_types if t not in schema.entity_types]
        unknown += [r for r in self.target_relations if r not in schema.relation_types]
        if unknown:
            raise ConfigError(f"intent names unknown schema members: {sorted(unknown)}")


@dataclass(frozen=True)
class CandidateAttribute:
    name: str
    raw_value: str
    parsed_value: object | None = None


@dataclass(frozen=True)
class CandidateTriple:
    subject_mention: str
    subject_type: str
    relation: str
    object_mention: str
    object_type: str
    attributes: tuple[CandidateAttribute, ...] = ()
    provenance: tuple[str, ...] = ()
    model_confidence: float | None = None
    status: str = "candidate"  # candidate | aligned | rejected


@dataclass(frozen=True)
class ParseIssue:
    position: int  # record index in the payload, -1 for payload-level issues
    message: str


@dataclass
class ExtractionBatch:
    intent: ExtractionIntent
    template_id: str
    template_version: int
    provider_identity: str
    retrieved_chunk_ids: tuple[str, ...]
    candidates: list[CandidateTriple] = field(default_factory=list)
    issues: list[ParseIssue] = field(default_factory=list)
    status: str = "ok"  # ok | failed
    started_at: float = 0.0
    finished_at: float = 0.0


class ModelProvider(Protocol):
    @property
    def identity(self) -> str: ...

    def complete(self, prompt: str) -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockProvider:
    """Replayable provider: completions read from files named by prompt digest.

    A pure function of the prompt, so fixture tests break loudly whenever
    prompt construction changes.
    """

    def __init__(self, responses_dir: str | Path):
        self.responses_dir = Path(responses_dir)

    @property
    def identity(self) -> str:
        return "mock"

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        path = self.responses_dir / f"{digest}.json"
        if not path.exists():
            raise ProviderError(
                f"mock provider has no canned response for digest {digest} "
                f"(prompt construction changed? regenerate with scripts/regen_mock_responses.py)",
                retryable=False,
            )
        return path.read_text(encoding="utf-8")


class HTTPProvider:
    """Chat-completion endpoint client; auth token from an environment variable.

    Every request/response pair is appended to a JSON Lines audit file. The
    token never appears in the audit log.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        token_env: str = "INDIKG_MODEL_TOKEN",
        audit_path: str | Path | None = None,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.token_env = token_env
        self.audit_path = Path(audit_path) if audit_path else None
        self.timeout = timeout

    @property
    def identity(self) -> str:
        return f"http:{self.base_url}#{self.model}"

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider request failed: {exc}", retryable=True) from exc
        if resp.status_code >= 500:
            raise ProviderError(f"provider returned {resp.status_code}", retryable=True)
        if resp.status_code != 200:
            raise ProviderError(f"provider returned {resp.status_code}: {resp.text[:200]}", retryable=False)
        payload = resp.json()
        try:
            completion = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}", retryable=False) from exc
        self._audit(prompt, completion)
        return completion

    def _audit(self, prompt: str, completion: str) -> None:
        if self.audit_path is None:
            return
        record = {"provider": self.identity, "prompt": prompt, "completion": completion, "at": time.time()}
        with open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class Retriever:
    """Bundles the embedder, the vector index, and the chunk texts."""

    def __init__(self, embedder: EmbeddingProvider, index: VectorIndex, chunks: dict[str, Chunk]):
        self.embedder = embedder
        self.index = index
        self.chunks = chunks

    def top_chunks(self, query_text: str, k: int) -> list[Chunk]:
        hits = self.index.search(self.embedder.embed(query_text), k)
        return [self.chunks[h.chunk_id] for h in hits if h.chunk_id in self.chunks]


def ontology_summary(schema: OntologySchema, intent: ExtractionIntent) -> str:
    """Entity/relation/attribute lines for the prompt, limited to the intent's targets."""
    etypes = sorted(intent.target_entity_types) or sorted(schema.entity_types)
    rels = sorted(intent.target_relations) or sorted(schema.relation_types)
    lines = ["entity types: " + ", ".join(etypes)]
    for name in rels:
        rel = schema.relation_types[name]
        lines.append(
            f"relation {name}: {'|'.join(sorted(rel.domain_types))} -> {'|'.join(sorted(rel.range_types))}"
        )
    lines.append(
        "attributes: "
        + ", ".join(f"{a.name} ({a.value_kind})" for a in sorted(schema.attribute_defs.values(), key=lambda a: a.name))
    )
    return "\n".join(lines)


def build_prompt(
    template: PromptTemplate,
    schema: OntologySchema,
    chunks: list[Chunk],
    intent: ExtractionIntent,
    budget_tokens: int = 8000,
) -> str:
    """Deterministic substitution of the three placeholders.

    Chunks are serialized with [CHUNK <id>] markers so the model can echo
    provenance back. Whitespace-token count over budget raises.
    """
    if not chunks:
        raise ConfigError("build_prompt needs at least one chunk")
    chunk_block = "\n\n".join(f"[CHUNK {c.chunk_id}]\n{c.text}" for c in chunks)
    intent_line = intent.query_text
    if intent.focus_indicator:
        intent_line += f" (focus: {intent.focus_indicator})"
    prompt = (
        template.body.replace("{ontology_summary}", ontology_summary(schema, intent))
        .replace("{chunks}", chunk_block)
        .replace("{intent}", intent_line)
    )
    n_tokens = len(prompt.split())
    if n_tokens > budget_tokens:
        raise PromptBudgetError(
            f"prompt is {n_tokens} tokens, budget is {budget_tokens}", overflow=n_tokens - budget_tokens
        )
    return prompt


def parse_model_output(text: str) -> tuple[list[CandidateTriple], list[ParseIssue]]:
    """Strict parse of the documented JSON-array output format.

    Records failing validation become ParseIssues with their array position;
    nothing raises.
    """
    issues: list[ParseIssue] = []
    candidates: list[CandidateTriple] = []
    if not text.strip():
        return [], [ParseIssue(-1, "empty completion")]
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        return [], [ParseIssue(-1, f"completion is not valid JSON: {exc}")]
    if not isinstance(payload, list):
        return [], [ParseIssue(-1, f"expected a JSON array, got {type(payload).__name__}")]

    for pos, record in enumerate(payload):
        if not isinstance(record, dict):
            issues.append(ParseIssue(pos, "record is not an object"))
            continue
        missing = [k for k in REQUIRED_RECORD_KEYS if k not in record]
        if missing:
            issues.append(ParseIssue(pos, f"missing required keys: {', '.join(missing)}"))
            continue
        problems = []
        for key in ("subject", "subject_type", "relation", "object", "object_type"):
            if not isinstance(record[key], str) or not record[key].strip():
                problems.append(f"{key} must be a non-empty string")
        if not isinstance(record["provenance"], list) or not record["provenance"]:
            problems.append("provenance must be a non-empty list of chunk ids")
        elif not all(isinstance(p, str) and p for p in record["provenance"]):
            problems.append("provenance entries must be chunk id strings")
        attrs: list[CandidateAttribute] = []
        if not isinstance(record["attributes"], list):
            problems.append("attributes must be a list")
        else:
            for a in record["attributes"]:
                if not isinstance(a, dict) or "name" not in a or "value" not in a:
                    problems.append("attributes entries need name and value")
                    break
                attrs.append(CandidateAttribute(str(a["name"]), str(a["value"])))
        confidence = record.get("confidence")
        if confidence is not None and not (isinstance(confidence, (int, float)) and 0 <= confidence <= 1):
            problems.append("confidence must be in [0, 1]")
        if problems:
            issues.append(ParseIssue(pos, "; ".join(problems)))
            continue
        candidates.append(
            CandidateTriple(
                subject_mention=record["subject"].strip(),
                subject_type=record["subject_type"].strip(),
                relation=record["relation"].strip(),
                object_mention=record["object"].strip(),
                object_type=record["object_type"].strip(),
                attributes=tuple(attrs),
                provenance=tuple(record["provenance"]),
                model_confidence=float(confidence) if confidence is not None else None,
            )
        )
    return candidates, issues


def run_extraction(
    intent: ExtractionIntent,
    retriever: Retriever,
    provider: ModelProvider,
    template: PromptTemplate,
    schema: OntologySchema,
    k: int = 8,
    budget_tokens: int = 8000,
) -> ExtractionBatch:
    """Retrieve, prompt, complete, and parse one extraction batch.

    Provider failures raise ProviderError with the failed batch attached;
    parse failures are recorded per candidate and never batch-fatal.
    """
    intent.validate_against(schema)
    chunks = retriever.top_chunks(intent.query_text, k)
    batch = ExtractionBatch(
        intent=intent,
        template_id=template.template_id,
        template_version=template.version,
        provider_identity=provider.identity,
        retrieved_chunk_ids=tuple(c.chunk_id for c in chunks),
        started_at=time.time(),
    )
    prompt = build_prompt(template, schema, chunks, intent, budget_tokens)
    try:
        completion = provider.complete(prompt)
    except ProviderError as exc:
        batch.status = "failed"
        batch.finished_at = time.time()
        raise ProviderError(str(exc), retryable=exc.retryable, batch=batch) from exc
    candidates, issues = parse_model_output(completion)
    retrieved = set(batch.retrieved_chunk_ids)
    for pos, cand in enumerate(candidates):
        extra = [p for p in cand.provenance if p not in retrieved]
        if extra:
            issues.append(
                ParseIssue(pos, f"provenance cites chunks outside the retrieved set: {sorted(extra)}")
            )
        else:
            batch.candidates.append(cand)
    batch.issues.extend(issues)
    batch.finished_at = time.time()
    return batch


def align_candidates(
    schema: OntologySchema, candidates: list[CandidateTriple]
) -> tuple[list[CandidateTriple], list[tuple[CandidateTriple, list[Violation]]]]:
    """Split candidates into schema-aligned and rejected.

    Reference-range and numeric attribute values are parsed here and stored
    as parsed_value on the aligned copies.
    """
    aligned: list[CandidateTriple] = []
    rejected: list[tuple[CandidateTriple, list[Violation]]] = []
    for cand in candidates:
        violations = validate_triple(schema, cand)
        if violations:
            rejected.append((dataclasses.replace(cand, status="rejected"), violations))
            continue
        parsed_attrs = []
        for attr in cand.attributes:
            parsed, violation = check_attribute_value(schema, attr.name, attr.raw_value)
            assert violation is None  # validate_triple already vetted kinds
            parsed_attrs.append(dataclasses.replace(attr, parsed_value=parsed))
        aligned.append(dataclasses.replace(cand, attributes=tuple(parsed_attrs), status="aligned"))
    return aligned, rejected
