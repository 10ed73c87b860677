"""Pipeline configuration: one JSON file, CLI flags override keys one-for-one."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: str = "fixtures/corpus"
    work_dir: str = "build"
    vocabulary_file: str | None = "fixtures/vocabulary.tsv"
    alias_file: str | None = "fixtures/aliases.tsv"
    priority_file: str | None = "fixtures/priority.tsv"
    codes_file: str | None = None
    unit_file: str | None = None  # None: packaged default table
    schema_file: str | None = None  # None: packaged default schema
    boilerplate_file: str | None = None  # None: packaged default patterns
    templates_file: str | None = None  # None: packaged default template
    intents_file: str | None = "fixtures/intents.json"
    mock_responses_dir: str | None = "fixtures/mock_responses"

    chunk_max_tokens: int = 200
    chunk_overlap_tokens: int = 40

    embedding_provider: str = "hashing"
    embedding_dimension: int = 256

    model_provider: str = "mock"  # mock | http
    model_base_url: str = ""
    model_name: str = ""
    model_token_env: str = "INDIKG_MODEL_TOKEN"
    audit_log: str | None = None

    retrieval_k: int = 8
    prompt_budget: int = 8000
    qa_hop_limit: int = 1

    graph_file: str = "build/graph.jsonl"
    index_file: str = "build/index.ikgx"
    review_log: str = "build/decisions.jsonl"

    serve_host: str = "127.0.0.1"
    serve_port: int = 8080

    base_dir: str = field(default=".", compare=False)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "PipelineConfig":
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
        cfg = cls(**raw, base_dir=str(p.parent))
        if overrides:
            cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        return cfg

    def resolve(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def validate(self) -> None:
        if not self.resolve(self.corpus_dir).is_dir():
            raise ConfigError(f"corpus_dir {self.corpus_dir!r} is not a directory")
        for name in ("vocabulary_file", "alias_file", "priority_file", "codes_file",
                     "unit_file", "schema_file", "boilerplate_file", "templates_file",
                     "intents_file", "mock_responses_dir"):
            value = getattr(self, name)
            if value is not None and not self.resolve(value).exists():
                raise ConfigError(f"{name} {value!r} does not exist")
        if self.chunk_max_tokens <= self.chunk_overlap_tokens or self.chunk_overlap_tokens < 0:
            raise ConfigError("chunking requires max_tokens > overlap_tokens >= 0")
        if not (1 <= self.embedding_dimension <= 65536):
            raise ConfigError("embedding_dimension out of range")
        if self.retrieval_k < 1:
            raise ConfigError("retrieval_k must be >= 1")
        if self.prompt_budget < 100:
            raise ConfigError("prompt_budget must be >= 100")
        if not (1 <= self.qa_hop_limit <= 2):
            raise ConfigError("qa_hop_limit must be 1 or 2")
        if self.model_provider not in ("mock", "http"):
            raise ConfigError(f"unknown model_provider {self.model_provider!r}")
        if self.model_provider == "mock" and self.mock_responses_dir is None:
            raise ConfigError("mock provider needs mock_responses_dir")
        if self.model_provider == "http" and not self.model_base_url:
            raise ConfigError("http provider needs model_base_url")

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "base_dir"}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
