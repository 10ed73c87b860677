"""Guideline documents: loading, preprocessing, and chunking with provenance.

Everything here is a pure function of its inputs; documents, normalized
documents, and chunks are immutable once built, and ids are content hashes
so repeated runs produce identical identifiers.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .errors import ConfigError, EmptyDocumentError, EncodingError


@dataclass(frozen=True)
class GuidelineDocument:
    doc_id: str
    title: str
    issuing_org: str
    physiological_system: str
    source_uri: str
    raw_text: str
    ingested_at: datetime = field(compare=False, default_factory=lambda: datetime.now(timezone.utc))


@dataclass(frozen=True)
class RemovedSpan:
    start: int
    end: int
    reason: str  # boilerplate | citation-marker | page-artifact


@dataclass(frozen=True)
class Substitution:
    surface: str
    canonical: str
    vocabulary_id: str


@dataclass(frozen=True)
class NormalizedDocument:
    doc_id: str
    normalized_text: str
    removed_spans: tuple[RemovedSpan, ...]
    substitutions: tuple[Substitution, ...]


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    char_span: tuple[int, int]  # into normalized_text
    section_path: tuple[str, ...]
    approx_token_count: int


@dataclass(frozen=True)
class ChunkPolicy:
    max_tokens: int = 200
    overlap_tokens: int = 40

    def __post_init__(self):
        if self.overlap_tokens < 0 or self.max_tokens <= self.overlap_tokens:
            raise ConfigError("chunk policy requires max_tokens > overlap_tokens >= 0")


def load_tsv_groups(path: str | Path) -> list[tuple[str, list[str]]]:
    """Read `first<TAB>rest...` records, skipping blanks and # comments."""
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t") if p.strip()]
        if parts:
            rows.append((parts[0], parts[1:]))
    return rows


class ControlledVocabulary:
    """Canonical terms and their surface aliases, for terminology normalization.

    File format: one record per line, `canonical<TAB>alias1<TAB>alias2...`.
    Matching is case-insensitive on word boundaries, longest surface first.
    """

    def __init__(self, entries: dict[str, list[str]], vocabulary_id: str = "inline"):
        self.vocabulary_id = vocabulary_id
        self._canonical_by_surface: dict[str, str] = {}
        for canonical, aliases in entries.items():
            for alias in aliases:
                self._canonical_by_surface[alias.casefold()] = canonical
        surfaces = sorted(self._canonical_by_surface, key=len, reverse=True)
        self._pattern = (
            re.compile(r"\b(?:" + "|".join(re.escape(s) for s in surfaces) + r")\b", re.IGNORECASE)
            if surfaces
            else None
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ControlledVocabulary":
        entries = {canonical: aliases for canonical, aliases in load_tsv_groups(path)}
        return cls(entries, vocabulary_id=Path(path).name)

    @classmethod
    def empty(cls) -> "ControlledVocabulary":
        return cls({})

    def canonical_for(self, surface: str) -> str | None:
        return self._canonical_by_surface.get(surface.casefold())

    def substitute(self, text: str) -> tuple[str, list[Substitution]]:
        if self._pattern is None:
            return text, []
        subs: list[Substitution] = []

        def repl(m: re.Match) -> str:
            canonical = self._canonical_by_surface[m.group(0).casefold()]
            if m.group(0) == canonical:
                return canonical
            subs.append(Substitution(m.group(0), canonical, self.vocabulary_id))
            return canonical

        return self._pattern.sub(repl, text), subs


class BoilerplatePatterns:
    """Editable pattern set naming what counts as non-informative content."""

    def __init__(self, patterns: list[tuple[str, re.Pattern]]):
        self.patterns = patterns

    @classmethod
    def from_file(cls, path: str | Path) -> "BoilerplatePatterns":
        pats = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                reason, regex = line.split("\t", 1)
            except ValueError:
                raise ConfigError(f"boilerplate pattern file {path}:{lineno}: expected reason<TAB>regex")
            if reason not in ("boilerplate", "citation-marker", "page-artifact"):
                raise ConfigError(f"boilerplate pattern file {path}:{lineno}: unknown reason {reason!r}")
            pats.append((reason, re.compile(regex, re.MULTILINE)))
        return cls(pats)

    @classmethod
    def default(cls) -> "BoilerplatePatterns":
        with resources.as_file(resources.files("indikg.data").joinpath("boilerplate_patterns.tsv")) as p:
            return cls.from_file(p)


def _doc_id(source_bytes: bytes, source_uri: str) -> str:
    h = hashlib.sha256()
    h.update(source_bytes)
    h.update(b"\x00")
    h.update(source_uri.encode("utf-8"))
    return "d" + h.hexdigest()[:16]


def load_document(
    source: bytes | str | Path,
    *,
    title: str,
    issuing_org: str,
    physiological_system: str = "",
    source_uri: str = "",
) -> GuidelineDocument:
    """Load plain-text or Markdown-like guideline content into a document.

    The doc_id is a content hash of (source bytes, source_uri), so identical
    inputs always map to the same id.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        data = path.read_bytes()
        if not source_uri:
            source_uri = path.name
    else:
        data = source
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"source does not decode as UTF-8: {exc}") from exc
    if not text.strip():
        raise EmptyDocumentError("document body is empty")
    if not issuing_org:
        raise ConfigError("issuing_org is required (source prioritization depends on it)")
    return GuidelineDocument(
        doc_id=_doc_id(data, source_uri),
        title=title,
        issuing_org=issuing_org,
        physiological_system=physiological_system,
        source_uri=source_uri,
        raw_text=text,
    )


def load_document_with_sidecar(path: str | Path) -> GuidelineDocument:
    """Load `<name>.md` plus its `<name>.meta.json` metadata sidecar."""
    path = Path(path)
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return load_document(
        path,
        title=meta["title"],
        issuing_org=meta["issuing_org"],
        physiological_system=meta.get("physiological_system", ""),
        source_uri=meta.get("source_uri", path.name),
    )


def preprocess(
    doc: GuidelineDocument,
    vocabulary: ControlledVocabulary | None = None,
    patterns: BoilerplatePatterns | None = None,
) -> NormalizedDocument:
    """Strip non-informative content and normalize terminology.

    Idempotent: the canonical forms a pass introduces are never themselves
    rewritten, and removed patterns do not reappear.
    """
    vocabulary = vocabulary or ControlledVocabulary.empty()
    patterns = patterns or BoilerplatePatterns.default()

    spans: list[RemovedSpan] = []
    taken: list[tuple[int, int]] = []
    for reason, pattern in patterns.patterns:
        for m in pattern.finditer(doc.raw_text):
            if m.start() == m.end():
                continue
            if any(s < m.end() and m.start() < e for s, e in taken):
                continue
            taken.append((m.start(), m.end()))
            spans.append(RemovedSpan(m.start(), m.end(), reason))
    spans.sort(key=lambda s: s.start)

    kept = []
    cursor = 0
    for span in spans:
        kept.append(doc.raw_text[cursor : span.start])
        cursor = span.end
    kept.append(doc.raw_text[cursor:])
    filtered = "".join(kept)

    normalized, subs = vocabulary.substitute(filtered)
    return NormalizedDocument(
        doc_id=doc.doc_id,
        normalized_text=normalized,
        removed_spans=tuple(spans),
        substitutions=tuple(subs),
    )


_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*)$")


def _tokens_with_spans(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]


def _segments(text: str) -> list[tuple[int, int, tuple[str, ...]]]:
    """Split at Markdown headings; each segment starts at its heading line."""
    starts: list[tuple[int, int, str]] = []  # (char offset, level, title)
    offset = 0
    for line in text.splitlines(keepends=True):
        m = _HEADING_RE.match(line.rstrip("\n"))
        if m:
            starts.append((offset, len(m.group(1)), m.group(2).strip()))
        offset += len(line)
    if not starts:
        return [(0, len(text), ())]
    segments = []
    path: list[tuple[int, str]] = []
    if starts[0][0] > 0:
        segments.append((0, starts[0][0], ()))
    for i, (pos, level, title) in enumerate(starts):
        path = [(lv, t) for lv, t in path if lv < level] + [(level, title)]
        end = starts[i + 1][0] if i + 1 < len(starts) else len(text)
        segments.append((pos, end, tuple(t for _, t in path)))
    return segments


def chunk_document(ndoc: NormalizedDocument, policy: ChunkPolicy = ChunkPolicy()) -> list[Chunk]:
    """Cut the normalized text into retrieval units.

    Chunks never cross heading boundaries; inside a section, chunks carry an
    overlap window of `overlap_tokens` from their predecessor and stay within
    `max_tokens` whitespace tokens including that overlap. Spans tile the
    text: concatenating chunk texts minus the overlaps reconstructs it.
    """
    text = ndoc.normalized_text
    if not text.strip():
        return []

    tok_spans = _tokens_with_spans(text)
    tok_starts = [s for s, _ in tok_spans]
    windows: list[tuple[int, int, tuple[str, ...]]] = []  # (tok_start, tok_end, section)

    for seg_start, seg_end, section in _segments(text):
        first_tok = bisect.bisect_left(tok_starts, seg_start)
        last_tok = bisect.bisect_left(tok_starts, seg_end)
        if first_tok == last_tok:
            continue
        window_start = first_tok
        while True:
            window_end = min(last_tok, window_start + policy.max_tokens)
            windows.append((window_start, window_end, section))
            if window_end == last_tok:
                break
            window_start = window_end - policy.overlap_tokens

    # Char spans tile the text: chunk k ends where chunk k+1 begins unless the
    # two share an overlap window; first/last chunks absorb the outer margins.
    starts = [0] + [tok_spans[a][0] for a, _, _ in windows[1:]]
    chunks: list[Chunk] = []
    for ordinal, (tok_a, tok_b, section) in enumerate(windows):
        char_start = starts[ordinal]
        if ordinal == len(windows) - 1:
            char_end = len(text)
        else:
            char_end = max(tok_spans[tok_b - 1][1], starts[ordinal + 1])
        chunks.append(
            Chunk(
                chunk_id=f"{ndoc.doc_id}:{ordinal:04d}",
                doc_id=ndoc.doc_id,
                text=text[char_start:char_end],
                char_span=(char_start, char_end),
                section_path=section,
                approx_token_count=tok_b - tok_a,
            )
        )
    return chunks


def reconstruct_from_chunks(chunks: list[Chunk]) -> str:
    """Inverse of chunk_document modulo overlaps (used by tests)."""
    out = []
    prev_end = 0
    for chunk in sorted(chunks, key=lambda c: c.char_span[0]):
        start, end = chunk.char_span
        skip = max(0, prev_end - start)
        out.append(chunk.text[skip:])
        prev_end = end
    return "".join(out)
