"""Expert-in-the-loop review: pending queue, decisions, precision, feedback.

The decision log is append-only and is the source of truth; queue state and
precision are always recomputable from it. Optimistic concurrency: every item
carries a version counter, and a decision must name the version it saw.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import NotFoundError, ReviewConflictError, StateError
from .extraction import PromptTemplate
from .graph import Edge, GraphStore

CHECKLIST = (
    "The triple is stated in the cited guideline excerpt, not inferred beyond it.",
    "Subject and object types match the ontology definitions.",
    "Attribute values (ranges, thresholds) are copied exactly, with units.",
    "The relation direction is clinically sensible for this indicator.",
)


@dataclass
class ReviewItem:
    item_id: str
    edge_id: str
    context: dict  # rendered triple + source excerpt, for the reviewer UI
    status: str = "pending"  # pending | accepted | rejected | edited
    version: int = 1


@dataclass(frozen=True)
class ReviewDecision:
    decision_id: str
    item_id: str
    action: str  # accept | reject | edit
    reviewer_id: str
    note: str = ""
    edited_triple: dict | None = None
    decided_at: float = field(default_factory=time.time, compare=False)


@dataclass(frozen=True)
class ReviewStats:
    reviewed: int
    accepted: int
    precision: Fraction | None

    def percent_display(self) -> str:
        if self.precision is None:
            return "n/a"
        # half-up rounding in exact integer arithmetic
        pct = (self.precision.numerator * 100 * 2 + self.precision.denominator) // (
            2 * self.precision.denominator
        )
        return f"{pct}%"


@dataclass(frozen=True)
class FeedbackAction:
    action_id: str
    kind: str  # prompt_revision | rule_adjustment
    target_template_id: str
    new_body: str | None = None
    rule_patch: str | None = None
    justification: str = ""


def compute_stats(decisions: list[ReviewDecision]) -> ReviewStats:
    """Precision over distinct decided items: accepted / reviewed, exact.

    Edited items count as non-accepted (a correction implies the original
    extraction was wrong).
    """
    decided: dict[str, str] = {}
    for d in decisions:
        decided.setdefault(d.item_id, d.action)
    reviewed = len(decided)
    accepted = sum(1 for action in decided.values() if action == "accept")
    precision = Fraction(accepted, reviewed) if reviewed else None
    return ReviewStats(reviewed, accepted, precision)


class ReviewQueue:
    """Queue of candidate edges awaiting expert decisions, backed by a graph store."""

    def __init__(self, graph: GraphStore, log_path: str | Path | None = None):
        self.graph = graph
        self._items: dict[str, ReviewItem] = {}
        self._by_edge: dict[str, str] = {}
        self._decisions: list[ReviewDecision] = []
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        self.on_edit = None  # callable(edited_triple dict, decision) -> new edge ids

    # --- queue -------------------------------------------------------------

    def enqueue_batch(self, edges: list[Edge]) -> list[ReviewItem]:
        """One pending item per candidate edge; re-enqueueing is a no-op."""
        created: list[ReviewItem] = []
        with self._lock:
            for edge in edges:
                current = self.graph.get_edge(edge.edge_id)
                if current is None or current.status != "candidate":
                    raise StateError(f"edge {edge.edge_id} is not a candidate (status={getattr(current, 'status', 'missing')})")
                if edge.edge_id in self._by_edge:
                    continue
                item = ReviewItem(
                    item_id=f"ri-{edge.edge_id}",
                    edge_id=edge.edge_id,
                    context=self._context_for(current),
                )
                self._items[item.item_id] = item
                self._by_edge[edge.edge_id] = item.item_id
                created.append(item)
        return created

    def _context_for(self, edge: Edge) -> dict:
        subject = self.graph.get_node(edge.subject)
        obj = self.graph.get_node(edge.object)
        return {
            "triple": {
                "subject": subject.label if subject else edge.subject,
                "subject_type": subject.entity_type if subject else "",
                "relation": edge.relation,
                "object": obj.label if obj else edge.object,
                "object_type": obj.entity_type if obj else "",
            },
            "rendered": f"{subject.label if subject else edge.subject} "
            f"—{edge.relation}→ {obj.label if obj else edge.object}",
            "provenance": [p.to_json() for p in edge.provenance],
            "checklist": list(CHECKLIST),
        }

    def items(self, status: str | None = None) -> list[ReviewItem]:
        out = sorted(self._items.values(), key=lambda i: i.item_id)
        if status is not None:
            out = [i for i in out if i.status == status]
        return out

    def next_pending(self) -> ReviewItem | None:
        pending = self.items("pending")
        return pending[0] if pending else None

    def get_item(self, item_id: str) -> ReviewItem:
        item = self._items.get(item_id)
        if item is None:
            raise NotFoundError(f"unknown review item {item_id!r}")
        return item

    # --- decisions ----------------------------------------------------------

    def submit_decision(
        self,
        item_id: str,
        action: str,
        expected_version: int,
        reviewer_id: str,
        note: str = "",
        edited_triple: dict | None = None,
    ) -> ReviewItem:
        """Apply one decision under optimistic concurrency.

        accept -> edge asserted (decision id stamped into provenance);
        reject -> edge retracted; edit -> original retracted and the edited
        triple re-enters alignment+fusion via the on_edit hook.
        """
        if action not in ("accept", "reject", "edit"):
            raise StateError(f"unknown action {action!r}")
        if action == "edit" and not edited_triple:
            raise StateError("edit decisions need edited_triple")
        with self._lock:
            item = self.get_item(item_id)
            if item.status != "pending":
                raise StateError(f"item {item_id} already {item.status}")
            if item.version != expected_version:
                raise ReviewConflictError(
                    f"version mismatch on {item_id}: expected {expected_version}, current {item.version}"
                )
            decision = ReviewDecision(
                decision_id=f"dec-{len(self._decisions) + 1:06d}",
                item_id=item_id,
                action=action,
                reviewer_id=reviewer_id,
                note=note,
                edited_triple=edited_triple,
            )
            self._decisions.append(decision)
            self._append_log(decision)
            if action == "accept":
                self.graph.set_edge_status(item.edge_id, "asserted", review_decision_id=decision.decision_id)
                item.status = "accepted"
            elif action == "reject":
                self.graph.set_edge_status(item.edge_id, "retracted", review_decision_id=decision.decision_id)
                item.status = "rejected"
            else:
                self.graph.set_edge_status(item.edge_id, "retracted", review_decision_id=decision.decision_id)
                item.status = "edited"
                if self.on_edit is not None:
                    self.on_edit(edited_triple, decision)
            item.version += 1
            return item

    def decisions(self) -> list[ReviewDecision]:
        return list(self._decisions)

    def stats(self) -> ReviewStats:
        return compute_stats(self._decisions)

    def pending_count(self) -> int:
        return len(self.items("pending"))

    def _append_log(self, decision: ReviewDecision) -> None:
        if self._log_path is None:
            return
        record = {
            "decision_id": decision.decision_id,
            "item_id": decision.item_id,
            "action": decision.action,
            "reviewer_id": decision.reviewer_id,
            "note": decision.note,
            "edited_triple": decision.edited_triple,
            "decided_at": decision.decided_at,
        }
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    @staticmethod
    def load_decisions(path: str | Path) -> list[ReviewDecision]:
        decisions = []
        p = Path(path)
        if not p.exists():
            return decisions
        for line in p.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            raw = json.loads(line)
            decisions.append(
                ReviewDecision(
                    decision_id=raw["decision_id"],
                    item_id=raw["item_id"],
                    action=raw["action"],
                    reviewer_id=raw.get("reviewer_id", ""),
                    note=raw.get("note", ""),
                    edited_triple=raw.get("edited_triple"),
                    decided_at=raw.get("decided_at", 0.0),
                )
            )
        return decisions


class TemplateRegistry:
    """Versioned prompt templates; every revision is a new immutable version."""

    def __init__(self, templates: list[PromptTemplate]):
        self._versions: dict[str, list[PromptTemplate]] = {}
        for t in templates:
            self._versions.setdefault(t.template_id, []).append(t)
        for versions in self._versions.values():
            versions.sort(key=lambda t: t.version)

    @classmethod
    def from_file(cls, path: str | Path) -> "TemplateRegistry":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            [
                PromptTemplate(
                    t["template_id"], t["version"], t["body"], t.get("created_from")
                )
                for t in raw["templates"]
            ]
        )

    def latest(self, template_id: str) -> PromptTemplate:
        versions = self._versions.get(template_id)
        if not versions:
            raise NotFoundError(f"unknown template {template_id!r}")
        return versions[-1]

    def get(self, template_id: str, version: int) -> PromptTemplate:
        for t in self._versions.get(template_id, ()):  # old versions stay replayable
            if t.version == version:
                return t
        raise NotFoundError(f"template {template_id!r} has no version {version}")

    def versions(self, template_id: str) -> list[PromptTemplate]:
        if template_id not in self._versions:
            raise NotFoundError(f"unknown template {template_id!r}")
        return list(self._versions[template_id])

    def record_feedback(self, action: FeedbackAction) -> PromptTemplate:
        """Apply a feedback action: new template version, prior versions retained."""
        if action.kind not in ("prompt_revision", "rule_adjustment"):
            raise StateError(f"unknown feedback kind {action.kind!r}")
        prior = self.latest(action.target_template_id)
        body = action.new_body if action.new_body else prior.body
        revised = PromptTemplate(
            template_id=prior.template_id,
            version=prior.version + 1,
            body=body,
            created_from=action.action_id,
        )
        self._versions[prior.template_id].append(revised)
        return revised

    def to_json(self) -> dict:
        return {
            "templates": [
                {
                    "template_id": t.template_id,
                    "version": t.version,
                    "body": t.body,
                    **({"created_from": t.created_from} if t.created_from else {}),
                }
                for versions in self._versions.values()
                for t in versions
            ]
        }
