"""Reference-range expressions: parse, render, and classify observed values.

Grammar (EBNF) is documented in docs/range_grammar.md. Numbers are exact
decimals throughout; "<"/">" are strict (a value equal to the limit falls
outside the normal zone).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Union

from .errors import ClassificationError, ParseError, UnitError
from .units import UnitTable, default_unit_table, normalize_unit_symbol


class Verdict(Enum):
    BELOW = "Below"
    WITHIN = "Within"
    ABOVE = "Above"
    MATCH = "Match"
    MISMATCH = "Mismatch"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class Quantity:
    value: Decimal
    unit: str
    normalized: bool = True  # False: unit kept verbatim, absent from the unit table

    def __str__(self) -> str:
        return f"{self.value} {self.unit}" if self.unit else str(self.value)


@dataclass(frozen=True)
class ClosedInterval:
    lo: Quantity
    hi: Quantity

    def __post_init__(self):
        if self.lo.unit != self.hi.unit:
            raise ValueError("interval endpoints must share a unit")
        if self.lo.value > self.hi.value:
            raise ValueError("interval lower bound exceeds upper bound")


@dataclass(frozen=True)
class LessThan:
    limit: Quantity


@dataclass(frozen=True)
class GreaterThan:
    limit: Quantity


@dataclass(frozen=True)
class Qualitative:
    expected: str

    def __post_init__(self):
        if not self.expected:
            raise ValueError("qualitative bound needs a non-empty expected value")


@dataclass(frozen=True)
class Compound:
    components: tuple[tuple[str, "Bound"], ...]  # ordered (label, bound)


Bound = Union[ClosedInterval, LessThan, GreaterThan, Qualitative, Compound]


@dataclass(frozen=True)
class Qualifier:
    """Stratum qualifier: none, sex, age group, free-text condition, or period."""

    kind: str  # "none" | "sex" | "age" | "condition" | "period"
    value: str = ""

    NONE_KIND = "none"

    @classmethod
    def none(cls) -> "Qualifier":
        return cls("none")

    @classmethod
    def sex(cls, value: str) -> "Qualifier":
        if value not in ("male", "female"):
            raise ValueError("sex qualifier must be male or female")
        return cls("sex", value)

    @classmethod
    def age(cls, value: str) -> "Qualifier":
        if value not in ("children", "adult", "postmenopausal"):
            raise ValueError("age qualifier must be children, adult, or postmenopausal")
        return cls("age", value)

    @classmethod
    def condition(cls, text: str) -> "Qualifier":
        if not text:
            raise ValueError("condition qualifier needs text")
        return cls("condition", text)

    @classmethod
    def period(cls, magnitude: Decimal | int | str, unit: str = "h") -> "Qualifier":
        mag = Decimal(str(magnitude))
        if mag <= 0:
            raise ValueError("period qualifier needs a positive duration")
        return cls("period", f"{mag} {unit}")


@dataclass(frozen=True)
class Stratum:
    qualifier: Qualifier
    bound: Bound


@dataclass(frozen=True)
class ReferenceRange:
    strata: tuple[Stratum, ...]
    raw_text: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.strata:
            raise ValueError("reference range needs at least one stratum")
        quals = [s.qualifier for s in self.strata]
        if len(set(quals)) != len(quals):
            raise ValueError("stratum qualifiers must be pairwise distinct")

    def single(self) -> Stratum:
        if len(self.strata) != 1:
            raise ValueError("range has multiple strata")
        return self.strata[0]


# Keyword table for qualifier clauses as they appear in guideline text.
# Ordered longest-first so "Male or non-pregnant female" wins over "Male".
DEFAULT_QUALIFIER_KEYWORDS: tuple[tuple[str, Qualifier], ...] = (
    ("Male or non-pregnant female", Qualifier.condition("Male or non-pregnant female")),
    ("Postmenopausal women", Qualifier.age("postmenopausal")),
    ("Children", Qualifier.age("children")),
    ("Adults", Qualifier.age("adult")),
    ("Female", Qualifier.sex("female")),
    ("Male", Qualifier.sex("male")),
)

_NUM = r"\d+(?:\.\d+)?"
_COMPARATOR_RE = re.compile(rf"^(?P<op>[<>])\s*(?P<a>{_NUM})(?:\s*/\s*(?P<b>{_NUM}))?(?:\s*(?P<unit>[^\s<>].*))?$")
_INTERVAL_RE = re.compile(rf"^(?P<lo>{_NUM})\s*(?:--|–|—|-)\s*(?P<hi>{_NUM})(?:\s*(?P<unit>[^\s<>].*))?$")
_QUALITATIVE_RE = re.compile(r"^[A-Za-z][A-Za-z '\-]*$")


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _qualifier_pattern(keywords: tuple[tuple[str, Qualifier], ...]) -> re.Pattern:
    alts = "|".join(re.escape(k) for k, _ in keywords)
    return re.compile(rf"(?:(?P<kw>{alts})|(?P<mag>{_NUM})\s*(?P<punit>h|hr|hrs|hour|hours))\s*:", re.IGNORECASE)


def _make_quantity(num: str, unit: str, table: UnitTable) -> Quantity:
    u = normalize_unit_symbol(unit)
    return Quantity(Decimal(num), u, normalized=table.knows(u))


def _parse_bound(clause: str, offset: int, text: str, table: UnitTable) -> Bound:
    stripped = clause.strip()
    if not stripped:
        raise ParseError("empty bound clause", _byte_offset(text, offset), ("bound",))
    inner = offset + clause.index(stripped[0])

    m = _COMPARATOR_RE.match(stripped)
    if m:
        if not m.group("unit"):
            raise ParseError(
                "comparator bound is missing its unit",
                _byte_offset(text, inner + len(stripped)),
                ("unit",),
            )
        op = LessThan if m.group("op") == "<" else GreaterThan
        unit = m.group("unit").strip()
        if m.group("b") is not None:
            # systolic/diastolic shorthand, e.g. "<120/80 mmHg"
            return Compound(
                (
                    ("systolic", op(_make_quantity(m.group("a"), unit, table))),
                    ("diastolic", op(_make_quantity(m.group("b"), unit, table))),
                )
            )
        return op(_make_quantity(m.group("a"), unit, table))

    m = _INTERVAL_RE.match(stripped)
    if m:
        if not m.group("unit"):
            raise ParseError(
                "interval bound is missing its unit",
                _byte_offset(text, inner + len(stripped)),
                ("unit",),
            )
        unit = m.group("unit").strip()
        lo = _make_quantity(m.group("lo"), unit, table)
        hi = _make_quantity(m.group("hi"), unit, table)
        if lo.value > hi.value:
            raise ParseError(
                f"interval lower bound {lo.value} exceeds upper bound {hi.value}",
                _byte_offset(text, inner),
                ("ordered interval",),
            )
        return ClosedInterval(lo, hi)

    if _QUALITATIVE_RE.match(stripped):
        return Qualitative(" ".join(stripped.split()))

    raise ParseError(
        f"unparseable bound clause {stripped!r}",
        _byte_offset(text, inner),
        ("comparator", "interval", "qualitative"),
    )


def _match_qualifier(m: re.Match, keywords: tuple[tuple[str, Qualifier], ...]) -> Qualifier:
    if m.group("kw") is not None:
        surface = m.group("kw")
        for keyword, qualifier in keywords:
            if keyword.casefold() == surface.casefold():
                return qualifier
        raise AssertionError(f"keyword {surface!r} matched but not in table")
    return Qualifier.period(Decimal(m.group("mag")), "h")


def parse_reference_range(
    text: str,
    *,
    unit_table: UnitTable | None = None,
    keywords: tuple[tuple[str, Qualifier], ...] = DEFAULT_QUALIFIER_KEYWORDS,
) -> ReferenceRange:
    """Parse a reference-range expression into stratified, unit-bearing bounds.

    Accepts "–", "-", and "--" as range separators; "<" and ">" map to
    strict one-sided bounds. Raises ParseError with a byte offset and the
    expected-token set on failure.
    """
    table = unit_table or _default_table()
    if not text or not text.strip():
        raise ParseError("empty reference-range expression", 0, ("stratum",))

    qual_re = (
        _qualifier_pattern(keywords) if keywords is not DEFAULT_QUALIFIER_KEYWORDS else _DEFAULT_QUAL_RE
    )
    matches = [m for m in qual_re.finditer(text) if _at_clause_start(text, m.start())]

    strata: list[Stratum] = []
    if not matches or matches[0].start() > _first_nonspace(text):
        if matches:
            raise ParseError(
                "text before the first qualifier clause",
                _byte_offset(text, _first_nonspace(text)),
                ("qualifier",),
            )
        bound = _parse_bound(text, 0, text, table)
        strata.append(Stratum(Qualifier.none(), bound))
    else:
        for i, m in enumerate(matches):
            end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
            clause = text[m.end() : end]
            qualifier = _match_qualifier(m, keywords)
            bound = _parse_bound(clause, m.end(), text, table)
            strata.append(Stratum(qualifier, bound))

    rng = ReferenceRange(tuple(strata), raw_text=text)
    return rng


def _first_nonspace(text: str) -> int:
    for i, ch in enumerate(text):
        if not ch.isspace():
            return i
    return 0


def _at_clause_start(text: str, pos: int) -> bool:
    return pos == 0 or text[pos - 1].isspace()


def _render_quantity(q: Quantity) -> str:
    return str(q.value)


def _render_bound(bound: Bound) -> str:
    if isinstance(bound, ClosedInterval):
        return f"{bound.lo.value}–{bound.hi.value} {bound.lo.unit}"
    if isinstance(bound, LessThan):
        return f"<{bound.limit.value} {bound.limit.unit}"
    if isinstance(bound, GreaterThan):
        return f">{bound.limit.value} {bound.limit.unit}"
    if isinstance(bound, Qualitative):
        return bound.expected
    if isinstance(bound, Compound):
        comps = bound.components
        if (
            len(comps) == 2
            and comps[0][0] == "systolic"
            and comps[1][0] == "diastolic"
            and type(comps[0][1]) is type(comps[1][1])
            and isinstance(comps[0][1], (LessThan, GreaterThan))
            and comps[0][1].limit.unit == comps[1][1].limit.unit
        ):
            op = "<" if isinstance(comps[0][1], LessThan) else ">"
            return f"{op}{comps[0][1].limit.value}/{comps[1][1].limit.value} {comps[0][1].limit.unit}"
        return "; ".join(f"{label}: {_render_bound(b)}" for label, b in comps)
    raise TypeError(f"unknown bound {bound!r}")


_QUALIFIER_SURFACES = {
    ("sex", "male"): "Male",
    ("sex", "female"): "Female",
    ("age", "children"): "Children",
    ("age", "adult"): "Adults",
    ("age", "postmenopausal"): "Postmenopausal women",
}


def _render_qualifier(q: Qualifier) -> str:
    if q.kind == "none":
        return ""
    if q.kind in ("sex", "age"):
        return _QUALIFIER_SURFACES[(q.kind, q.value)]
    return q.value  # condition text or period like "24 h"


def render(rng: ReferenceRange) -> str:
    """Canonical text form; parse(render(r)) == r for every parser-producible r."""
    parts = []
    for stratum in rng.strata:
        prefix = _render_qualifier(stratum.qualifier)
        body = _render_bound(stratum.bound)
        parts.append(f"{prefix}: {body}" if prefix else body)
    return " ".join(parts)


def _convert_observed(observed: Quantity, target: Quantity, table: UnitTable) -> Decimal:
    if observed.unit == target.unit:
        return observed.value
    if not target.normalized or not observed.normalized:
        raise UnitError(
            f"cannot convert {observed.unit!r} to verbatim unit {target.unit!r}"
        )
    return table.convert(observed.value, observed.unit, target.unit)


def _classify_numeric(bound: Bound, observed: Quantity, table: UnitTable) -> Verdict:
    if isinstance(bound, ClosedInterval):
        v = _convert_observed(observed, bound.lo, table)
        if v < bound.lo.value:
            return Verdict.BELOW
        if v > bound.hi.value:
            return Verdict.ABOVE
        return Verdict.WITHIN
    if isinstance(bound, LessThan):
        v = _convert_observed(observed, bound.limit, table)
        return Verdict.WITHIN if v < bound.limit.value else Verdict.ABOVE
    if isinstance(bound, GreaterThan):
        v = _convert_observed(observed, bound.limit, table)
        return Verdict.WITHIN if v > bound.limit.value else Verdict.BELOW
    raise TypeError(f"not a numeric bound: {bound!r}")


_OBSERVED_QTY_RE = re.compile(rf"^(?P<num>{_NUM})\s*(?P<unit>\S.*)?$")
_OBSERVED_COMPOUND_RE = re.compile(rf"^(?P<a>{_NUM})\s*/\s*(?P<b>{_NUM})(?:\s*(?P<unit>\S.*))?$")


def _classify_bound(bound: Bound, observed, table: UnitTable) -> Verdict:
    if isinstance(bound, Qualitative):
        if isinstance(observed, Quantity):
            return Verdict.MISMATCH
        return Verdict.MATCH if str(observed).strip().casefold() == bound.expected.casefold() else Verdict.MISMATCH

    if isinstance(bound, Compound):
        if isinstance(observed, str):
            m = _OBSERVED_COMPOUND_RE.match(observed.strip())
            if not m or len(bound.components) != 2:
                raise UnitError(f"compound bound needs a 'a/b unit' observation, got {observed!r}")
            unit = (m.group("unit") or "").strip() or bound.components[0][1].limit.unit
            parts = [
                _make_quantity(m.group("a"), unit, table),
                _make_quantity(m.group("b"), unit, table),
            ]
        elif isinstance(observed, (tuple, list)) and len(observed) == len(bound.components):
            parts = list(observed)
        else:
            raise UnitError("compound bound needs one observation per component")
        verdicts = [_classify_bound(b, p, table) for (_, b), p in zip(bound.components, parts)]
        if all(v is Verdict.WITHIN for v in verdicts):
            return Verdict.WITHIN
        if any(v is Verdict.ABOVE for v in verdicts):
            return Verdict.ABOVE
        return Verdict.BELOW

    if isinstance(observed, str):
        m = _OBSERVED_QTY_RE.match(observed.strip())
        if not m:
            return Verdict.MISMATCH
        unit = (m.group("unit") or "").strip()
        observed = _make_quantity(m.group("num"), unit, table) if unit else Quantity(Decimal(m.group("num")), "")
    if not isinstance(observed, Quantity):
        raise UnitError(f"cannot classify observation {observed!r}")
    return _classify_numeric(bound, observed, table)


def classify(
    rng: ReferenceRange,
    observed,
    context: frozenset[Qualifier] | set[Qualifier] = frozenset(),
    *,
    unit_table: UnitTable | None = None,
) -> Verdict:
    """Compare an observed value (Quantity or qualitative string) to the range.

    The context picks the stratum; with no matching stratum the verdict is
    NOT_APPLICABLE. ClosedInterval endpoints count as Within; "<"/">" limits
    are strict, so a value equal to the limit is outside the normal zone.
    """
    table = unit_table or _default_table()
    candidates = [
        s for s in rng.strata if s.qualifier.kind == Qualifier.NONE_KIND or s.qualifier in context
    ]
    if not candidates:
        return Verdict.NOT_APPLICABLE
    if len(candidates) > 1:
        raise ClassificationError(
            f"context {sorted((q.kind, q.value) for q in context)} matches {len(candidates)} strata"
        )
    return _classify_bound(candidates[0].bound, observed, table)


_DEFAULT_TABLE: UnitTable | None = None
_DEFAULT_QUAL_RE = _qualifier_pattern(DEFAULT_QUALIFIER_KEYWORDS)


def _default_table() -> UnitTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = default_unit_table()
    return _DEFAULT_TABLE
