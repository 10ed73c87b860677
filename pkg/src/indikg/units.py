"""Unit table: dimension lookup and exact decimal conversion factors."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path

from .errors import ConfigError, UnitError

# U+03BC (Greek mu) and the deprecated 'u' spelling both normalize to U+00B5.
_MU_VARIANTS = {"μ": "µ"}


def normalize_unit_symbol(unit: str) -> str:
    u = unit.strip()
    for variant, canonical in _MU_VARIANTS.items():
        u = u.replace(variant, canonical)
    return " ".join(u.split())


@dataclass(frozen=True)
class UnitDef:
    symbol: str
    dimension: str
    factor_to_base: Decimal


class UnitTable:
    """Registry of units, grouped by dimension, with factors to a base unit.

    Conversion factors are powers of ten, so Decimal division is exact and
    boundary classification stays deterministic.
    """

    def __init__(self, units: list[UnitDef]):
        self._units: dict[str, UnitDef] = {}
        self._base: dict[str, str] = {}
        for u in units:
            self._units[u.symbol] = u
            if u.factor_to_base == 1 and u.dimension not in self._base:
                self._base[u.dimension] = u.symbol

    @classmethod
    def from_file(cls, path: str | Path) -> "UnitTable":
        units = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ConfigError(f"unit table {path}:{lineno}: expected 3 tab-separated fields")
            symbol, dimension, factor = parts
            units.append(UnitDef(normalize_unit_symbol(symbol), dimension.strip(), Decimal(factor.strip())))
        return cls(units)

    def knows(self, unit: str) -> bool:
        return normalize_unit_symbol(unit) in self._units

    def dimension(self, unit: str) -> str | None:
        u = self._units.get(normalize_unit_symbol(unit))
        return u.dimension if u else None

    def compatible(self, a: str, b: str) -> bool:
        da, db = self.dimension(a), self.dimension(b)
        return da is not None and da == db

    def base_symbol(self, dimension: str) -> str:
        return self._base.get(dimension, "")

    def convert(self, value: Decimal, from_unit: str, to_unit: str) -> Decimal:
        """Convert ``value`` between two units of the same dimension, exactly."""
        fu, tu = normalize_unit_symbol(from_unit), normalize_unit_symbol(to_unit)
        if fu == tu:
            return value
        src, dst = self._units.get(fu), self._units.get(tu)
        if src is None or dst is None:
            unknown = fu if src is None else tu
            raise UnitError(f"unknown unit {unknown!r}")
        if src.dimension != dst.dimension:
            raise UnitError(f"cannot convert {fu!r} ({src.dimension}) to {tu!r} ({dst.dimension})")
        return value * src.factor_to_base / dst.factor_to_base


def default_unit_table() -> UnitTable:
    with resources.as_file(resources.files("indikg.data").joinpath("units.tsv")) as p:
        return UnitTable.from_file(p)
