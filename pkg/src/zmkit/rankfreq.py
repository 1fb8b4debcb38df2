"""Rank-frequency tables over Zipfian units."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import EmptyDataError, MappingError, ScopeError
from .ingest import Instrument, NoteEvent, UnitKind, ZipfianUnit, build_units


@dataclass(frozen=True)
class Row:
    rank: int
    unit: Hashable
    count: int | None
    rel_freq: Fraction | float


@dataclass(frozen=True)
class RankFrequencyTable:
    rows: tuple[Row, ...]
    L: int | None

    @property
    def N(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    @property
    def ranks(self) -> np.ndarray:
        return np.arange(1, self.N + 1, dtype=float)

    def counts(self) -> np.ndarray:
        if any(r.count is None for r in self.rows):
            raise ValueError("table carries no integer counts")
        return np.array([r.count for r in self.rows], dtype=float)

    def frequencies(self) -> np.ndarray:
        """Relative frequencies as floats, in rank order."""
        return np.array([float(r.rel_freq) for r in self.rows])

    def values(self, mode: str) -> np.ndarray:
        """Counts for a raw fit, relative frequencies for a normalized fit."""
        return self.counts() if mode == "raw" else self.frequencies()

    @classmethod
    def from_weights(cls, weights: dict[Hashable, int | Fraction | float], L: int | None = None) -> "RankFrequencyTable":
        """Rank units by weight; integer weights are counts, anything else a probability."""
        if not weights:
            raise EmptyDataError("no units to rank")
        items = sorted(weights.items(), key=lambda kv: (-kv[1], str(kv[0])))
        integral = all(isinstance(w, int) for _, w in items)
        if integral:
            total = sum(w for _, w in items)
            return cls(tuple(Row(i + 1, u, w, Fraction(w, total)) for i, (u, w) in enumerate(items)), total)
        return cls(tuple(Row(i + 1, u, None, w) for i, (u, w) in enumerate(items)), L)


def count_units(units: Iterable[Hashable]) -> RankFrequencyTable:
    """Count units and rank them by descending count.

    Ties are ordered by the unit's string form so tables are reproducible.
    """
    counts = Counter(units)
    if not counts:
        raise EmptyDataError("cannot build a rank-frequency table from no units")
    return RankFrequencyTable.from_weights(dict(counts))


@dataclass(frozen=True)
class TopRow:
    rank: int
    unit: Hashable
    count: int | None
    percent: float


def _percent(rel: Fraction | float) -> float:
    # exact half-up rounding; float round() would use banker's rounding on a binary value
    d = Decimal(rel.numerator) / Decimal(rel.denominator) if isinstance(rel, Fraction) else Decimal(repr(rel))
    return float((d * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def top_k(table: RankFrequencyTable, k: int) -> list[TopRow]:
    if k < 1:
        raise ValueError("k must be at least 1")
    return [TopRow(r.rank, r.unit, r.count, _percent(r.rel_freq)) for r in table.rows[:k]]


class ScopeLevel(str, Enum):
    GLOBAL_UNION = "global_union"
    INSTRUMENT = "instrument"
    PIECE = "piece"


@dataclass(frozen=True)
class CorpusScope:
    level: ScopeLevel = ScopeLevel.GLOBAL_UNION
    selector: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "level", ScopeLevel(self.level))
        if (self.selector is None) != (self.level is ScopeLevel.GLOBAL_UNION):
            raise ScopeError("selector is required for instrument/piece scopes and forbidden for the global union")

    @classmethod
    def parse(cls, text: str) -> "CorpusScope":
        """Parse ``global``, ``instrument:piri`` or ``piece:<id>``."""
        if text in ("global", "global_union"):
            return cls()
        level, sep, sel = text.partition(":")
        if not sep or not sel:
            raise ScopeError(f"cannot parse scope {text!r}")
        return cls(ScopeLevel(level), sel)

    def matches(self, ev: NoteEvent) -> bool:
        if self.level is ScopeLevel.GLOBAL_UNION:
            return True
        if self.level is ScopeLevel.INSTRUMENT:
            return ev.instrument.value == self.selector
        return ev.piece_id == self.selector


def merge_scope(events: Sequence[NoteEvent], scope: CorpusScope, kind: UnitKind | str = UnitKind.PAIR) -> RankFrequencyTable:
    """Rank-frequency table over the events selected by ``scope``."""
    if scope.level is ScopeLevel.INSTRUMENT:
        try:
            Instrument(scope.selector)
        except ValueError:
            raise ScopeError(f"unknown instrument {scope.selector!r}") from None
    selected = [ev for ev in events if scope.matches(ev)]
    if not selected:
        raise ScopeError(f"no events match scope {scope.level.value}:{scope.selector}")
    return count_units(build_units(selected, kind))


def _pair(a: Hashable, b: Hashable) -> Hashable:
    if isinstance(a, ZipfianUnit) and isinstance(b, ZipfianUnit):
        if a.duration is None and b.pitch is None:
            return ZipfianUnit(a.pitch, b.duration)
        if a.pitch is None and b.duration is None:
            return ZipfianUnit(b.pitch, a.duration)
    return ProductUnit(a, b)


@dataclass(frozen=True)
class ProductUnit:
    first: Hashable
    second: Hashable

    def __str__(self) -> str:
        return f"{self.first}|{self.second}"


def product_table(marginal_a: RankFrequencyTable, marginal_b: RankFrequencyTable) -> RankFrequencyTable:
    """Joint table of two independent marginals: every pair gets p_i * q_j.

    A pitch-only marginal times a duration-only marginal yields ordinary
    (pitch, duration) units, so the result lines up with an observed pair
    table.  Counts are the products of marginal counts (total L_a * L_b) when
    both marginals carry them.
    """
    if not marginal_a.rows or not marginal_b.rows:
        raise EmptyDataError("product of an empty table")
    with_counts = marginal_a.L is not None and marginal_b.L is not None and all(
        r.count is not None for r in (*marginal_a.rows, *marginal_b.rows)
    )
    weights: dict[Hashable, object] = {}
    for ra in marginal_a.rows:
        for rb in marginal_b.rows:
            unit = _pair(ra.unit, rb.unit)
            weights[unit] = (ra.count * rb.count, ra.rel_freq * rb.rel_freq) if with_counts else ra.rel_freq * rb.rel_freq
    if with_counts:
        L = marginal_a.L * marginal_b.L
        items = sorted(weights.items(), key=lambda kv: (-kv[1][0], str(kv[0])))
        return RankFrequencyTable(tuple(Row(i + 1, u, c, p) for i, (u, (c, p)) in enumerate(items)), L)
    return RankFrequencyTable.from_weights(weights)


def compare_tables(observed: RankFrequencyTable, model: RankFrequencyTable) -> float:
    """Log-space R² of an observed rank-frequency curve against a model curve, rank by rank.

    Only the ranks both tables share are compared.
    """
    from .zmfit import r2_from_values

    n = min(observed.N, model.N)
    return r2_from_values(observed.frequencies()[:n], model.frequencies()[:n])


# ---------------------------------------------------------------------------
# serialization

TABLE_HEADER = ["rank", "unit", "count", "rel_freq"]


def format_float(x: float) -> str:
    return repr(float(x))


def write_table_csv(table: RankFrequencyTable, fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in table.rows:
        w.writerow([r.rank, str(r.unit), "" if r.count is None else r.count, format_float(r.rel_freq)])


def table_to_csv(table: RankFrequencyTable) -> str:
    buf = io.StringIO()
    write_table_csv(table, buf)
    return buf.getvalue()


def _parse_unit(text: str) -> Hashable:
    try:
        return ZipfianUnit.parse(text)
    except (ValueError, ZeroDivisionError, MappingError):
        # labels that are not pitch/duration units (e.g. product units) stay as text
        return text


def read_table_csv(fh: io.TextIOBase | str) -> RankFrequencyTable:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.DictReader(fh)
    if reader.fieldnames != TABLE_HEADER:
        raise ValueError(f"table CSV header must be {','.join(TABLE_HEADER)}")
    raw = list(reader)
    if not raw:
        raise EmptyDataError("table CSV has no rows")
    if all(row["count"] for row in raw):
        counts = {_parse_unit(row["unit"]): int(row["count"]) for row in raw}
        table = RankFrequencyTable.from_weights(counts)
    else:
        table = RankFrequencyTable.from_weights({_parse_unit(row["unit"]): float(row["rel_freq"]) for row in raw})
    return table


def top_units_report(events: Sequence[NoteEvent], k: int = 10) -> dict:
    """Top-k units of every kind side by side, with counts and percentages."""
    panels = {}
    L = len(events)
    for kind in UnitKind:
        table = count_units(build_units(events, kind))
        panels[kind.value] = [
            {"rank": t.rank, "unit": str(t.unit), "count": t.count, "ratio": t.percent} for t in top_k(table, k)
        ]
    return {"L": L, "panels": panels}
