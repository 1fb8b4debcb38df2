from fractions import Fraction

import pytest

from zmkit.errors import EmptyDataError, ScopeError
from zmkit.ingest import Instrument, NoteEvent, Pitch, UnitKind, build_units, read_events_csv
from zmkit.rankfreq import (
    CorpusScope,
    RankFrequencyTable,
    compare_tables,
    count_units,
    merge_scope,
    product_table,
    read_table_csv,
    top_units_report,
    table_to_csv,
    top_k,
)


def ev(pitch, dur, inst="piri", piece="p1"):
    return NoteEvent(Pitch.parse(pitch), Fraction(dur), Instrument(inst), piece)


def test_count_basic():
    t = count_units(["a", "a", "b"])
    assert [(r.rank, r.unit, r.count, r.rel_freq) for r in t] == [(1, "a", 2, Fraction(2, 3)), (2, "b", 1, Fraction(1, 3))]
    assert (t.N, t.L) == (2, 3)


def test_singleton():
    t = count_units(["a"])
    assert t[0].rel_freq == 1


def test_empty():
    with pytest.raises(EmptyDataError):
        count_units([])


def test_ties_ordered_by_string():
    t = count_units(["b", "c", "a", "b", "c", "a"])
    assert [r.unit for r in t] == ["a", "b", "c"]


def test_top_k_rounding():
    t = count_units(["a", "a", "b"])
    (row,) = top_k(t, 1)
    assert (row.rank, row.unit, row.count, row.percent) == (1, "a", 2, 66.7)
    assert len(top_k(t, 10)) == 2
    with pytest.raises(ValueError):
        top_k(t, 0)


def test_top_k_reference_ratio():
    weights = {"Eb4": 10177, **{f"u{i}": 10000 for i in range(5)}, "u5": 65817 - 10177 - 50000}
    assert top_k(RankFrequencyTable.from_weights(weights), 1)[0].percent == 15.5


def test_top_k_half_up():
    # 1/8 = 12.5% exactly, so one decimal is 12.5; 1/16 = 6.25% rounds half-up to 6.3
    t = RankFrequencyTable.from_weights({"a": 1, "b": 15})
    assert top_k(t, 2)[1].percent == 6.3


EVENTS = [ev("Eb4", "3/2"), ev("F4", 1), ev("Eb4", "3/2", "daegeum", "p2"), ev("Bb4", "1/3", "daegeum", "p2")]


def test_scope_parse():
    assert CorpusScope.parse("global").level.value == "global_union"
    assert CorpusScope.parse("instrument:piri").selector == "piri"
    with pytest.raises(ScopeError):
        CorpusScope.parse("instrument")
    with pytest.raises(ScopeError):
        CorpusScope("instrument")


def test_merge_scope_global_additive():
    g = merge_scope(EVENTS, CorpusScope(), "pair")
    p1 = merge_scope(EVENTS, CorpusScope.parse("piece:p1"), "pair")
    p2 = merge_scope(EVENTS, CorpusScope.parse("piece:p2"), "pair")
    assert g.L == p1.L + p2.L
    by_unit = {str(r.unit): r.count for r in g}
    for unit, count in by_unit.items():
        parts = sum(r.count for t in (p1, p2) for r in t if str(r.unit) == unit)
        assert parts == count


def test_merge_scope_instrument_filter():
    t = merge_scope(EVENTS, CorpusScope.parse("instrument:piri"), "pitch")
    assert t == count_units(build_units([e for e in EVENTS if e.instrument is Instrument.PIRI], "pitch"))


def test_merge_scope_errors():
    with pytest.raises(ScopeError):
        merge_scope(EVENTS, CorpusScope.parse("instrument:kazoo"), "pair")
    with pytest.raises(ScopeError):
        merge_scope(EVENTS, CorpusScope.parse("piece:nope"), "pair")


def test_product_table_example():
    a = RankFrequencyTable.from_weights({"x": 1, "y": 1})
    b = RankFrequencyTable.from_weights({"u": 2, "v": 1, "w": 1})
    t = product_table(a, b)
    assert [r.rel_freq for r in t] == [Fraction(1, 4)] * 2 + [Fraction(1, 8)] * 4
    assert sum(r.rel_freq for r in t) == 1
    assert t.L == a.L * b.L


def test_product_singleton_and_square():
    one = RankFrequencyTable.from_weights({"x": 5})
    assert [r.rel_freq for r in product_table(one, one)] == [1]
    p = RankFrequencyTable.from_weights({"x": 2, "y": 1})
    assert [r.rel_freq for r in product_table(p, p)] == [Fraction(4, 9), Fraction(2, 9), Fraction(2, 9), Fraction(1, 9)]


def test_product_without_counts():
    a = RankFrequencyTable.from_weights({"x": 0.5, "y": 0.5})
    t = product_table(a, a)
    assert t[0].count is None
    assert sum(float(r.rel_freq) for r in t) == pytest.approx(1.0, abs=1e-12)


def test_product_of_marginals_gives_pair_units():
    pitch = count_units(build_units(EVENTS, UnitKind.PITCH))
    dur = count_units(build_units(EVENTS, UnitKind.DURATION))
    t = product_table(pitch, dur)
    assert "Eb4|3/2" in {str(r.unit) for r in t}
    assert t.N == pitch.N * dur.N


def test_compare_identical_is_one():
    t = count_units(["a"] * 5 + ["b"] * 3 + ["c"])
    assert compare_tables(t, t) == 1.0


def test_csv_round_trip():
    t = count_units(build_units(EVENTS, "pair"))
    back = read_table_csv(table_to_csv(t))
    assert [(str(r.unit), r.count) for r in back] == [(str(r.unit), r.count) for r in t]
    assert table_to_csv(back) == table_to_csv(t)


def test_golden_unit_table(fixtures):
    events = read_events_csv((fixtures / "corpus.events.csv").read_text(encoding="utf-8"))
    t = merge_scope(events, CorpusScope(), "pair")
    assert table_to_csv(t) == (fixtures / "corpus.units.csv").read_text(encoding="utf-8")


def test_top_units_report_shape():
    rep = top_units_report(EVENTS, 2)
    assert rep["L"] == 4
    assert set(rep["panels"]) == {"pitch", "duration", "pair"}
    assert rep["panels"]["pitch"][0] == {"rank": 1, "unit": "Eb4", "count": 2, "ratio": 50.0}
