import csv
import io
import json

import numpy as np
import pytest

from zmkit.cli import main
from zmkit.rankfreq import RankFrequencyTable, table_to_csv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def zipf_table(tmp_path):
    weights = {f"u{i:02d}": int(round(1e5 * (i + 3) ** -1.3)) for i in range(1, 41)}
    path = tmp_path / "table.csv"
    path.write_text(table_to_csv(RankFrequencyTable.from_weights(weights)))
    return path


def test_ingest_golden(fixtures, tmp_path):
    out = tmp_path / "events.csv"
    assert run("ingest", "--in", fixtures / "scores", "--policy", fixtures / "policy.json", "--out", out) == 0
    assert out.read_bytes() == (fixtures / "corpus.events.csv").read_bytes()


def test_ingest_is_deterministic(fixtures, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("ingest", "--in", fixtures / "scores", "--out", a)
    run("ingest", "--in", fixtures / "scores", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_ingest_missing_input(tmp_path):
    assert run("ingest", "--in", tmp_path / "nope") == 1


def test_ingest_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.xml"
    bad.write_text("<score-partwise>\n<part>")
    assert run("ingest", "--in", bad) == 1
    assert "line" in capsys.readouterr().err


def test_rankfreq_golden(fixtures, tmp_path):
    out, rep = tmp_path / "units.csv", tmp_path / "top.json"
    assert run("rankfreq", "--events", fixtures / "corpus.events.csv", "--out", out, "--report", rep) == 0
    assert out.read_bytes() == (fixtures / "corpus.units.csv").read_bytes()
    assert json.loads(rep.read_text())["L"] == 12


def test_rankfreq_bad_scope(fixtures):
    assert run("rankfreq", "--events", fixtures / "corpus.events.csv", "--scope", "instrument:kazoo") == 1


def test_fit_zm(zipf_table, tmp_path):
    out, plot, svg = tmp_path / "fit.json", tmp_path / "plot.csv", tmp_path / "plot.svg"
    assert run("fit-zm", "--table", zipf_table, "--mode", "raw", "--out", out, "--plot", plot, "--svg", svg) == 0
    fit = json.loads(out.read_text())
    assert fit["converged"] and fit["s"] == pytest.approx(1.3, rel=0.02)
    assert svg.read_text().count("<circle") == 40


def test_fit_zm_too_few_rows(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text(table_to_csv(RankFrequencyTable.from_weights({"a": 3, "b": 2, "c": 1})))
    assert run("fit-zm", "--table", path) == 1
    assert "at least 4" in capsys.readouterr().err


def test_fit_zm_non_convergence_exits_zero(zipf_table, tmp_path, monkeypatch):
    import zmkit.cli as cli
    from zmkit import zmfit

    original = zmfit.fit_zm
    monkeypatch.setattr(cli, "fit_zm", lambda *a, **k: original(*a, **k, max_iter=1))
    out = tmp_path / "fit.json"
    assert run("fit-zm", "--table", zipf_table, "--out", out) == 0
    assert json.loads(out.read_text())["converged"] is False


def test_fit_zm_usage_errors(zipf_table, fixtures):
    assert run("fit-zm") == 2
    assert run("fit-zm", "--table", zipf_table, "--events", fixtures / "corpus.events.csv") == 2
    assert run("fit-zm", "--table", zipf_table, "--mode", "bogus") == 2
    assert run("frobnicate") == 2


def test_fit_zm_from_events(fixtures, tmp_path):
    out = tmp_path / "fit.json"
    assert run("fit-zm", "--events", fixtures / "corpus.events.csv", "--kind", "pair", "--out", out) == 0
    assert json.loads(out.read_text())["N"] == 8


def test_fit_piecewise(zipf_table, tmp_path):
    out = tmp_path / "pw.json"
    assert run("fit-piecewise", "--table", zipf_table, "--out", out) == 0
    assert set(json.loads(out.read_text())) == {"segments", "breakpoints", "slopes", "intercept", "r2", "sse"}


def test_slope(tmp_path):
    out = tmp_path / "s.json"
    assert run("slope", "--q", 10, "--s", 2, "--epsilon", 0.1, "--r-head", 10, "--ranks", "10", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["bar_min"] == pytest.approx(6.6666667) and rep["bar_max"] == 15.0
    assert rep["flat_head"]["q_bound"] == pytest.approx(190)
    assert rep["local_slope"]["10.0"] == -1.0
    assert run("slope") == 2


def test_joint_verify_small(tmp_path):
    out, rep = tmp_path / "g.csv", tmp_path / "g.json"
    assert run("joint-verify", "--mode", "raw", "--t-values", "1,2", "--grid", "threshold:n=40", "--out", out, "--report", rep) == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["s", "1.0", "2.0"]
    assert rows[2][1] == ""
    assert len(json.loads(rep.read_text())["cells"]) == 3


def test_prop1_check(tmp_path):
    out = tmp_path / "p.csv"
    assert run("prop1-check", "--schedule", "1,10,100", "--out", out) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [int(r["N"]) for r in rows] == [1, 10, 100]


def test_product_compare(fixtures, tmp_path):
    out, prod = tmp_path / "pc.json", tmp_path / "prod.csv"
    assert run("product-compare", "--events", fixtures / "corpus.events.csv", "--out", out, "--product-out", prod) == 0
    rep = json.loads(out.read_text())
    assert rep["N_product"] == 4 * 6
    assert rep["r2"] <= 1


def test_report(fixtures, tmp_path):
    out = tmp_path / "r.json"
    assert run("report", "--events", fixtures / "corpus.events.csv", "--scopes", "global", "piece:tied_piece", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["global"]["top_units"]["L"] == 12
    assert "error" in rep["piece:tied_piece"]["fits"]["pair"]  # only two distinct pairs


def test_atomic_write_leaves_no_partial(tmp_path, monkeypatch):
    from zmkit import fileio

    target = tmp_path / "x.txt"
    target.write_text("old")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(fileio.os, "replace", boom)
    with pytest.raises(OSError):
        fileio.atomic_write_text(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_float_format():
    from zmkit.fileio import format_number

    assert format_number(0.1) == "0.1"
    assert format_number(1 / 3) == "0.3333333333333333"
    assert float(format_number(np.float64(2) ** 0.5)) == 2**0.5
