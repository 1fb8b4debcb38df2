"""Command-line front end.

Every command reads flat files and writes its outputs atomically.  Exit status
is 0 on success; unusable input data gives 1 and a usage error gives 2.
Without ``--out`` the primary output goes to standard output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import ZMKitError
from .fileio import atomic_write_text, dumps_json, format_number
from .ingest import (
    NormalizationPolicy,
    UnitKind,
    build_units,
    events_to_csv,
    normalize_events,
    parse_files,
    read_events_csv,
)
from .joint import DEFAULT_T_VALUES, JointLawSpec, RankGrid, r2_grid, verify_prop1
from .piecewise import fit_piecewise_loglog
from .plotdata import emit_plotdata
from .rankfreq import (
    CorpusScope,
    compare_tables,
    count_units,
    merge_scope,
    product_table,
    read_table_csv,
    top_units_report,
    table_to_csv,
)
from .zmfit import Bounds, ZMParams, fit_zm, flat_head_q_bound, local_slope, slope_band


class UsageError(Exception):
    """Flags are inconsistent in a way argparse cannot detect."""


SCORE_SUFFIXES = (".musicxml", ".xml")


def _emit(args, text: str) -> None:
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _score_paths(inputs: Sequence[str]) -> list[Path]:
    paths: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(q for q in sorted(p.rglob("*")) if q.suffix.lower() in SCORE_SUFFIXES and q.is_file())
        elif p.is_file():
            paths.append(p)
        else:
            raise FileNotFoundError(f"no such score file or directory: {item}")
    if not paths:
        raise FileNotFoundError("no MusicXML files found in the given inputs")
    return paths


def _read_events(path: str):
    return read_events_csv(Path(path).read_text(encoding="utf-8"))


def _load_table(args):
    """A rank-frequency table from ``--table`` or from ``--events`` plus scope and unit kind."""
    if bool(args.table) == bool(args.events):
        raise UsageError("give exactly one of --table or --events")
    if args.table:
        return read_table_csv(Path(args.table).read_text(encoding="utf-8"))
    return merge_scope(_read_events(args.events), CorpusScope.parse(args.scope), args.kind)


def _bounds(args) -> Bounds:
    return Bounds(q_max=args.q_max, s_max=args.s_max)


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> None:
    events = parse_files(_score_paths(args.inputs), instrument=args.instrument)
    policy = NormalizationPolicy.load(args.policy) if args.policy else NormalizationPolicy()
    if not args.raw:
        events = normalize_events(events, policy)
    _emit(args, events_to_csv(events))


def cmd_rankfreq(args) -> None:
    events = _read_events(args.events)
    table = merge_scope(events, CorpusScope.parse(args.scope), args.kind)
    _emit(args, table_to_csv(table))
    if args.report:
        atomic_write_text(args.report, dumps_json(top_units_report(events, args.top)))


def _write_plot(args, table, fit, mode) -> None:
    if args.plot:
        emit_plotdata(table.ranks, table.values(mode), fit, args.plot, args.svg)
    elif args.svg:
        raise UsageError("--svg requires --plot")


def cmd_fit_zm(args) -> None:
    table = _load_table(args)
    init = ZMParams(*args.init) if args.init else None
    fit = fit_zm(table, args.mode, _bounds(args), init, seed=args.seed, n_random=args.n_random)
    _emit(args, dumps_json(fit.to_dict()))
    _write_plot(args, table, fit, args.mode)
    if not fit.converged:
        print(f"warning: fit did not converge ({fit.message})", file=sys.stderr)


def cmd_fit_piecewise(args) -> None:
    table = _load_table(args)
    fit = fit_piecewise_loglog(table, args.segments)
    _emit(args, dumps_json(fit.to_dict()))
    _write_plot(args, table, fit, "normalized")


def cmd_slope(args) -> None:
    if args.fit:
        data = json.loads(Path(args.fit).read_text(encoding="utf-8"))
        params = ZMParams(data["A"], data["q"], data["s"])
    elif args.q is not None and args.s is not None:
        params = ZMParams(args.A, args.q, args.s)
    else:
        raise UsageError("give --fit or both --q and --s")
    band = slope_band(params, args.lower, args.upper)
    report = {
        "A": params.A,
        "q": params.q,
        "s": params.s,
        "lower_slope": band.lower_slope,
        "upper_slope": band.upper_slope,
        "band_empty": band.empty,
        "bar_min": band.bar_min,
        "bar_max": band.bar_max,
    }
    if args.ranks:
        report["local_slope"] = {format_number(r): local_slope(params, r) for r in args.ranks}
    if args.epsilon is not None:
        report["flat_head"] = {
            "epsilon": args.epsilon,
            "r_head": args.r_head,
            "q_bound": flat_head_q_bound(params.s, args.epsilon, args.r_head),
        }
    _emit(args, dumps_json(report))


def grid_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s"] + [format_number(t) for t in result.t_values])
    for i, s in enumerate(result.t_values):
        w.writerow([format_number(s)] + [format_number(v) for v in result.r2[i]])
    return buf.getvalue()


def cmd_joint_verify(args) -> None:
    grid = RankGrid.parse(args.grid)
    result = r2_grid(args.t_values, args.mode, grid, bounds=_bounds(args), seed=args.seed, n_random=args.n_random)
    _emit(args, grid_csv(result))
    if args.report:
        cells = [
            {"s": s, "t": t, **fit.to_dict()} for (s, t), fit in sorted(result.fits.items())
        ]
        atomic_write_text(
            args.report,
            dumps_json({"mode": args.mode, "grid": args.grid, "t_values": list(result.t_values), "cells": cells}),
        )


def cmd_prop1_check(args) -> None:
    rep = verify_prop1(JointLawSpec(args.t1, args.t2), args.r, args.eps1, args.eps2, args.schedule)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "c", "sorted_value", "target", "value_error", "rank_error"])
    for row in rep.rows:
        w.writerow(
            [row.N, row.c, format_number(row.sorted_value), format_number(rep.target),
             format_number(row.value_error), format_number(row.rank_error)]
        )
    _emit(args, buf.getvalue())
    print(
        f"within tolerance: {rep.within_tolerance}; non-increasing after first: {rep.monotone_after_first}",
        file=sys.stderr,
    )


def cmd_product_compare(args) -> None:
    events = [ev for ev in _read_events(args.events) if CorpusScope.parse(args.scope).matches(ev)]
    if not events:
        raise ZMKitError(f"no events match scope {args.scope}")
    pitch = count_units(build_units(events, UnitKind.PITCH))
    duration = count_units(build_units(events, UnitKind.DURATION))
    observed = count_units(build_units(events, UnitKind.PAIR))
    model = product_table(pitch, duration)
    report = {
        "scope": args.scope,
        "L": observed.L,
        "N_observed": observed.N,
        "N_product": model.N,
        "r2": compare_tables(observed, model),
    }
    _emit(args, dumps_json(report))
    if args.product_out:
        atomic_write_text(args.product_out, table_to_csv(model))


def cmd_report(args) -> None:
    events = _read_events(args.events)
    scopes = args.scopes or ["global"]
    out = {}
    for text in scopes:
        scope = CorpusScope.parse(text)
        selected = [ev for ev in events if scope.matches(ev)]
        entry: dict = {"top_units": top_units_report(selected, args.top) if selected else None, "fits": {}}
        for kind in UnitKind:
            table = merge_scope(events, scope, kind)
            try:
                entry["fits"][kind.value] = fit_zm(table, args.mode, _bounds(args), seed=args.seed).to_dict()
            except ZMKitError as exc:
                entry["fits"][kind.value] = {"error": str(exc)}
        out[text] = entry
    _emit(args, dumps_json(out))


# ---------------------------------------------------------------------------
# parser


def _add_table_source(p) -> None:
    p.add_argument("--table", help="rank-frequency table CSV")
    p.add_argument("--events", help="event CSV (used with --scope and --kind)")
    p.add_argument("--scope", default="global", help="global, instrument:<name> or piece:<id>")
    p.add_argument("--kind", default="pair", choices=[k.value for k in UnitKind])


def _add_bounds(p) -> None:
    p.add_argument("--q-max", type=float, default=1000.0)
    p.add_argument("--s-max", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0, help="seed for random multi-start points")
    p.add_argument("--n-random", type=int, default=0, help="extra random starting points")


def _add_plot(p) -> None:
    p.add_argument("--plot", help="plot-data CSV path")
    p.add_argument("--svg", help="log-log SVG path (requires --plot)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zmkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"zmkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="MusicXML scores to a normalized event CSV")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="score files or directories")
    p.add_argument("--policy", help="normalization policy JSON")
    p.add_argument("--instrument", help="instrument for every part, overriding part names")
    p.add_argument("--raw", action="store_true", help="skip octave and duration normalization")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rankfreq", help="rank-frequency table for one scope")
    p.add_argument("--events", required=True)
    p.add_argument("--scope", default="global")
    p.add_argument("--kind", default="pair", choices=[k.value for k in UnitKind])
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--report", help="also write the three-panel top-k JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rankfreq)

    p = sub.add_parser("fit-zm", help="bounded Zipf–Mandelbrot fit")
    _add_table_source(p)
    p.add_argument("--mode", choices=["raw", "normalized"], default="raw")
    _add_bounds(p)
    p.add_argument("--init", type=float, nargs=3, metavar=("A", "Q", "S"))
    _add_plot(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_zm)

    p = sub.add_parser("fit-piecewise", help="continuous piecewise-linear log-log fit")
    _add_table_source(p)
    p.add_argument("--segments", type=int, default=3)
    _add_plot(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_piecewise)

    p = sub.add_parser("slope", help="local slope, slope band and flat-head bound")
    p.add_argument("--fit", help="fit JSON from fit-zm")
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--q", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--lower", type=float, default=-1.2)
    p.add_argument("--upper", type=float, default=-0.8)
    p.add_argument("--ranks", type=_float_list, help="comma-separated ranks to report the local slope at")
    p.add_argument("--epsilon", type=float, help="flat-head slope tolerance")
    p.add_argument("--r-head", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_slope)

    p = sub.add_parser("joint-verify", help="R² grid of fits to the joint-law curve")
    p.add_argument("--mode", choices=["raw", "normalized"], default="normalized")
    p.add_argument("--t-values", type=_float_list, default=list(DEFAULT_T_VALUES))
    p.add_argument("--grid", default="threshold:n=100,f_min=0.001,r_min=1",
                   help="threshold:n=..,f_min=..,r_min=.. or rank:n=..,r_min=..,r_max=..")
    _add_bounds(p)
    p.add_argument("--report", help="per-cell fit JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_joint_verify)

    p = sub.add_parser("prop1-check", help="lattice sorting against the inverse area")
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--t2", type=float, default=2.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--eps1", type=float, default=math.inf)
    p.add_argument("--eps2", type=float, default=math.inf)
    p.add_argument("--schedule", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--out")
    p.set_defaults(func=cmd_prop1_check)

    p = sub.add_parser("product-compare", help="observed pair table against the product of its marginals")
    p.add_argument("--events", required=True)
    p.add_argument("--scope", default="global")
    p.add_argument("--product-out", help="write the product table CSV here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_product_compare)

    p = sub.add_parser("report", help="top-k tables and fits per scope")
    p.add_argument("--events", required=True)
    p.add_argument("--scopes", nargs="*")
    p.add_argument("--mode", choices=["raw", "normalized"], default="normalized")
    p.add_argument("--top", type=int, default=10)
    _add_bounds(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"zmkit {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ZMKitError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"zmkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
