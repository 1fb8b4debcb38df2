"""Zipf–Mandelbrot fitting of rank-frequency data extracted from scores."""

from .errors import (
    BudgetError,
    DomainError,
    EmptyDataError,
    InsufficientDataError,
    MappingError,
    ScopeError,
    ScoreParseError,
    ScoreStructureError,
    UndefinedR2Error,
    ZMKitError,
)
from .ingest import (
    Instrument,
    NormalizationPolicy,
    NoteEvent,
    Pitch,
    UnitKind,
    YulmyeongTable,
    ZipfianUnit,
    build_units,
    normalize_events,
    parse_musicxml,
    yulmyeong_to_pitch,
)
from .joint import (
    JointLawSpec,
    LatticeSpec,
    RankGrid,
    area_closed_form,
    area_inverse,
    fit_joint_zm,
    lattice_count,
    lattice_sorted_value,
    r2_grid,
    theoretical_curve,
    verify_prop1,
)
from .piecewise import PiecewiseFit, evaluate_piecewise, fit_piecewise_loglog
from .rankfreq import CorpusScope, RankFrequencyTable, count_units, merge_scope, product_table, top_k
from .zmfit import Bounds, SlopeBand, ZMFit, ZMParams, fit_zm, flat_head_q_bound, local_slope, r2_log, slope_band, zm_value

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
