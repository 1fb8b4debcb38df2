"""Continuous piecewise-linear fits to rank-frequency data on log-log axes.

For fixed breakpoints the model ``y = c + m x + sum_j d_j (x - x_j)_+`` is
linear in its coefficients, so each candidate is an ordinary least-squares
solve.  Breakpoints are restricted to data ranks and searched exhaustively,
which makes the result the global optimum of that discrete search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError
from .zmfit import r2_from_values

# a segment must own at least this many data points beyond its starting breakpoint
MIN_POINTS = 2


@dataclass(frozen=True)
class PiecewiseFit:
    segments: int
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercept: float
    r2: float
    sse: float

    @property
    def log_breakpoints(self) -> tuple[float, ...]:
        return tuple(math.log(b) for b in self.breakpoints)

    def to_dict(self) -> dict:
        return {
            "segments": self.segments,
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
            "intercept": self.intercept,
            "r2": self.r2,
            "sse": self.sse,
        }


def _design(x: np.ndarray, knots) -> np.ndarray:
    cols = [np.ones_like(x), x]
    cols += [np.maximum(x - k, 0.0) for k in knots]
    return np.column_stack(cols)


def _log_value(intercept: float, slopes, log_knots, x):
    # slope increments at each knot reproduce the per-segment slopes
    y = intercept + slopes[0] * x
    for k, (prev, cur) in zip(log_knots, zip(slopes, slopes[1:])):
        y = y + (cur - prev) * np.maximum(x - k, 0.0)
    return y


def fit_piecewise_loglog(table=None, segments: int = 3, *, ranks=None, values=None) -> PiecewiseFit:
    """Best continuous ``segments``-piece line through (log r, log f).

    Candidate breakpoints sit at interior data ranks and every segment keeps
    at least two points of its own.  Equal-SSE candidates resolve to the
    lexicographically smallest breakpoint tuple.
    """
    if segments < 1:
        raise ValueError("segments must be at least 1")
    if ranks is None:
        ranks, values = table.ranks, table.frequencies()
    r = np.asarray(ranks, dtype=float)
    f = np.asarray(values, dtype=float)
    n = r.size
    if n < 2 * segments + 1:
        raise InsufficientDataError(f"{segments} segments need at least {2 * segments + 1} points, got {n}")
    if np.any(f <= 0) or np.any(r <= 0):
        raise DomainError("ranks and frequencies must be positive")
    order = np.argsort(r, kind="stable")
    r, f = r[order], f[order]
    x, y = np.log(r), np.log(f)

    best = None
    best_sse = math.inf
    # index i is a breakpoint; the first segment needs indices 0..i-1, so i >= MIN_POINTS
    candidates = range(MIN_POINTS, n - MIN_POINTS)
    for idx in itertools.combinations(candidates, segments - 1):
        if any(b - a < MIN_POINTS for a, b in zip(idx, idx[1:])):
            continue
        X = _design(x, x[list(idx)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        sse = float(resid @ resid)
        if best is None or sse < best_sse - 1e-12 * (1.0 + best_sse):
            best, best_sse = (idx, coef), sse
    idx, coef = best
    slopes = tuple(float(v) for v in np.cumsum(coef[1:]))
    knots = tuple(float(x[i]) for i in idx)
    intercept = float(coef[0])
    fitted = _log_value(intercept, slopes, knots, x)
    sse = float(np.sum((y - fitted) ** 2))
    return PiecewiseFit(
        segments=segments,
        breakpoints=tuple(float(r[i]) for i in idx),
        slopes=slopes,
        intercept=intercept,
        r2=r2_from_values(f, np.exp(fitted)),
        sse=sse,
    )


def evaluate_piecewise(fit: PiecewiseFit, r):
    """Fitted frequency at rank ``r`` (scalar or array); the last segment extends to infinity."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 1):
        raise DomainError("piecewise fits are defined for r >= 1")
    out = np.exp(_log_value(fit.intercept, fit.slopes, fit.log_breakpoints, np.log(arr)))
    return float(out) if out.ndim == 0 else out
