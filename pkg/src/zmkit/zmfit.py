"""Bounded least-squares fitting of the Zipf–Mandelbrot law, with slope diagnostics.

The model is ``f(r) = A (r + q)^(-s)``.  Fits minimize squared residuals in
linear frequency space while goodness of fit is reported as R² of the
logarithms, so a fit can look excellent by R² and still be dominated by its
first few ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import DomainError, InsufficientDataError, UndefinedR2Error
from .solver import bounded_least_squares

MODES = ("raw", "normalized")
DEFAULT_Q_MAX = 1000.0
DEFAULT_S_MAX = 20.0
# s is bounded away from zero because the model degenerates to a constant at s = 0
DEFAULT_S_MIN = 1e-9
START_S = (0.5, 1.0, 2.0)
START_Q = (0.0, 1.0, 10.0)


@dataclass(frozen=True)
class ZMParams:
    A: float
    q: float
    s: float

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not self.q >= 0:
            raise DomainError(f"q must be non-negative, got {self.q}")
        if not self.s > 0:
            raise DomainError(f"s must be positive, got {self.s}")


@dataclass(frozen=True)
class Bounds:
    q_max: float = DEFAULT_Q_MAX
    s_max: float = DEFAULT_S_MAX
    s_min: float = DEFAULT_S_MIN

    def __post_init__(self):
        if not (self.q_max >= 0 and 0 < self.s_min < self.s_max):
            raise DomainError("bounds must satisfy q_max >= 0 and 0 < s_min < s_max")

    def a_max(self, f1: float) -> float:
        """Upper bound on A, returned as its natural log to stay finite for large s_max."""
        return math.log(10.0 * f1) + self.s_max * math.log1p(self.q_max)


@dataclass(frozen=True)
class ZMFit:
    params: ZMParams
    mode: str
    r2: float | None
    converged: bool
    iterations: int
    sse: float
    at_bound: frozenset = field(default_factory=frozenset)
    N: int = 0
    L: int | None = None
    message: str = ""

    def to_dict(self) -> dict:
        band = slope_band(self.params)
        return {
            "mode": self.mode,
            "A": self.params.A,
            "q": self.params.q,
            "s": self.params.s,
            "r2": self.r2,
            "sse": self.sse,
            "converged": self.converged,
            "at_bound": sorted(self.at_bound),
            "iterations": self.iterations,
            "N": self.N,
            "L": self.L,
            "bar_min": band.bar_min,
            "bar_max": band.bar_max,
        }


def zm_value(params: ZMParams, r):
    """``A (r + q)^(-s)``, elementwise for array ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("ranks must be positive")
    out = params.A * np.exp(-params.s * np.log(r + params.q))
    return float(out) if out.ndim == 0 else out


def zm_jacobian(params: ZMParams, r) -> np.ndarray:
    """Columns d/dA, d/dq, d/ds of the model at each rank."""
    r = np.asarray(r, dtype=float)
    base = np.exp(-params.s * np.log(r + params.q))
    return np.column_stack(
        [base, -params.A * params.s * base / (r + params.q), -params.A * np.log(r + params.q) * base]
    )


def r2_from_values(observed, fitted) -> float:
    """1 - SS_res/SS_tot on natural logs of two positive sequences."""
    y = np.log(np.asarray(observed, dtype=float))
    yhat = np.log(np.asarray(fitted, dtype=float))
    if y.shape != yhat.shape:
        raise ValueError("observed and fitted must have the same length")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise DomainError("R² needs strictly positive observed and fitted values")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if np.ptp(y) == 0.0 or ss_tot == 0.0:
        raise UndefinedR2Error("observed values have zero variance in log space")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def _rank_data(table, mode: str, ranks=None, values=None):
    if ranks is not None:
        return np.asarray(ranks, dtype=float), np.asarray(values, dtype=float)
    return table.ranks, table.values(mode)


def r2_log(table, fit: ZMFit, *, ranks=None, values=None) -> float:
    """Log-space R² of ``fit`` against the table it was fitted to."""
    r, y = _rank_data(table, fit.mode, ranks, values)
    return r2_from_values(y, zm_value(fit.params, r))


def fit_zm(
    table=None,
    mode: str = "raw",
    bounds: Bounds | None = None,
    init: ZMParams | None = None,
    *,
    ranks=None,
    values=None,
    seed: int | None = None,
    n_random: int = 0,
    max_iter: int = 5000,
) -> ZMFit:
    """Fit ``A (r+q)^(-s)`` by bounded least squares on linear residuals.

    Pass a rank-frequency table, or explicit ``ranks`` and ``values``.  In
    normalized mode the values should be relative frequencies and A is held
    at 1.  Every start of a fixed grid (plus ``init`` and ``n_random`` seeded
    random starts) is run and the lowest SSE kept.  A fit that hits the
    iteration cap is returned with ``converged=False``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    bounds = bounds or Bounds()
    r, y = _rank_data(table, mode, ranks, values)
    if r.size < 4:
        raise InsufficientDataError(f"need at least 4 ranks to fit 3 parameters, got {r.size}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("frequencies must be positive and finite")
    if np.any(r <= 0):
        raise DomainError("ranks must be positive")
    L = table.L if table is not None else None
    f1 = float(y[0])

    starts = [(f1, 1.0, 1.0)]
    starts += [(f1 * (1 + q0) ** s0, q0, s0) for s0 in START_S for q0 in START_Q]
    if init is not None:
        starts.insert(0, (init.A, init.q, init.s))
    if n_random:
        rng = np.random.default_rng(seed)
        for _ in range(n_random):
            q0 = float(rng.uniform(0, min(bounds.q_max, 100.0)))
            s0 = float(rng.uniform(0.1, min(bounds.s_max, 5.0)))
            starts.append((f1 * (1 + q0) ** s0, q0, s0))

    if mode == "raw":
        la_hi = bounds.a_max(f1)
        la_lo = math.log(f1) - 50.0
        lower = np.array([la_lo, 0.0, bounds.s_min])
        upper = np.array([la_hi, bounds.q_max, bounds.s_max])

        def unpack(x):
            return x[0], x[1], x[2]

        def to_x(a, q, s):
            return [math.log(a), q, s]

    else:
        lower = np.array([0.0, bounds.s_min])
        upper = np.array([bounds.q_max, bounds.s_max])

        def unpack(x):
            return 0.0, x[0], x[1]

        def to_x(a, q, s):
            return [q, s]

    def model(x):
        la, q, s = unpack(x)
        return np.exp(la - s * np.log(r + q))

    def fun(x):
        return model(x) - y

    def jac(x):
        la, q, s = unpack(x)
        lrq = np.log(r + q)
        f = np.exp(la - s * lrq)
        cols = [-s * f / (r + q), -lrq * f]
        if mode == "raw":
            cols.insert(0, f)
        return np.column_stack(cols)

    best = None
    for a0, q0, s0 in starts:
        x0 = np.clip(to_x(a0, q0, s0), lower, upper)
        try:
            res = bounded_least_squares(fun, jac, x0, lower, upper, max_iter=max_iter)
        except FloatingPointError:
            continue
        if best is None or res.sse < best.sse or (res.sse == best.sse and res.converged and not best.converged):
            best = res
    if best is None:
        raise DomainError("model is not finite at any starting point")

    la, q, s = unpack(best.x)
    params = ZMParams(math.exp(la), float(q), float(s))
    names = ["A", "q", "s"] if mode == "raw" else ["q", "s"]
    at_bound = frozenset(n for n, a in zip(names, best.active) if a)
    try:
        r2 = r2_from_values(y, model(best.x))
    except (UndefinedR2Error, DomainError):
        r2 = None
    return ZMFit(
        params=params,
        mode=mode,
        r2=r2,
        converged=best.converged,
        iterations=best.iterations,
        sse=best.sse,
        at_bound=at_bound,
        N=int(r.size),
        L=L,
        message=best.message,
    )


def local_slope(params: ZMParams, r):
    """Log-log slope ``-s r / (r + q)`` of the model at rank ``r``."""
    r = np.asarray(r, dtype=float)
    # written as -s / (1 + q/r) so that q = 0 gives exactly -s and rounding stays monotone in r
    out = -params.s / (1.0 + params.q / r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SlopeBand:
    lower_slope: float
    upper_slope: float
    bar_min: float | None
    bar_max: float | None

    @property
    def empty(self) -> bool:
        return self.bar_min is None


def slope_band(params: ZMParams, lower: float = -1.2, upper: float = -0.8) -> SlopeBand:
    """Ranks between which the local slope stays inside ``[lower, upper]``.

    The slope falls monotonically from 0 toward ``-s``, so it crosses
    ``upper`` at ``bar_min`` and ``lower`` at ``bar_max``.  If ``s`` never
    gets below ``lower`` then ``bar_max`` is infinite; if it never reaches
    ``upper`` the band is empty and both ends are None.
    """
    if not lower < upper < 0:
        raise DomainError("need lower < upper < 0")
    s, q = params.s, params.q
    hi, lo = abs(upper), abs(lower)
    if s <= hi:
        return SlopeBand(lower, upper, None, None)
    bar_min = hi * q / (s - hi)
    bar_max = lo * q / (s - lo) if s > lo else math.inf
    return SlopeBand(lower, upper, bar_min, bar_max)


def flat_head_q_bound(s: float, epsilon: float, r_h: float) -> float:
    """Smallest q that keeps the slope magnitude at most ``epsilon`` for all ranks up to ``r_h``."""
    if epsilon <= 0 or s <= 0:
        raise DomainError("s and epsilon must be positive")
    if r_h < 1:
        raise DomainError("r_h must be at least 1")
    if epsilon >= s:
        return 0.0
    return (s / epsilon - 1.0) * r_h
