"""Rank-frequency behaviour of the product of two independent power laws.

The joint density ``f(x1, x2) = x1^(-t1) x2^(-t2)`` on ``[1, inf)^2`` has
superlevel sets ``{f >= f0}`` whose area ``A(f0)`` has a closed form.
Sorting the density's values is the same as inverting that area, so the
continuous rank-frequency curve is ``f*(r) = A^(-1)(r)``.  This module
evaluates and inverts ``A``, checks it against exact lattice enumeration,
and fits the Zipf–Mandelbrot law to the resulting curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetError, DomainError
from .zmfit import Bounds, ZMFit, fit_zm

EQUAL_REL_TOL = 1e-9
BISECT_MAX_ITER = 200
DEFAULT_BUDGET = 10**8
LOG_SLACK = 1e-12
DEFAULT_T_VALUES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


@dataclass(frozen=True)
class JointLawSpec:
    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0) or not (math.isfinite(self.t1) and math.isfinite(self.t2)):
            raise DomainError(f"exponents must be positive and finite, got ({self.t1}, {self.t2})")

    def density(self, x1, x2):
        return np.power(x1, -self.t1) * np.power(x2, -self.t2)


@dataclass(frozen=True)
class LatticeSpec:
    N1: int
    N2: int

    def __post_init__(self):
        if int(self.N1) != self.N1 or int(self.N2) != self.N2 or self.N1 < 1 or self.N2 < 1:
            raise DomainError("lattice sizes must be positive integers")

    @property
    def cell(self) -> int:
        return self.N1 * self.N2


def _check_f0(f0: float) -> float:
    f0 = float(f0)
    if not 0.0 < f0 <= 1.0:
        raise DomainError(f"threshold must lie in (0, 1], got {f0}")
    return f0


def _expm1_ratio(d: float) -> float:
    """(e^d - 1)/d with the removable singularity filled in."""
    return math.expm1(d) / d if d != 0.0 else 1.0


def area_closed_form(spec: JointLawSpec, f0: float) -> float:
    """Area of ``{x in [1, inf)^2 : f(x) >= f0}``.

    With ``a = ln(1/f0)`` and ``t1 != t2`` the area is
    ``1 + (t1 e^(a/t1) - t2 e^(a/t2)) / (t2 - t1)``, and for ``t1 = t2 = t``
    it is ``1 + e^(a/t) (a/t - 1)``.  The unequal case is evaluated in the
    rearranged form ``1 + e^(a/hi) (a/hi * (e^d - 1)/d - 1)`` with
    ``d = a (hi - lo)/(lo hi)``, which is exact algebra but free of the
    cancellation that ruins the textbook form as the exponents approach each
    other.  Exponents within a relative 1e-9 use the equal branch at their
    mean.  The result is symmetric in the exponents by construction.
    """
    f0 = _check_f0(f0)
    if f0 == 1.0:
        return 0.0
    a = -math.log(f0)
    lo, hi = sorted((spec.t1, spec.t2))
    if hi - lo <= EQUAL_REL_TOL * hi:
        t = 0.5 * (lo + hi)
        return 1.0 + math.exp(a / t) * (a / t - 1.0)
    d = a * (hi - lo) / (lo * hi)
    return 1.0 + math.exp(a / hi) * (a / hi * _expm1_ratio(d) - 1.0)


def area_inverse(spec: JointLawSpec, r: float) -> float:
    """Threshold ``f0`` whose superlevel set has area ``r``, by bisection."""
    r = float(r)
    if not r >= 0 or not math.isfinite(r):
        raise DomainError(f"area must be a finite non-negative number, got {r}")
    if r == 0.0:
        return 1.0
    hi = 1.0
    lo = 0.5
    while area_closed_form(spec, lo) <= r:
        hi = lo
        lo *= 0.5
        if lo == 0.0:
            raise DomainError(f"area {r} is beyond floating-point range for {spec}")
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        val = area_closed_form(spec, mid)
        if val == r:
            return mid
        if val > r:
            lo = mid
        else:
            hi = mid
    # the bracket has collapsed to adjacent floats; keep the closer end
    return lo if abs(area_closed_form(spec, lo) - r) <= abs(area_closed_form(spec, hi) - r) else hi


@dataclass(frozen=True)
class TheoreticalCurve:
    spec: JointLawSpec
    ranks: tuple[float, ...]
    f_star: tuple[float, ...]

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.ranks, self.f_star))


def theoretical_curve(spec: JointLawSpec, ranks: Sequence[float]) -> TheoreticalCurve:
    ranks = [float(x) for x in ranks]
    if not ranks:
        raise DomainError("no ranks given")
    if ranks[0] < 1 or any(b <= a for a, b in zip(ranks, ranks[1:])):
        raise DomainError("ranks must be strictly increasing and at least 1")
    return TheoreticalCurve(spec, tuple(ranks), tuple(area_inverse(spec, x) for x in ranks))


# ---------------------------------------------------------------------------
# lattice enumeration


class _Predicate:
    """Decides ``(N1/m)^t1 (N2/n)^t2 >= f0`` for lattice point (m, n).

    Integer exponents are compared exactly in rational arithmetic (every
    float is a rational), so boundary ties such as ``1/(mn) = 1/4`` are never
    lost.  Other exponents are compared in log space with a small slack,
    which errs on the side of including a tie.
    """

    def __init__(self, spec: JointLawSpec, lattice: LatticeSpec, f0: float):
        self.N1, self.N2 = lattice.N1, lattice.N2
        self.t1, self.t2 = spec.t1, spec.t2
        self.log_f0 = math.log(f0)
        self.exact = float(self.t1).is_integer() and float(self.t2).is_integer() and max(self.t1, self.t2) <= 64
        if self.exact:
            self.k1, self.k2 = int(self.t1), int(self.t2)
            fr = Fraction(f0)
            # N1^k1 N2^k2 * den >= num * m^k1 n^k2
            self.lhs = self.N1**self.k1 * self.N2**self.k2 * fr.denominator
            self.num = fr.numerator
        self.slack = LOG_SLACK * max(1.0, abs(self.log_f0))

    def __call__(self, m: int, n: int) -> bool:
        if self.exact:
            return self.lhs >= self.num * m**self.k1 * n**self.k2
        return self.log_value(m, n) >= self.log_f0 - self.slack

    def log_value(self, m, n):
        return self.t1 * math.log(self.N1 / m) + self.t2 * math.log(self.N2 / n)

    def n_max(self, m: int) -> int:
        """Largest n with (m, n) in the set, or N2 - 1 if none."""
        # (N2/n)^t2 >= f0 (m/N1)^t1  <=>  n <= N2 * exp((t1 log(N1/m) - log f0) / t2)
        bound = (self.t1 * math.log(self.N1 / m) - self.log_f0) / self.t2
        n = int(math.floor(self.N2 * math.exp(min(bound, 700.0))))
        n = max(n, self.N2 - 1)
        while self(m, n + 1):
            n += 1
        while n >= self.N2 and not self(m, n):
            n -= 1
        return n

    def m_max(self) -> int:
        bound = -self.log_f0 / self.t1
        m = int(math.floor(self.N1 * math.exp(min(bound, 700.0))))
        m = max(m, self.N1)
        while self(m + 1, self.N2):
            m += 1
        while m > self.N1 and not self(m, self.N2):
            m -= 1
        return m


def _bounding_box(pred: _Predicate, f0: float, budget: int) -> int:
    m_hi = pred.m_max()
    n_hi = pred.n_max(pred.N1)
    size = (m_hi - pred.N1 + 1) * (n_hi - pred.N2 + 1)
    if size > budget:
        raise BudgetError(
            f"bounding box holds {size} lattice points, above the budget of {budget}; "
            "use a larger threshold or a coarser lattice"
        )
    return m_hi


def lattice_count(spec: JointLawSpec, lattice: LatticeSpec, f0: float, *, budget: int = DEFAULT_BUDGET) -> float:
    """Normalized count ``#{(m/N1, n/N2) : f >= f0} / (N1 N2)`` by exact enumeration.

    Points whose value equals ``f0`` are counted.
    """
    f0 = _check_f0(f0)
    pred = _Predicate(spec, lattice, f0)
    m_hi = _bounding_box(pred, f0, budget)
    total = 0
    for m in range(pred.N1, m_hi + 1):
        total += pred.n_max(m) - pred.N2 + 1
    return total / lattice.cell


def _values_at_least(spec: JointLawSpec, lattice: LatticeSpec, f0: float, budget: int) -> np.ndarray:
    pred = _Predicate(spec, lattice, f0)
    m_hi = _bounding_box(pred, f0, budget)
    chunks = []
    for m in range(pred.N1, m_hi + 1):
        top = pred.n_max(m)
        if top < pred.N2:
            break
        n = np.arange(pred.N2, top + 1, dtype=float)
        chunks.append((lattice.N1 / m) ** spec.t1 * (lattice.N2 / n) ** spec.t2)
    return np.concatenate(chunks) if chunks else np.empty(0)


def lattice_sorted_value(
    spec: JointLawSpec, lattice: LatticeSpec, c: int, *, safety: float | None = None, budget: int = DEFAULT_BUDGET
) -> float:
    """The c-th largest density value over the lattice, counting repeated values separately.

    Only the values above a threshold are enumerated.  The threshold comes
    from inverting the continuous area at ``(c + safety)/(N1 N2)``; if that
    captures fewer than ``c`` points it is halved and the enumeration redone.
    """
    if int(c) != c or c < 1:
        raise DomainError("rank must be a positive integer")
    c = int(c)
    if safety is None:
        safety = max(16.0, 4.0 * (lattice.N1 + lattice.N2))
    f0 = area_inverse(spec, (c + safety) / lattice.cell)
    while True:
        vals = _values_at_least(spec, lattice, f0, budget)
        if vals.size >= c:
            break
        f0 *= 0.5
    # the c-th largest is the (size - c)-th smallest
    return float(np.partition(vals, vals.size - c)[vals.size - c])


@dataclass(frozen=True)
class Prop1Row:
    N: int
    c: int
    sorted_value: float
    value_error: float
    rank_error: float


@dataclass(frozen=True)
class Prop1Report:
    spec: JointLawSpec
    r: float
    target: float
    eps1: float
    eps2: float
    rows: tuple[Prop1Row, ...]

    @property
    def within_tolerance(self) -> bool:
        last = self.rows[-1]
        return last.value_error < self.eps1 and last.rank_error < self.eps2

    @property
    def monotone_after_first(self) -> bool:
        errs = [row.value_error for row in self.rows[1:]]
        return all(b <= a for a, b in zip(errs, errs[1:]))

    @property
    def converged(self) -> bool:
        return self.within_tolerance and self.monotone_after_first


def verify_prop1(
    spec: JointLawSpec,
    r: float,
    eps1: float = math.inf,
    eps2: float = math.inf,
    n_schedule: Sequence[int] = (1, 10, 100, 1000),
    *,
    budget: int = DEFAULT_BUDGET,
) -> Prop1Report:
    """Compare lattice sorting with the inverse area on square lattices of growing size.

    For each N the rank used is the integer nearest ``r N^2``.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    sizes = [int(n) for n in n_schedule]
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise DomainError("the lattice schedule must be a non-empty increasing list of positive sizes")
    target = area_inverse(spec, r)
    rows = []
    for N in sizes:
        c = max(1, math.floor(r * N * N + 0.5))
        value = lattice_sorted_value(spec, LatticeSpec(N, N), c, budget=budget)
        rows.append(Prop1Row(N, c, value, abs(target - value), abs(r - c / (N * N))))
    return Prop1Report(spec, float(r), target, eps1, eps2, tuple(rows))


# ---------------------------------------------------------------------------
# fitting the joint curve


@dataclass(frozen=True)
class RankGrid:
    """How the theoretical curve is sampled for fitting.

    ``threshold`` spaces ``n`` thresholds logarithmically over ``[f_min, 1]``
    and keeps the points whose area (the rank) is at least ``r_min``.
    ``rank`` spaces ``n`` ranks logarithmically over ``[r_min, r_max]`` and
    inverts the area at each.
    """

    kind: str = "threshold"
    n: int = 100
    f_min: float = 1e-3
    r_min: float = 1.0
    r_max: float = 1e4

    def __post_init__(self):
        if self.kind not in ("threshold", "rank"):
            raise DomainError("grid kind must be 'threshold' or 'rank'")
        if self.n < 4:
            raise DomainError("a grid needs at least 4 points")
        if not 0 < self.f_min < 1:
            raise DomainError("f_min must lie in (0, 1)")
        if not 0 < self.r_min < self.r_max:
            raise DomainError("need 0 < r_min < r_max")

    @classmethod
    def parse(cls, text: str) -> "RankGrid":
        """``threshold:n=100,f_min=1e-3,r_min=1`` or ``rank:n=200,r_min=1,r_max=1e4``."""
        kind, _, rest = text.partition(":")
        kwargs: dict = {"kind": kind}
        for item in filter(None, rest.split(",")):
            key, eq, val = item.partition("=")
            if not eq or key not in ("n", "f_min", "r_min", "r_max"):
                raise DomainError(f"bad grid option {item!r}")
            kwargs[key] = int(val) if key == "n" else float(val)
        return cls(**kwargs)

    def sample(self, spec: JointLawSpec) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "rank":
            ranks = np.logspace(math.log10(self.r_min), math.log10(self.r_max), self.n)
            return ranks, np.array([area_inverse(spec, x) for x in ranks])
        f0 = np.logspace(math.log10(self.f_min), 0.0, self.n)
        ranks = np.array([area_closed_form(spec, x) for x in f0])
        keep = ranks >= self.r_min
        ranks, f0 = ranks[keep][::-1], f0[keep][::-1]
        if ranks.size < 4:
            raise DomainError(f"grid leaves only {ranks.size} points with rank >= {self.r_min}")
        return ranks, f0


def fit_joint_zm(
    spec: JointLawSpec, mode: str = "normalized", grid: RankGrid | None = None, bounds: Bounds | None = None, **fit_kwargs
) -> ZMFit:
    """Fit the Zipf–Mandelbrot law to the sampled inverse-area curve.

    Normalized mode rescales the samples to sum to one before fitting.
    """
    ranks, values = (grid or RankGrid()).sample(spec)
    if mode == "normalized":
        values = values / values.sum()
    return fit_zm(None, mode, bounds, ranks=ranks, values=values, **fit_kwargs)


@dataclass
class R2Grid:
    t_values: tuple[float, ...]
    mode: str
    r2: list[list[float | None]]
    fits: dict = field(default_factory=dict)

    def cells(self):
        for i, s in enumerate(self.t_values):
            for j in range(i, len(self.t_values)):
                yield s, self.t_values[j], self.r2[i][j]


def r2_grid(
    t_values: Sequence[float] = DEFAULT_T_VALUES, mode: str = "normalized", grid: RankGrid | None = None, **fit_kwargs
) -> R2Grid:
    """Upper-triangular matrix of fit R² over exponent pairs ``s <= t``; the lower triangle is None."""
    ts = tuple(float(t) for t in t_values)
    if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise DomainError("t values must be positive and strictly ascending")
    k = len(ts)
    mat: list[list[float | None]] = [[None] * k for _ in range(k)]
    fits = {}
    for i in range(k):
        for j in range(i, k):
            fit = fit_joint_zm(JointLawSpec(ts[i], ts[j]), mode, grid, **fit_kwargs)
            mat[i][j] = fit.r2
            fits[(ts[i], ts[j])] = fit
    return R2Grid(ts, mode, mat, fits)
