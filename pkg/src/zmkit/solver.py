"""Box-constrained nonlinear least squares by a trust-region method.

Each iteration solves the scaled trust-region subproblem exactly (via an SVD
of the Jacobian restricted to the free variables) and projects the step onto
the box.  Variables sitting on a bound with the gradient pushing outward are
held fixed for that iteration, which is what lets the method settle on a face
of the box instead of zig-zagging against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass
class LSQResult:
    x: Array
    sse: float
    converged: bool
    iterations: int
    message: str
    active: Array = field(default_factory=lambda: np.zeros(0, dtype=bool))
    grad_cosine: float = np.nan


def _subproblem(Js: Array, r: Array, delta: float) -> Array:
    """Minimize ||Js p + r|| subject to ||p|| <= delta (Moré-Sorensen on an SVD)."""
    U, sv, Vt = np.linalg.svd(Js, full_matrices=False)
    uf = U.T @ r
    tiny = sv.max(initial=0.0) * 1e-15 * max(Js.shape)
    keep = sv > tiny
    # Gauss-Newton step if it fits
    p_gn = -Vt[keep].T @ (uf[keep] / sv[keep])
    if np.linalg.norm(p_gn) <= delta and keep.all():
        return p_gn

    def phi(lam):
        denom = sv**2 + lam
        p = -Vt.T @ (sv * uf / denom)
        return np.linalg.norm(p), p, denom

    lam_lo = 0.0
    lam_hi = np.linalg.norm(sv * uf) / delta
    lam = max(1e-3 * lam_hi, np.sqrt(lam_lo * lam_hi))
    for _ in range(60):
        if not lam_lo < lam < lam_hi:
            lam = max(1e-3 * lam_hi, np.sqrt(lam_lo * lam_hi))
        norm_p, p, denom = phi(lam)
        f = norm_p - delta
        if abs(f) < 1e-3 * delta:
            break
        if f > 0:
            lam_lo = lam
        else:
            lam_hi = lam
        # Newton step on 1/||p|| - 1/delta, which is nearly linear in lam
        dnorm = -np.sum(sv**2 * uf**2 / denom**3) / norm_p
        lam = lam - (norm_p - delta) / delta * norm_p / dnorm
    return p


def bounded_least_squares(
    fun: Callable[[Array], Array],
    jac: Callable[[Array], Array],
    x0,
    lower,
    upper,
    *,
    xtol: float = 1e-10,
    gtol: float = 1e-10,
    max_iter: int = 5000,
) -> LSQResult:
    """Minimize ``sum(fun(x)**2)`` over the box ``lower <= x <= upper``.

    Converges when the scaled step falls below ``xtol`` relative to the
    scaled parameter vector, or when the cosine between the residual and every
    free Jacobian column is below ``gtol``.  Iterates never leave the box.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    x = np.clip(np.asarray(x0, float), lower, upper)
    n = x.size

    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("residuals are not finite at the starting point")
    sse = float(r @ r)
    J = jac(x)
    d = np.linalg.norm(J, axis=0)
    d[d == 0] = 1.0
    delta = 100.0 * np.linalg.norm(d * x) or 100.0

    def active_set(x, g):
        span = np.maximum(1.0, np.abs(x))
        at_lo = (x - lower <= 1e-14 * span) & (g > 0)
        at_hi = (upper - x <= 1e-14 * span) & (g < 0)
        return at_lo | at_hi

    def grad_cosine(J, r, free):
        rn = np.linalg.norm(r)
        if rn == 0.0 or not free.any():
            return 0.0
        cn = np.linalg.norm(J[:, free], axis=0)
        cn[cn == 0] = 1.0
        return float(np.max(np.abs(J[:, free].T @ r) / (cn * rn)))

    it = 0
    message = "maximum iterations reached"
    converged = False
    while it < max_iter:
        g = J.T @ r
        act = active_set(x, g)
        free = ~act
        cos = grad_cosine(J, r, free)
        if cos <= gtol:
            converged, message = True, "projected gradient below tolerance"
            break
        if sse == 0.0:
            converged, message = True, "exact fit"
            break
        it += 1

        d = np.maximum(d, np.linalg.norm(J, axis=0))
        span = np.maximum(1.0, np.abs(x))
        at_lo = x - lower <= 1e-14 * span
        at_hi = upper - x <= 1e-14 * span
        while True:
            p = np.zeros(n)
            p[free] = _subproblem(J[:, free] / d[free], r, delta) / d[free]
            # a free variable on a bound whose step leaves the box is fixed and the step re-solved
            blocked = free & ((at_lo & (p < 0)) | (at_hi & (p > 0)))
            if not blocked.any():
                break
            free = free & ~blocked
            if not free.any():
                p = np.zeros(n)
                break
        x_new = np.clip(x + p, lower, upper)
        step = x_new - x
        step_norm = np.linalg.norm(d * step)
        xnorm = np.linalg.norm(d * x)

        r_lin = r + J @ step
        predicted = sse - float(r_lin @ r_lin)
        with np.errstate(all="ignore"):
            r_new = fun(x_new)
        ok = np.all(np.isfinite(r_new))
        sse_new = float(r_new @ r_new) if ok else np.inf
        actual = sse - sse_new
        rho = actual / predicted if predicted > 0 else -1.0

        if rho < 0.25:
            delta = 0.25 * max(step_norm, 1e-300) if step_norm > 0 else 0.25 * delta
        elif rho > 0.75 and step_norm >= 0.95 * delta:
            delta = 2.0 * delta

        if rho > 1e-4 and ok:
            x, r, sse = x_new, r_new, sse_new
            J = jac(x)
            if step_norm <= xtol * (xtol + xnorm):
                converged, message = True, "step below tolerance"
                break
        elif delta <= xtol * (xtol + xnorm) or not free.any():
            converged, message = True, "trust region collapsed below step tolerance"
            break

    g = J.T @ r
    act = active_set(x, g)
    span = np.maximum(1.0, np.abs(x))
    on_bound = (x - lower <= 1e-9 * span) | (upper - x <= 1e-9 * span)
    return LSQResult(
        x=x,
        sse=sse,
        converged=converged,
        iterations=it,
        message=message,
        active=on_bound | act,
        grad_cosine=grad_cosine(J, r, ~act),
    )
