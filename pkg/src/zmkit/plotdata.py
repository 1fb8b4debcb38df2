"""Plot-ready CSV and a minimal log-log SVG for a fitted rank-frequency curve."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .fileio import atomic_write_text, format_number
from .piecewise import PiecewiseFit, evaluate_piecewise
from .zmfit import ZMFit, slope_band, zm_value

WIDTH, HEIGHT, PAD = 480, 360, 40


def fitted_values(fit, ranks) -> np.ndarray:
    if isinstance(fit, ZMFit):
        return np.asarray(zm_value(fit.params, ranks), dtype=float)
    if isinstance(fit, PiecewiseFit):
        return np.asarray(evaluate_piecewise(fit, ranks), dtype=float)
    raise TypeError(f"cannot evaluate a {type(fit).__name__}")


def _band(fit):
    if isinstance(fit, ZMFit):
        band = slope_band(fit.params)
        if not band.empty:
            return band.bar_min, band.bar_max
    return None


def plotdata_csv(ranks, observed, fit) -> str:
    """Columns rank, observed, fitted, plus band_lo/band_hi (the in-band rank interval) when the band exists."""
    ranks = np.asarray(ranks, dtype=float)
    fitted = fitted_values(fit, ranks)
    band = _band(fit)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "observed", "fitted"] + (["band_lo", "band_hi"] if band else []))
    for r, o, f in zip(ranks, observed, fitted):
        row = [format_number(r), format_number(o), format_number(f)]
        if band:
            row += [format_number(band[0]), format_number(band[1])]
        w.writerow(row)
    return buf.getvalue()


def plotdata_svg(ranks, observed, fit) -> str:
    """Log-log scatter of the data (one circle per rank) under the fitted curve, with the slope band shaded."""
    ranks = np.asarray(ranks, dtype=float)
    obs = np.asarray(observed, dtype=float)
    fitted = fitted_values(fit, ranks)
    lx = np.log10(ranks)
    ys = np.log10(np.concatenate([obs, fitted]))
    x0, x1 = float(lx.min()), float(lx.max()) or 1.0
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(v):
        return PAD + (v - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def py(v):
        return HEIGHT - PAD - (v - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    def f(v):
        return f"{v:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" fill="none" stroke="#888"/>',
    ]
    band = _band(fit)
    if band:
        lo = max(x0, math.log10(band[0])) if band[0] > 0 else x0
        hi = min(x1, math.log10(band[1])) if math.isfinite(band[1]) and band[1] > 0 else x1
        if hi > lo:
            out.append(
                f'<rect class="band" x="{f(px(lo))}" y="{PAD}" width="{f(px(hi) - px(lo))}" '
                f'height="{HEIGHT - 2 * PAD}" fill="#cde" opacity="0.5"/>'
            )
    pts = " ".join(f"{f(px(a))},{f(py(b))}" for a, b in zip(lx, np.log10(fitted)))
    out.append(f'<polyline class="fit" points="{pts}" fill="none" stroke="#c33"/>')
    for a, b in zip(lx, np.log10(obs)):
        out.append(f'<circle class="obs" cx="{f(px(a))}" cy="{f(py(b))}" r="2" fill="#236"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plotdata(ranks, observed, fit, path, svg_path=None) -> None:
    """Write the plot CSV to ``path`` and, if asked, the SVG to ``svg_path``."""
    atomic_write_text(path, plotdata_csv(ranks, observed, fit))
    if svg_path is not None:
        atomic_write_text(svg_path, plotdata_svg(ranks, observed, fit))
