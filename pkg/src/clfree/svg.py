"""Hand-written SVG charts for trajectory reports and scaling tables.

Output is a pure function of the input numbers, so re-running a command
reproduces the file byte for byte.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError


class EmptyReportError(DomainError):
    pass


@dataclass
class _Series:
    x: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    xlabel: str = "t"
    ylabel: str = ""
    title: str = ""
    fit: tuple | None = None      # (slope, intercept) in the plotted coordinates


def _from_report(report) -> _Series:
    band = np.asarray(report.band, dtype=float)
    pred = np.asarray(report.predicted, dtype=float)
    lo = hi = None
    if np.any(band > 0):
        lo, hi = pred - band, pred + band
    return _Series(np.asarray(report.t, float), np.asarray(report.measured, float), pred, lo, hi,
                   "t", report.quantity, report.quantity)


def _from_scaling(table: dict, which: str) -> _Series:
    n = np.asarray(table["n"], dtype=float)
    y = np.asarray(table[which], dtype=float)
    fit = table.get("fits", {}).get(which)
    xs, ys = np.log(n), np.log(y)
    line = None
    if fit is not None:
        line = (fit["slope"], fit["intercept"])
    return _Series(xs, ys, xlabel="ln n", ylabel=f"ln {which} (normalised)", title=f"scaling: {which}", fit=line)


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        out.append(round(v, 12))
        v += step
    return out


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e5 or abs(v) < 1e-3):
        return f"{v:.2e}"
    return f"{v:g}"


def _render(s: _Series, width: int, height: int) -> str:
    if s.x.size == 0:
        raise EmptyReportError("nothing to plot")
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    ys = [s.measured]
    for extra in (s.predicted, s.lo, s.hi):
        if extra is not None:
            ys.append(extra)
    yall = np.concatenate([y[np.isfinite(y)] for y in ys])
    x0, x1 = float(np.min(s.x)), float(np.max(s.x))
    y0, y1 = (float(yall.min()), float(yall.max())) if yall.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if s.title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(s.title)}</text>')
    # axes and ticks
    out.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>')
    out.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>')
    for v in _ticks(x0, x1):
        px = X(v)
        out.append(f'<line x1="{_num(px)}" y1="{mt + ph}" x2="{_num(px)}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_num(px)}" y="{mt + ph + 16}" text-anchor="middle">{_label(v)}</text>')
    for v in _ticks(y0, y1):
        py = Y(v)
        out.append(f'<line x1="{ml - 4}" y1="{_num(py)}" x2="{ml}" y2="{_num(py)}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{_num(py + 4)}" text-anchor="end">{_label(v)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{_esc(s.xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{_esc(s.ylabel)}</text>')
    # predicted band
    if s.lo is not None and s.hi is not None:
        ok = np.isfinite(s.lo) & np.isfinite(s.hi)
        if ok.any():
            top = [f"{_num(X(a))},{_num(Y(b))}" for a, b in zip(s.x[ok], s.hi[ok])]
            bot = [f"{_num(X(a))},{_num(Y(b))}" for a, b in zip(s.x[ok][::-1], s.lo[ok][::-1])]
            out.append(f'<polygon class="band" points="{" ".join(top + bot)}" fill="#9ecae1" '
                       f'fill-opacity="0.5" stroke="none"/>')
    if s.predicted is not None:
        ok = np.isfinite(s.predicted)
        pts = " ".join(f"{_num(X(a))},{_num(Y(b))}" for a, b in zip(s.x[ok], s.predicted[ok]))
        out.append(f'<polyline class="predicted" points="{pts}" fill="none" stroke="#08519c" stroke-width="1.5"/>')
    if s.fit is not None:
        a, b = s.fit
        out.append(f'<line class="fit" x1="{_num(X(x0))}" y1="{_num(Y(a * x0 + b))}" x2="{_num(X(x1))}" '
                   f'y2="{_num(Y(a * x1 + b))}" stroke="#08519c" stroke-dasharray="4 3"/>')
    ok = np.isfinite(s.measured)
    mx, my = s.x[ok], s.measured[ok]
    if mx.size > 1 and s.predicted is not None:
        pts = " ".join(f"{_num(X(a))},{_num(Y(b))}" for a, b in zip(mx, my))
        out.append(f'<polyline class="measured" points="{pts}" fill="none" stroke="#d94801" stroke-width="1"/>')
    else:
        for a, b in zip(mx, my):
            out.append(f'<circle class="marker" cx="{_num(X(a))}" cy="{_num(Y(b))}" r="3" fill="#d94801"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_svg(report, path=None, which: str = "edges", width: int = 640, height: int = 400,
             max_points: int = 2000) -> str:
    """Render a TrajectoryReport or a scaling table as SVG text; write it if ``path`` is given.

    A scaling table is a dict with keys ``n``, the plotted column ``which``
    and optionally ``fits``. Long reports are thinned to ``max_points``
    evenly spaced rows.
    """
    if isinstance(report, dict):
        if not report.get("n"):
            raise EmptyReportError("scaling table has no rows")
        s = _from_scaling(report, which)
    else:
        if len(report) == 0:
            raise EmptyReportError("trajectory report has no rows")
        s = _from_report(report)
    if s.x.size > max_points:
        keep = np.unique(np.linspace(0, s.x.size - 1, max_points).round().astype(int))
        s = _Series(s.x[keep], s.measured[keep], *(None if a is None else a[keep] for a in (s.predicted, s.lo, s.hi)),
                    s.xlabel, s.ylabel, s.title, s.fit)
    text = _render(s, width, height)
    if path is not None:
        Path(path).write_text(text)
    return text
