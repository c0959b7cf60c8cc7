"""Ratio reports, pass/fail checks, CSV output and a small SVG line-plot emitter."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .paths import format_float

__all__ = ["Check", "RatioRow", "Report", "ratio", "svg_plot"]

REPORT_COLUMNS = ("sweep_param", "lhs", "lhs_stderr", "rhs", "ratio")


def ratio(lhs: float, rhs: float) -> float:
    """``lhs / rhs`` with 0/0 mapped to 0 (the empty-integrand sentinel)."""
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class RatioRow:
    sweep_param: str
    lhs: float
    lhs_stderr: float
    rhs: float

    @property
    def ratio(self) -> float:
        return ratio(self.lhs, self.rhs)

    @property
    def relative_stderr(self) -> float:
        return self.lhs_stderr / self.lhs if self.lhs else 0.0


@dataclass
class Report:
    """Rows of (lhs, rhs) estimates plus the checks an experiment asserts.

    ``series`` holds named (x, y) curves for the plot; ``values`` holds
    scalar diagnostics (fitted rates, constants) for the manifest.
    """

    name: str
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    log_x: bool = True
    log_y: bool = True
    samples: int = 0

    def add(self, sweep_param, lhs, lhs_stderr, rhs) -> RatioRow:
        row = RatioRow(str(sweep_param), float(lhs), float(lhs_stderr), float(rhs))
        self.rows.append(row)
        return row

    def check(self, name: str, passed, detail: str = "") -> Check:
        c = Check(name, bool(passed), detail)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.sweep_param, format_float(r.lhs), format_float(r.lhs_stderr), format_float(r.rhs), format_float(r.ratio)])
        return buf.getvalue()

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.checks)

    def to_svg(self) -> str:
        series = self.series or {"ratio": ([i + 1 for i in range(len(self.rows))], list(self.ratios()))}
        return svg_plot(series, title=self.name, log_x=self.log_x, log_y=self.log_y)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(v) for v in range(a, b + 1, step)]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step) + 2)]


def svg_plot(series: dict, title: str = "", log_x=True, log_y=True, width=640, height=420) -> str:
    """Polylines with axes; non-positive values are dropped on log axes."""
    pts = {}
    for name, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if log_x:
            keep &= xs > 0
        if log_y:
            keep &= ys > 0
        xs, ys = xs[keep], ys[keep]
        pts[name] = (np.log10(xs) if log_x else xs, np.log10(ys) if log_y else ys)
    allx = np.concatenate([p[0] for p in pts.values()] or [np.zeros(0)])
    ally = np.concatenate([p[1] for p in pts.values()] or [np.zeros(0)])
    if allx.size == 0:
        allx = ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1, log_x):
        if x0 - 1e-9 <= v <= x1 + 1e-9:
            label = f"1e{int(v)}" if log_x else f"{v:.3g}"
            out.append(f'<line x1="{sx(v):.1f}" y1="{mt + ph}" x2="{sx(v):.1f}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{sx(v):.1f}" y="{mt + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>')
    for v in _ticks(y0, y1, log_y):
        if y0 - 1e-9 <= v <= y1 + 1e-9:
            label = f"1e{int(v)}" if log_y else f"{v:.3g}"
            out.append(f'<line x1="{ml - 5}" y1="{sy(v):.1f}" x2="{ml}" y2="{sy(v):.1f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{sy(v) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>')
    for k, (name, (xs, ys)) in enumerate(pts.items()):
        color = _COLORS[k % len(_COLORS)]
        if xs.size:
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
