"""Dependency-free SVG figures from trial reports.

Output is fully determined by the report: fixed canvas, fixed palette,
coordinates printed with two decimals.
"""

from __future__ import annotations

import math
from html import escape
from pathlib import Path
from typing import Literal

from .errors import ConfigurationError
from .harness import TrialReport

Kind = Literal["bias_vs_runs", "mse_vs_T", "mse_vs_noise"]

WIDTH, HEIGHT = 720, 460
LEFT, RIGHT, TOP, BOTTOM = 80, 200, 40, 60
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


class _Axis:
    def __init__(self, lo: float, hi: float, log: bool, pixel_lo: float, pixel_hi: float):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        self.lo, self.hi, self.log = lo - pad, hi + pad, log
        self.p0, self.p1 = pixel_lo, pixel_hi

    def __call__(self, v: float) -> float:
        if self.log:
            v = math.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self) -> list[tuple[float, str]]:
        if self.log:
            out = []
            for e in range(math.ceil(self.lo), math.floor(self.hi) + 1):
                out.append((10.0**e, f"1e{e}"))
            return out
        step = 10 ** math.floor(math.log10((self.hi - self.lo) / 4))
        for mult in (1, 2, 5, 10):
            if (self.hi - self.lo) / (step * mult) <= 8:
                step *= mult
                break
        start = math.ceil(self.lo / step) * step
        out, v = [], start
        while v <= self.hi + 1e-12:
            out.append((v, f"{v:g}"))
            v += step
        return out


def _series(report: TrialReport, kind: Kind):
    """``(xlabel, ylabel, xlog, {label: [(x, y)]}, reference or None)``."""
    cells = report.cells
    Ts = sorted({c.T for c in cells})
    s2s = sorted({c.sigma2 for c in cells})
    names = list(dict.fromkeys(c.estimator for c in cells))
    series: dict[str, list[tuple[float, float]]] = {}
    ref = None
    if kind == "mse_vs_T":
        if len(Ts) < 2:
            raise ConfigurationError("mse_vs_T needs a sweep over at least two T values")
        s2 = s2s[0]
        for name in names:
            pts = [(c.m, c.stats.mse) for c in cells
                   if c.estimator == name and c.sigma2 == s2 and c.stats and c.stats.mse > 0]
            series[name] = sorted(pts)
        crlb = {c.m: c.crlb for c in cells if c.sigma2 == s2 and c.crlb}
        ref = sorted(crlb.items())
        return "number of measurements m", "MSE", True, series, ref
    if kind == "mse_vs_noise":
        if len(s2s) < 2:
            raise ConfigurationError("mse_vs_noise needs a sweep over at least two variances")
        T = Ts[0]
        for name in names:
            pts = [(10 * math.log10(1 / c.sigma2), c.stats.mse) for c in cells
                   if c.estimator == name and c.T == T and c.sigma2 > 0 and c.stats and c.stats.mse > 0]
            series[name] = sorted(pts)
        crlb = {c.sigma2: c.crlb for c in cells if c.T == T and c.crlb and c.sigma2 > 0}
        ref = sorted((10 * math.log10(1 / s), v) for s, v in crlb.items())
        return "10 log10(1/sigma^2)", "MSE", False, series, ref
    if kind == "bias_vs_runs":
        traced = [c for c in cells if c.bias_trace]
        if not traced:
            raise ConfigurationError("bias_vs_runs needs a report produced with bias_trace enabled")
        T, s2 = traced[0].T, traced[0].sigma2
        for c in traced:
            if c.T != T or c.sigma2 != s2:
                continue
            for k in range(len(c.bias_trace[0][1])):
                pts = [(n, b[k]) for n, b in c.bias_trace if b[k] > 0]
                series[f"{c.estimator} [x]{k + 1}"] = pts
        return "Monte-Carlo runs", "|average deviation|", True, series, None
    raise ConfigurationError(f"unknown plot kind {kind!r}")


def render_svg(report: TrialReport, kind: Kind) -> str:
    xlabel, ylabel, xlog, series, ref = _series(report, kind)
    pts = [p for s in series.values() for p in s] + list(ref or [])
    if not pts:
        raise ConfigurationError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    ax = _Axis(min(xs), max(xs), xlog, LEFT, WIDTH - RIGHT)
    ay = _Axis(min(ys), max(ys), True, HEIGHT - BOTTOM, TOP)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g stroke="#000" fill="none"><rect x="{LEFT}" y="{TOP}" '
        f'width="{WIDTH - LEFT - RIGHT}" height="{HEIGHT - TOP - BOTTOM}"/></g>',
    ]
    for v, label in ax.ticks():
        x = ax(v)
        out.append(f'<line x1="{x:.2f}" y1="{HEIGHT - BOTTOM}" x2="{x:.2f}" '
                   f'y2="{HEIGHT - BOTTOM + 5}" stroke="#000"/>')
        out.append(f'<text x="{x:.2f}" y="{HEIGHT - BOTTOM + 18}" text-anchor="middle">{label}</text>')
    for v, label in ay.ticks():
        y = ay(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{(LEFT + WIDTH - RIGHT) / 2:.2f}" y="{HEIGHT - 15}" '
               f'text-anchor="middle" class="xlabel">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{(TOP + HEIGHT - BOTTOM) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {(TOP + HEIGHT - BOTTOM) / 2:.2f})" '
               f'class="ylabel">{escape(ylabel)}</text>')

    legend_y = TOP + 10
    entries = list(series.items())
    if ref:
        entries.append(("CRLB", ref))
    for i, (label, pts) in enumerate(entries):
        if not pts:
            continue
        is_ref = ref is not None and pts is ref
        color = "#000" if is_ref else PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6 4"' if is_ref else ""
        coords = " ".join(f"{ax(x):.2f},{ay(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"{dash} data-label="{escape(label)}"/>')
        ly = legend_y + 16 * i
        lx = WIDTH - RIGHT + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(report: TrialReport, kind: Kind, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(report, kind))
