"""Standalone SVG line chart of mean best fitness per arm with stderr bands."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from devann.errors import ContractError
from devann.harness import CurveSummary

WIDTH, HEIGHT = 720, 460
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 30, 55
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = step * int(lo // step)
    ticks, t = [], start
    while t <= hi + 1e-9:
        if t >= lo - 1e-9:
            ticks.append(round(t, 6))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(summaries: Sequence[CurveSummary], title: str = "Mean best fitness") -> str:
    if not summaries:
        raise ContractError("render_plot needs at least one summary")
    arms: list[str] = []
    for s in summaries:
        if s.arm not in arms:
            arms.append(s.arm)
    g_lo = min(s.generation for s in summaries)
    g_hi = max(s.generation for s in summaries)
    y_lo = min(s.mean - s.stderr for s in summaries)
    y_hi = max(s.mean + s.stderr for s in summaries)
    ticks = _nice_ticks(y_lo, y_hi)
    y_lo, y_hi = min(y_lo, ticks[0]), max(y_hi, ticks[-1])
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(gen: float) -> float:
        if g_hi == g_lo:
            return MARGIN_LEFT + plot_w / 2
        return MARGIN_LEFT + (gen - g_lo) / (g_hi - g_lo) * plot_w

    def py(val: float) -> float:
        return MARGIN_TOP + (1 - (val - y_lo) / (y_hi - y_lo)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN_RIGHT / 2:.2f}" y="18" text-anchor="middle" '
        f'font-size="14">{escape(title)}</text>',
    ]
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    out.append(f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for t in ticks:
        y = py(t)
        out.append(f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 7}" y="{_fmt(y + 4)}" text-anchor="end">{t:g}</text>')
    for t in _nice_ticks(g_lo, g_hi):
        if g_lo <= t <= g_hi:
            x = px(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle">{t:g}</text>')
    out.append(f'<text x="{x0 + plot_w / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">Generation</text>')
    out.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.2f})">Mean best fitness</text>')

    for k, arm in enumerate(arms):
        colour = PALETTE[k % len(PALETTE)]
        pts = sorted((s for s in summaries if s.arm == arm), key=lambda s: s.generation)
        upper = [f"{_fmt(px(s.generation))},{_fmt(py(s.mean + s.stderr))}" for s in pts]
        lower = [f"{_fmt(px(s.generation))},{_fmt(py(s.mean - s.stderr))}" for s in reversed(pts)]
        out.append(f'<polygon class="band" data-arm="{escape(arm)}" points="{" ".join(upper + lower)}" '
                   f'fill="{colour}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_fmt(px(s.generation))},{_fmt(py(s.mean))}" for s in pts)
        out.append(f'<polyline class="curve" data-arm="{escape(arm)}" points="{line}" '
                   f'fill="none" stroke="{colour}" stroke-width="2"/>')
        if len(pts) == 1:
            out.append(f'<circle cx="{_fmt(px(pts[0].generation))}" cy="{_fmt(py(pts[0].mean))}" '
                       f'r="3" fill="{colour}"/>')
        ly = MARGIN_TOP + 10 + 20 * k
        lx = WIDTH - MARGIN_RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 26}" y="{ly + 4}">{escape(arm)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plot(summaries: Sequence[CurveSummary], output_path) -> Path:
    path = Path(output_path)
    path.write_text(render_svg(summaries))
    return path
