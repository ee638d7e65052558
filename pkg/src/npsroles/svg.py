"""Minimal self-contained SVG line charts.

Output is a deterministic function of the input numbers, so regenerating
a chart from its CSV yields a byte-identical file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

PANEL_W, PANEL_H = 420, 320
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 48


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    style: str = "line"  # line | dashed | circles | squares
    color: str | None = None


@dataclass
class Panel:
    title: str
    series: list[Series] = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""
    logy: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}".replace("e+0", "e").replace("e-0", "e-")
    return f"{v:g}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _panel_svg(panel: Panel, ox: float, color_of) -> list[str]:
    xs = [x for s in panel.series for x in s.x]
    ys = [y for s in panel.series for y in s.y if not (panel.logy and y <= 0)]
    if not xs or not ys:
        xs, ys = xs or [0.0, 1.0], ys or [1.0, 10.0]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1
    if panel.logy:
        y0 = math.floor(math.log10(min(ys)))
        y1 = math.ceil(math.log10(max(ys)))
        if y1 == y0:
            y1 = y0 + 1
    else:
        y0, y1 = min(0.0, min(ys)), max(ys)
        if y1 == y0:
            y1 = y0 + 1
        y1 += 0.05 * (y1 - y0)
    pw = PANEL_W - MARGIN_L - MARGIN_R
    ph = PANEL_H - MARGIN_T - MARGIN_B

    def px(x):
        return ox + MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        v = math.log10(y) if panel.logy else y
        return MARGIN_T + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<rect x="{_fmt(ox + MARGIN_L)}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{_fmt(ox + PANEL_W / 2)}" y="20" text-anchor="middle" font-size="14">{escape(panel.title)}</text>',
        f'<text x="{_fmt(ox + MARGIN_L + pw / 2)}" y="{PANEL_H - 10}" text-anchor="middle" font-size="12">{escape(panel.xlabel)}</text>',
        f'<text x="{_fmt(ox + 14)}" y="{_fmt(MARGIN_T + ph / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {_fmt(ox + 14)} {_fmt(MARGIN_T + ph / 2)})">{escape(panel.ylabel)}</text>',
    ]
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{MARGIN_T + ph}" x2="{_fmt(px(t))}" y2="{MARGIN_T + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{MARGIN_T + ph + 16}" text-anchor="middle" font-size="10">{_tick_label(t)}</text>')
    yticks = [10.0**e for e in range(int(y0), int(y1) + 1)] if panel.logy else _nice_ticks(y0, y1)
    for t in yticks:
        out.append(f'<line x1="{_fmt(ox + MARGIN_L - 4)}" y1="{_fmt(py(t))}" x2="{_fmt(ox + MARGIN_L)}" y2="{_fmt(py(t))}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(ox + MARGIN_L - 6)}" y="{_fmt(py(t) + 3)}" text-anchor="end" font-size="10">{_tick_label(t)}</text>')

    slot = 0
    for s in panel.series:
        color = s.color or color_of(s.label)
        pts = [(px(x), py(y)) for x, y in zip(s.x, s.y) if not (panel.logy and y <= 0)]
        if s.style in ("line", "dashed") and len(pts) > 1:
            dash = ' stroke-dasharray="6 4"' if s.style == "dashed" else ""
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        elif s.style == "circles":
            out.extend(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="none" stroke="{color}"/>' for a, b in pts)
        elif s.style == "squares":
            out.extend(
                f'<rect x="{_fmt(a - 3)}" y="{_fmt(b - 3)}" width="6" height="6" fill="none" stroke="{color}"/>' for a, b in pts
            )
        if not s.label:
            continue
        ly = MARGIN_T + 12 + 14 * slot
        lx = ox + MARGIN_L + 8
        slot += 1
        out.append(f'<line x1="{_fmt(lx)}" y1="{ly - 4}" x2="{_fmt(lx + 16)}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_fmt(lx + 20)}" y="{ly}" font-size="10">{escape(s.label)}</text>')
    return out


def render(panels: list[Panel]) -> str:
    """SVG document with the panels laid out side by side."""
    labels: dict[str, str] = {}

    def color_of(label):
        if label not in labels:
            labels[label] = PALETTE[len(labels) % len(PALETTE)]
        return labels[label]

    width = PANEL_W * max(1, len(panels))
    body = []
    for i, panel in enumerate(panels):
        body.extend(_panel_svg(panel, i * PANEL_W, color_of))
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
        f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{PANEL_H}" fill="white"/>', *body, "</svg>"]) + "\n"
