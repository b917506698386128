"""Minimal self-contained SVG log-log line plots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple
    dashed: bool = False


def _decade_range(values):
    lo = math.floor(math.log10(min(values)))
    hi = math.ceil(math.log10(max(values)))
    if hi == lo:
        hi += 1
    return lo, hi


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def loglog_svg(series, title: str, xlabel: str, ylabel: str) -> str:
    """Log-log plot of positive data; axes snap outward to whole decades."""
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y]
    if not xs or min(xs) <= 0 or min(ys) <= 0:
        raise ValueError("log-log plots need positive data")
    xlo, xhi = _decade_range(xs)
    ylo, yhi = _decade_range(ys)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + pw * (math.log10(x) - xlo) / (xhi - xlo)

    def py(y):
        return MARGIN["top"] + ph * (1 - (math.log10(y) - ylo) / (yhi - ylo))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">'
        f"{escape(title)}</text>",
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for e in range(xlo, xhi + 1):
        x = _fmt(px(10.0**e))
        out.append(f'<line x1="{x}" y1="{MARGIN["top"]}" x2="{x}" y2="{MARGIN["top"] + ph}" stroke="#dddddd"/>')
        out.append(
            f'<text x="{x}" y="{MARGIN["top"] + ph + 20}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12">1e{e}</text>'
        )
    for e in range(ylo, yhi + 1):
        y = _fmt(py(10.0**e))
        out.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{MARGIN["left"] + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(
            f'<text x="{MARGIN["left"] - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="12">1e{e}</text>'
        )
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 16}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" '
        f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>'
    )
    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.x, s.y))
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        if not s.dashed:
            for x, y in zip(s.x, s.y):
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3.5" fill="{color}"/>')
        ly = MARGIN["top"] + 18 + 18 * i
        lx = MARGIN["left"] + pw - 190
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(
            f'<text x="{lx + 30}" y="{ly}" dominant-baseline="middle" font-family="sans-serif" font-size="12">'
            f"{escape(s.label)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
