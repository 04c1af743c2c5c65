"""Tiny dependency-free SVG line and bar charts with deterministic output."""

from __future__ import annotations

import math
from html import escape

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]


def _axes(y_lo: float, y_hi: float, y_of) -> list[str]:
    parts = [
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
    ]
    for k in range(5):
        v = y_lo + (y_hi - y_lo) * k / 4
        y = y_of(v)
        parts.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="10">{_tick(v)}</text>')
    return parts


def line_chart(series: dict[str, tuple[list[float], list[float]]], title: str, xlabel: str, ylabel: str) -> str:
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if pts:
        x_lo, x_hi = min(p[0] for p in pts), max(p[0] for p in pts)
        y_lo, y_hi = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x_lo = x_hi = y_lo = y_hi = 0.0
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1

    def x_of(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    def y_of(y):
        return HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)

    parts = _frame(title, xlabel, ylabel) + _axes(y_lo, y_hi, y_of)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(x_of(x))},{_fmt(y_of(y))}" for x, y in zip(xs, ys) if math.isfinite(y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = MARGIN_T + 16 * i
        parts.append(f'<line x1="{WIDTH - MARGIN_R + 10}" y1="{ly}" x2="{WIDTH - MARGIN_R + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R + 35}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(values: dict[str, float], title: str, ylabel: str) -> str:
    y_hi = max([v for v in values.values() if math.isfinite(v)] + [0.0]) or 1.0

    def y_of(y):
        return HEIGHT - MARGIN_B - y / y_hi * (HEIGHT - MARGIN_T - MARGIN_B)

    parts = _frame(title, "", ylabel) + _axes(0.0, y_hi, y_of)
    n = max(len(values), 1)
    slot = (WIDTH - MARGIN_L - MARGIN_R) / n
    for i, (name, v) in enumerate(values.items()):
        x = MARGIN_L + slot * i + slot * 0.15
        top = y_of(v if math.isfinite(v) else 0.0)
        parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(top)}" width="{_fmt(slot * 0.7)}" height="{_fmt(HEIGHT - MARGIN_B - top)}" fill="{PALETTE[i % len(PALETTE)]}"/>')
        parts.append(f'<text x="{_fmt(x + slot * 0.35)}" y="{_fmt(top - 4)}" text-anchor="middle" font-family="sans-serif" font-size="10">{_tick(v)}</text>')
        parts.append(f'<text x="{_fmt(x + slot * 0.35)}" y="{HEIGHT - MARGIN_B + 14}" text-anchor="middle" font-family="sans-serif" font-size="10">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
