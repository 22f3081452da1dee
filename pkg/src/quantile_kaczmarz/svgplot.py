"""Minimal deterministic SVG line charts (no plotting dependency).

Fixed 800x600 viewport, one polyline per series, optional log y-axis.
Identical input produces identical bytes.
"""
from __future__ import annotations

import math
from pathlib import Path

from .errors import DomainError

WIDTH, HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 30, 40, 60

PALETTE = ("#1f6f8b", "#d1495b", "#66a182", "#edae49", "#55505c", "#8d6a9f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def emit_svg(
    series,
    log_y: bool,
    path,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> Path:
    """Write a standalone SVG line chart.

    ``series`` is a list of ``(label, xs, ys)`` triples.  With ``log_y`` every
    y value must be strictly positive.
    """
    series = [(str(label), list(map(float, xs)), list(map(float, ys))) for label, xs, ys in series]
    if not series:
        raise DomainError("at least one series is required")
    for label, xs, ys in series:
        if len(xs) != len(ys) or not xs:
            raise DomainError(f"series {label!r} must have matching nonempty x and y")
        if log_y and min(ys) <= 0.0:
            raise DomainError(f"series {label!r} has nonpositive values on a log axis")

    def ty(v: float) -> float:
        return math.log10(v) if log_y else v

    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [ty(y) for _, _, ys in series for y in ys]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (y_hi - ty(y)) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="monospace" font-size="16">{title}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{WIDTH // 2}" y="{HEIGHT - 16}" text-anchor="middle" '
            f'font-family="monospace" font-size="13">{x_label}</text>'
        )
    if y_label:
        out.append(
            f'<text x="18" y="{HEIGHT // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="13" '
            f'transform="rotate(-90 18 {HEIGHT // 2})">{y_label}</text>'
        )

    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{MARGIN_TOP + plot_h}" x2="{_fmt(x)}" '
            f'y2="{MARGIN_TOP + plot_h + 5}" stroke="#444444"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{MARGIN_TOP + plot_h + 20}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{tick:.4g}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = MARGIN_TOP + (y_hi - tick) / (y_hi - y_lo) * plot_h
        label = f"1e{tick:.2f}" if log_y else f"{tick:.4g}"
        out.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{_fmt(y)}" x2="{MARGIN_LEFT}" '
            f'y2="{_fmt(y)}" stroke="#444444"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{label}</text>'
        )

    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = MARGIN_TOP + 16 + 16 * idx
        lx = WIDTH - MARGIN_RIGHT - 150
        out.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="monospace" '
            f'font-size="12">{label}</text>'
        )

    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
