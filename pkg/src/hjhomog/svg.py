"""Minimal SVG 1.1 line plots (polylines with a frame and axis labels)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH = 640
HEIGHT = 400
MARGIN = 50
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", loglog: bool = False) -> str:
    """``series`` maps a label to ``(x, y)`` arrays; returns an SVG document."""
    prepared = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if loglog:
            keep = (x > 0) & (y > 0)
            x, y = np.log10(x[keep]), np.log10(y[keep])
        prepared[label] = (x, y)
    xs = np.concatenate([v[0] for v in prepared.values()])
    ys = np.concatenate([v[1] for v in prepared.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2}" transform="rotate(-90 15 {HEIGHT / 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x0:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{MARGIN - 5}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{MARGIN - 5}" y="{MARGIN + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    for k, (label, (x, y)) in enumerate(prepared.items()):
        colour = COLOURS[k % len(COLOURS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 5}" y="{MARGIN + 15 * (k + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
