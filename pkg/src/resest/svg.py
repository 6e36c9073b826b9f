"""Minimal static SVG line charts, one stacked panel per series group."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"]

WIDTH = 720
PANEL_H = 200
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 150, 28, 30


def _n(x: float) -> str:
    return f"{x:.2f}"


def _panel(title, series, top):
    """series: list of (label, x, y, dashed)."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = PANEL_H - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + MARGIN_T + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<text x="{MARGIN_L}" y="{_n(top + 18)}" font-size="13">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{_n(top + MARGIN_T)}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
        f'<text x="{MARGIN_L - 6}" y="{_n(top + MARGIN_T + 10)}" font-size="10" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{MARGIN_L - 6}" y="{_n(top + MARGIN_T + ph)}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{MARGIN_L}" y="{_n(top + PANEL_H - 12)}" font-size="10">{x0:.3g}</text>',
        f'<text x="{MARGIN_L + pw}" y="{_n(top + PANEL_H - 12)}" font-size="10" text-anchor="end">{x1:.3g}</text>',
    ]
    if y0 < 0 < y1:
        out.append(
            f'<line x1="{MARGIN_L}" y1="{_n(sy(0))}" x2="{MARGIN_L + pw}" y2="{_n(sy(0))}" '
            'stroke="#bbb" stroke-width="0.5"/>'
        )
    for k, (label, x, y, dashed) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(
            f"{_n(sx(a))},{_n(sy(b))}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)) if np.isfinite(b)
        )
        dash = ' stroke-dasharray="5,3"' if dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.3"{dash}/>')
        ly = top + MARGIN_T + 12 + 16 * k
        out.append(
            f'<line x1="{WIDTH - MARGIN_R + 10}" y1="{_n(ly - 4)}" x2="{WIDTH - MARGIN_R + 30}" '
            f'y2="{_n(ly - 4)}" stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(f'<text x="{WIDTH - MARGIN_R + 35}" y="{_n(ly)}" font-size="11">{escape(label)}</text>')
    return out


def line_chart(panels, title: str = "") -> str:
    """panels: list of (panel_title, [(label, x, y, dashed), ...])."""
    height = PANEL_H * len(panels) + (24 if title else 0)
    body = []
    off = 0
    if title:
        body.append(f'<text x="{WIDTH / 2}" y="18" font-size="15" text-anchor="middle">{escape(title)}</text>')
        off = 24
    for k, (ptitle, series) in enumerate(panels):
        body.extend(_panel(ptitle, series, off + k * PANEL_H))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def write_line_chart(path, panels, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(line_chart(panels, title))
