"""Standalone SVG line and box charts (no rendering library)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
W, H = 720, 400
ML, MR, MT, MB = 60, 150, 40, 70


def _scale(lo, hi):
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = (hi - lo) * 0.05
    lo, hi = lo - pad, hi + pad

    def y(v):
        return MT + (H - MT - MB) * (1 - (v - lo) / (hi - lo))
    return y, lo, hi


def _frame(title, ylab, lo, hi, yfun):
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
           f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
           f'<text x="15" y="{H / 2:.1f}" transform="rotate(-90 15 {H / 2:.1f})" text-anchor="middle">{escape(ylab)}</text>']
    for v in np.linspace(lo, hi, 6):
        yy = yfun(v)
        out.append(f'<line x1="{ML - 4}" y1="{yy:.1f}" x2="{ML}" y2="{yy:.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{yy + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    return out


def line_chart(series, categories, title, ylab="value", zero_line=False):
    """``series``: name → list of values aligned with ``categories`` (None = gap)."""
    vals = [v for s in series.values() for v in s if v is not None]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    if zero_line:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    yfun, lo, hi = _scale(lo, hi)
    out = _frame(title, ylab, lo, hi, yfun)
    n = max(len(categories), 1)
    step = (W - ML - MR) / n
    xs = [ML + step * (i + 0.5) for i in range(len(categories))]
    for x, cat in zip(xs, categories):
        out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="end" '
                   f'transform="rotate(-30 {x:.1f} {H - MB + 16})">{escape(str(cat))}</text>')
    if zero_line:
        y0 = yfun(0.0)
        out.append(f'<line x1="{ML}" y1="{y0:.1f}" x2="{W - MR}" y2="{y0:.1f}" stroke="#444" stroke-dasharray="4 3"/>')
    for k, (name, values) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = [(x, yfun(v)) for x, v in zip(xs, values) if v is not None]
        if len(pts) > 1:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>')
        ly = MT + 16 * k
        out.append(f'<rect x="{W - MR + 10}" y="{ly}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{W - MR + 25}" y="{ly + 9}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def box_chart(groups, title, ylab="value"):
    """``groups``: name → list of values; one box (quartiles, min/max whiskers) each."""
    vals = [v for g in groups.values() for v in g]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    yfun, lo, hi = _scale(lo, hi)
    out = _frame(title, ylab, lo, hi, yfun)
    n = max(len(groups), 1)
    step = (W - ML - MR) / n
    for i, (name, g) in enumerate(groups.items()):
        x = ML + step * (i + 0.5)
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="end" '
                   f'transform="rotate(-30 {x:.1f} {H - MB + 16})">{escape(str(name))}</text>')
        if not g:
            continue
        q0, q1, q2, q3, q4 = np.percentile(np.asarray(g, dtype=float), [0, 25, 50, 75, 100])
        half = min(step * 0.3, 25)
        out.append(f'<line x1="{x:.1f}" y1="{yfun(q0):.1f}" x2="{x:.1f}" y2="{yfun(q4):.1f}" stroke="black"/>')
        out.append(f'<rect x="{x - half:.1f}" y="{yfun(q3):.1f}" width="{2 * half:.1f}" '
                   f'height="{max(yfun(q1) - yfun(q3), 0.5):.1f}" fill="{color}" fill-opacity="0.6" stroke="black"/>')
        out.append(f'<line x1="{x - half:.1f}" y1="{yfun(q2):.1f}" x2="{x + half:.1f}" y2="{yfun(q2):.1f}" '
                   f'stroke="black" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
