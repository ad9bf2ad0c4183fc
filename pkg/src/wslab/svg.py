"""Minimal deterministic SVG line plots with the plotted data embedded as a comment."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H, PAD = 640, 400, 56


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def line_plot(path, series: Sequence[tuple], title: str = "", xlabel: str = "",
              ylabel: str = "", markers: bool = False) -> None:
    """Write ``series`` = [(label, x, y), ...] as an SVG line plot.

    The file is a pure function of its inputs; each series is repeated as a
    ``x,y`` table inside an XML comment.
    """
    xs = [np.asarray(x, float) for _, x, _ in series]
    ys = [np.asarray(y, float) for _, _, y in series]
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    finite = np.isfinite(ally)
    x0, x1 = float(np.min(allx)), float(np.max(allx))
    y0, y1 = (float(np.min(ally[finite])), float(np.max(ally[finite]))) if finite.any() else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def py(y):
        return H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>']
    for (label, _, _), x, y in zip(series, xs, ys):
        rows = "\n".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, y))
        out.append(f"<!-- data: {label.replace('--', '-')}\nx,y\n{rows}\n-->")
    out.append(f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
               'fill="none" stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.2f}" y="{H - PAD + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{PAD - 4}" y="{py(yv) + 4:.2f}" text-anchor="end">{_fmt(yv)}</text>')
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if markers or len(x) == 1:
            out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>'
                       for a, b in zip(x[ok], y[ok]))
        if len(x) > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{W - PAD - 4}" y="{PAD + 16 + 14 * i}" text-anchor="end" '
                   f'fill="{color}">{_escape(label)}</text>')
    out.append(f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{_escape(title)}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{_escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{H / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {H / 2})">{_escape(ylabel)}</text>')
    out.append("</svg>\n")
    Path(path).write_text("\n".join(out))


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
