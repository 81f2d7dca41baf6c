"""Minimal log-log line plots written as standalone SVG."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def loglog_svg(path, series, references=(), title="", width=640, height=440,
               xlabel="r", ylabel="") -> None:
    """Write a log-log plot.

    ``series`` is a list of ``(label, x, y)``; nonpositive points are dropped.
    ``references`` is a list of ``(label, slope, x0, y0)`` dashed power laws
    through ``(x0, y0)``.
    """
    pad_l, pad_r, pad_t, pad_b = 70, 150, 36, 48
    pts = []
    for label, x, y in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = (x > 0) & (y > 0) & np.isfinite(y)
        pts.append((label, np.log10(x[ok]), np.log10(y[ok])))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[2] for p in pts]) if pts else np.array([0.0, 1.0])
    x0, x1 = math.floor(allx.min()), math.ceil(allx.max())
    y0, y1 = math.floor(ally.min()), math.ceil(ally.max())
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1
    W, H = width - pad_l - pad_r, height - pad_t - pad_b

    def X(lx):
        return pad_l + (lx - x0) / (x1 - x0) * W

    def Y(ly):
        return pad_t + (y1 - ly) / (y1 - y0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{W}" height="{H}" fill="none" stroke="#000"/>']
    xstep = max(1, (x1 - x0) // 8)
    ystep = max(1, (y1 - y0) // 8)
    for k in range(x0, x1 + 1, xstep):
        out.append(f'<line x1="{X(k):.1f}" y1="{pad_t}" x2="{X(k):.1f}" y2="{pad_t + H}" stroke="#ddd"/>')
        out.append(f'<text x="{X(k):.1f}" y="{pad_t + H + 16}" text-anchor="middle">1e{k}</text>')
    for k in range(y0, y1 + 1, ystep):
        out.append(f'<line x1="{pad_l}" y1="{Y(k):.1f}" x2="{pad_l + W}" y2="{Y(k):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{pad_l - 6}" y="{Y(k) + 4:.1f}" text-anchor="end">1e{k}</text>')
    out.append(f'<clipPath id="plot"><rect x="{pad_l}" y="{pad_t}" width="{W}" height="{H}"/></clipPath>')
    legend_y = pad_t + 10
    for i, (label, lx, ly) in enumerate(pts):
        col = PALETTE[i % len(PALETTE)]
        if len(lx):
            d = " ".join(f"{'M' if j == 0 else 'L'}{X(a):.2f},{Y(b):.2f}" for j, (a, b) in enumerate(zip(lx, ly)))
            out.append(f'<path d="{d}" fill="none" stroke="{col}" stroke-width="1.6" clip-path="url(#plot)"/>')
        out.append(f'<line x1="{pad_l + W + 10}" y1="{legend_y}" x2="{pad_l + W + 30}" y2="{legend_y}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + W + 34}" y="{legend_y + 4}">{escape(label)}</text>')
        legend_y += 16
    for i, (label, slope, rx, ry) in enumerate(references):
        col = PALETTE[(i + len(pts)) % len(PALETTE)]
        lx0, ly0 = math.log10(rx), math.log10(ry)
        a, b = x0, x1
        out.append(f'<line x1="{X(a):.2f}" y1="{Y(ly0 + slope * (a - lx0)):.2f}" '
                   f'x2="{X(b):.2f}" y2="{Y(ly0 + slope * (b - lx0)):.2f}" stroke="{col}" '
                   f'stroke-dasharray="5,4" clip-path="url(#plot)"/>')
        out.append(f'<line x1="{pad_l + W + 10}" y1="{legend_y}" x2="{pad_l + W + 30}" y2="{legend_y}" stroke="{col}" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{pad_l + W + 34}" y="{legend_y + 4}">{escape(label)}</text>')
        legend_y += 16
    if title:
        out.append(f'<text x="{pad_l + W / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{pad_l + W / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{pad_t + H / 2}" transform="rotate(-90 14 {pad_t + H / 2})" '
                   f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
