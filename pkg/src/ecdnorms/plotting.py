"""Minimal self-contained SVG line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 320
PAD_L, PAD_R, PAD_T, PAD_B = 64, 16, 28, 44


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _fmt(v, log):
    v = 10**v if log else v
    return f"{v:.3g}"


def line_plot_svg(x, y, title="", xlabel="", ylabel="", loglog=False):
    """SVG text of a single polyline through ``(x, y)``.

    With ``loglog`` both axes are logarithmic and nonpositive points are
    dropped.
    """
    pts = [(float(a), float(b)) for a, b in zip(x, y) if math.isfinite(a) and math.isfinite(b)]
    if loglog:
        pts = [(math.log10(a), math.log10(b)) for a, b in pts if a > 0 and b > 0]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    x0, x1 = PAD_L, WIDTH - PAD_R
    y0, y1 = HEIGHT - PAD_B, PAD_T
    out.append(f'<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>')
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        xlo, xhi = min(xs), max(xs)
        ylo, yhi = min(ys), max(ys)
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1

        def sx(v):
            return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

        def sy(v):
            return y0 + (v - ylo) / (yhi - ylo) * (y1 - y0)

        for tx in _ticks(xlo, xhi):
            out.append(f'<line x1="{sx(tx):.2f}" y1="{y0}" x2="{sx(tx):.2f}" y2="{y0 + 4}" stroke="black"/>')
            out.append(f'<text x="{sx(tx):.2f}" y="{y0 + 16}" text-anchor="middle">{_fmt(tx, loglog)}</text>')
        for ty in _ticks(ylo, yhi):
            out.append(f'<line x1="{x0 - 4}" y1="{sy(ty):.2f}" x2="{x0}" y2="{sy(ty):.2f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 6}" y="{sy(ty) + 4:.2f}" text-anchor="end">{_fmt(ty, loglog)}</text>')
        poly = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
        out.append(f'<polyline points="{poly}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="#1f5fa8"/>')
    scale = " (log)" if loglog else ""
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel + scale)}</text>')
    out.append(
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{escape(ylabel + scale)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
