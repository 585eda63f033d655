"""Minimal static SVG scatter plots (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 480
MARGIN = dict(left=70, right=110, top=40, bottom=60)


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        out.append(round(v, 12))
        v += step
    return out


def _color(t: float) -> str:
    # blue -> yellow ramp
    t = min(max(t, 0.0), 1.0)
    r = int(round(40 + 215 * t))
    g = int(round(60 + 170 * t))
    b = int(round(160 - 120 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def scatter_svg(xs, ys, values, *, xlabel: str, ylabel: str, clabel: str, title: str,
                hollow=None) -> str:
    """Scatter of ``(xs, ys)`` colored by ``values``; NaN points are dropped.

    Points flagged in ``hollow`` are drawn as open circles (used for
    uncertified cells).
    """
    pts = [(float(x), float(y), float(v), bool(hollow[i]) if hollow is not None else False)
           for i, (x, y, v) in enumerate(zip(xs, ys, values))]
    pts = [p for p in pts if all(math.isfinite(c) for c in p[:3])]
    left, right, top, bottom = MARGIN["left"], MARGIN["right"], MARGIN["top"], MARGIN["bottom"]
    pw, ph = W - left - right, H - top - bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    if not pts:
        parts.append(f'<text x="{W / 2}" y="{H / 2}" text-anchor="middle">no data</text></svg>')
        return "\n".join(parts)
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    v0, v1 = min(p[2] for p in pts), max(p[2] for p in pts)
    padx = (x1 - x0) * 0.05 or 0.5
    pady = (y1 - y0) * 0.05 or 0.5
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        parts.append(f'<line x1="{sx(t):.1f}" y1="{top + ph}" x2="{sx(t):.1f}" y2="{top + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(t):.1f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        parts.append(f'<line x1="{left - 5}" y1="{sy(t):.1f}" x2="{left}" y2="{sy(t):.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    span = (v1 - v0) or 1.0
    for x, y, v, open_ in pts:
        c = _color((v - v0) / span)
        fill = "none" if open_ else c
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="{fill}" stroke="{c}"/>')
    # color bar
    bx, bw = W - right + 25, 14
    n = 40
    for i in range(n):
        yy = top + ph - (i + 1) * ph / n
        parts.append(f'<rect x="{bx}" y="{yy:.2f}" width="{bw}" height="{ph / n + 0.5:.2f}" '
                     f'fill="{_color(i / (n - 1))}" stroke="none"/>')
    parts.append(f'<text x="{bx + bw + 4}" y="{top + ph}">{v0:.3g}</text>')
    parts.append(f'<text x="{bx + bw + 4}" y="{top + 10}">{v1:.3g}</text>')
    parts.append(f'<text x="{bx}" y="{top - 8}">{escape(clabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
