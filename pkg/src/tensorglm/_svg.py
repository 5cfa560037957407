"""Static SVG line charts and heatmaps.

Output is plain text built from fixed-precision numbers, so identical
data gives identical bytes.

Heatmap color ramp: values are clipped to ``[vmin, vmax]`` and mapped
linearly through the stops below (light yellow at ``vmin`` to dark blue at
``vmax``), interpolating each RGB channel.  Missing values are drawn grey.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

RAMP = ((0.0, (255, 255, 217)), (0.25, (199, 233, 180)), (0.5, (65, 182, 196)),
        (0.75, (34, 94, 168)), (1.0, (8, 29, 88)))
MISSING = "#bdbdbd"
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 150, 40, 60


def ramp_color(t: float) -> str:
    """Hex color for ``t`` in ``[0, 1]`` on :data:`RAMP`."""
    if not math.isfinite(t):
        return MISSING
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(RAMP, RAMP[1:]):
        if t <= t1:
            u = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = [round(a + u * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % RAMP[-1][1]


def _f(x: float) -> str:
    return f"{x:.2f}"


def _tick(x: float) -> str:
    return f"{x:.4g}"


def _head(title: str, tag: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<!-- config_sha256: {tag} -->",
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<text x="{_W // 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f"{escape(title)}</text>",
    ]


def _span(vals):
    finite = [v for v in vals if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def line_chart(x: Sequence[float], series: dict, *, title: str, xlabel: str, ylabel: str,
               tag: str = "") -> str:
    """One polyline per entry of ``series``; non-finite points break the line."""
    x = [float(v) for v in x]
    x0, x1 = _span(x)
    y0, y1 = _span([float(v) for ys in series.values() for v in ys])
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(v):
        return _LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + ph - (v - y0) / (y1 - y0) * ph

    out = _head(title, tag)
    out.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_f(px(xv))}" y="{_TOP + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_tick(xv)}</text>')
        out.append(f'<text x="{_LEFT - 6}" y="{_f(py(yv) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_tick(yv)}</text>')
    out.append(f'<text x="{_LEFT + pw // 2}" y="{_H - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{_TOP + ph // 2}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 18 {_TOP + ph // 2})">{escape(ylabel)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        runs, cur = [], []
        for xv, yv in zip(x, ys):
            if math.isfinite(yv):
                cur.append(f"{_f(px(xv))},{_f(py(float(yv)))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = _TOP + 16 * k + 10
        out.append(f'<line x1="{_W - _RIGHT + 12}" y1="{ly}" x2="{_W - _RIGHT + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _RIGHT + 38}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(x: Sequence[float], y: Sequence[float], z, *, title: str, xlabel: str, ylabel: str,
            vmin: float, vmax: float, tag: str = "") -> str:
    """Cell ``z[i][j]`` at column ``x[j]``, row ``y[i]`` (first row at the bottom)."""
    nx, ny = len(x), len(y)
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM
    cw, ch = pw / nx, ph / ny
    span = vmax - vmin if vmax > vmin else 1.0
    out = _head(title, tag)
    for i in range(ny):
        for j in range(nx):
            v = float(z[i][j])
            color = ramp_color((v - vmin) / span) if math.isfinite(v) else MISSING
            out.append(f'<rect x="{_f(_LEFT + j * cw)}" y="{_f(_TOP + ph - (i + 1) * ch)}" '
                       f'width="{_f(cw)}" height="{_f(ch)}" fill="{color}"/>')
    out.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    for j in sorted({0, nx // 2, nx - 1}):
        out.append(f'<text x="{_f(_LEFT + (j + 0.5) * cw)}" y="{_TOP + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_tick(x[j])}</text>')
    for i in sorted({0, ny // 2, ny - 1}):
        out.append(f'<text x="{_LEFT - 6}" y="{_f(_TOP + ph - (i + 0.5) * ch + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_tick(y[i])}</text>')
    out.append(f'<text x="{_LEFT + pw // 2}" y="{_H - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{_TOP + ph // 2}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 18 {_TOP + ph // 2})">{escape(ylabel)}</text>')
    bx, steps = _W - _RIGHT + 20, 20
    for k in range(steps):
        t = k / (steps - 1)
        out.append(f'<rect x="{bx}" y="{_f(_TOP + ph - (k + 1) * ph / steps)}" width="18" '
                   f'height="{_f(ph / steps)}" fill="{ramp_color(t)}"/>')
    out.append(f'<text x="{bx + 24}" y="{_TOP + ph}" font-family="sans-serif" font-size="11">{_tick(vmin)}</text>')
    out.append(f'<text x="{bx + 24}" y="{_TOP + 10}" font-family="sans-serif" font-size="11">{_tick(vmax)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
