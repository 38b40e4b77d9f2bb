"""Dependency-free SVG line charts for sweep outputs."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(x, series, title="", xlabel="", ylabel="", logx=False, width=640, height=420):
    """SVG text for one or more ``name -> y values`` series over shared ``x``.

    Non-finite points are skipped.
    """
    pad_l, pad_r, pad_t, pad_b = 70, 150, 40, 50
    fx = [math.log10(v) if logx else float(v) for v in x]
    ys = [float(v) for ys_ in series.values() for v in ys_ if v is not None and math.isfinite(float(v))]
    x0, x1 = min(fx), max(fx)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def py(v):
        return pad_t + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{pad_t + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {pad_t + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(x0, x1):
        label = f"{10 ** t:.3g}" if logx else f"{t:.3g}"
        out.append(f'<text x="{px(t):.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{pad_l - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = [
            f"{px(a):.2f},{py(float(b)):.2f}"
            for a, b in zip(fx, vals)
            if b is not None and math.isfinite(float(b))
        ]
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(pts)}"/>')
        ly = pad_t + 16 * (k + 1)
        out.append(f'<line x1="{width - pad_r + 10}" y1="{ly - 4}" x2="{width - pad_r + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r + 35}" y="{ly}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path, x, series, **kw):
    with open(path, "w") as fh:
        fh.write(line_chart(x, series, **kw))
