"""Minimal, byte-stable SVG line charts.

Only what the two figure kinds need: axes with ticks, polylines or paths,
point markers and a legend. Coordinates are printed with fixed precision so
identical input gives identical bytes.
"""

from __future__ import annotations

import math
from html import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=40, bottom=55)
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _f(v: float) -> str:
    return f"{v:.2f}"


def padded_range(lo: float, hi: float, frac: float = 0.05) -> tuple:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("non-finite data")
    if hi == lo:
        pad = abs(lo) * frac or 0.5
        return lo - pad, hi + pad
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


def nice_ticks(lo: float, hi: float, target: int = 6) -> list:
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _tick_label(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s in ("-0", "0") else s


class _Frame:
    def __init__(self, xr, yr):
        self.x0, self.x1 = xr
        self.y0, self.y1 = yr
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _axes(fr: _Frame, title, x_label, y_label) -> list:
    out = [
        f'<rect x="{fr.left}" y="{fr.top}" width="{fr.right - fr.left}" '
        f'height="{fr.bottom - fr.top}" fill="none" stroke="#000" stroke-width="1"/>'
    ]
    for t in nice_ticks(fr.x0, fr.x1):
        x = _f(fr.px(t))
        out.append(f'<line x1="{x}" y1="{fr.bottom}" x2="{x}" y2="{fr.bottom + 5}" stroke="#000"/>')
        out.append(f'<text x="{x}" y="{fr.bottom + 18}" font-size="11" text-anchor="middle">'
                   f'{_tick_label(t)}</text>')
    for t in nice_ticks(fr.y0, fr.y1):
        y = _f(fr.py(t))
        out.append(f'<line x1="{fr.left - 5}" y1="{y}" x2="{fr.left}" y2="{y}" stroke="#000"/>')
        out.append(f'<text x="{fr.left - 8}" y="{y}" font-size="11" text-anchor="end" '
                   f'dominant-baseline="middle">{_tick_label(t)}</text>')
    cx = _f((fr.left + fr.right) / 2)
    cy = _f((fr.top + fr.bottom) / 2)
    out.append(f'<text x="{cx}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="18" y="{cy}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 18 {cy})">{escape(y_label)}</text>')
    if title:
        out.append(f'<text x="{cx}" y="22" font-size="15" text-anchor="middle">{escape(title)}</text>')
    return out


def _legend(fr: _Frame, entries) -> list:
    out = []
    x = fr.right + 15
    for i, (label, color, dash) in enumerate(entries):
        y = fr.top + 10 + 20 * i
        extra = ' stroke-dasharray="6 3"' if dash else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"{extra}/>')
        out.append(f'<text x="{x + 30}" y="{y}" font-size="12" dominant-baseline="middle" '
                   f'class="legend">{escape(label)}</text>')
    return out


def _document(body) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>', *body, "</svg>"]) + "\n"


def kde_overlay(curves, title="", x_label="x", y_label="density", reference="truth") -> str:
    """One path per ``(label, x, y)`` curve; the curve named ``reference``
    is drawn dashed in black."""
    if not curves:
        raise ValueError("no curves to draw")
    xs = np.concatenate([np.asarray(c[1], float) for c in curves])
    ys = np.concatenate([np.asarray(c[2], float) for c in curves])
    fr = _Frame(padded_range(xs.min(), xs.max()), padded_range(min(0.0, ys.min()), ys.max()))
    body = _axes(fr, title, x_label, y_label)
    legend = []
    color_i = 0
    for label, x, y in curves:
        if label == reference:
            color, dash = "#000", True
        else:
            color, dash = PALETTE[color_i % len(PALETTE)], False
            color_i += 1
        pts = " L".join(f"{_f(fr.px(a))},{_f(fr.py(b))}" for a, b in zip(x, y))
        extra = ' stroke-dasharray="6 3"' if dash else ""
        body.append(f'<path class="curve" data-label="{escape(label)}" d="M{pts}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"{extra}/>')
        legend.append((label, color, dash))
    return _document(body + _legend(fr, legend))


def distance_lines(series, title="", x_label="", y_label="mean final Hellinger distance") -> str:
    """``series`` is a list of ``(label, [(x, y), ...])``. Series with more
    than one point get a polyline; every point gets a marker."""
    if not series or not any(pts for _, pts in series):
        raise ValueError("no points to draw")
    xs = np.array([p[0] for _, pts in series for p in pts], float)
    ys = np.array([p[1] for _, pts in series for p in pts], float)
    fr = _Frame(padded_range(xs.min(), xs.max()), padded_range(ys.min(), ys.max()))
    body = _axes(fr, title, x_label, y_label)
    legend = []
    for i, (label, pts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts)
        coords = [(_f(fr.px(a)), _f(fr.py(b))) for a, b in pts]
        if len(coords) > 1:
            body.append(f'<polyline class="series" data-label="{escape(label)}" points="'
                        + " ".join(f"{a},{b}" for a, b in coords)
                        + f'" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in coords:
            body.append(f'<circle class="marker" cx="{a}" cy="{b}" r="3.5" fill="{color}"/>')
        legend.append((label, color, False))
    return _document(body + _legend(fr, legend))
