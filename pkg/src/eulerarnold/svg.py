"""Minimal deterministic SVG line plots.

Series coordinates are written in data units inside a single affine group,
so the plotted points can be read back exactly from the document.
"""

import re
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptySeries

WIDTH = 640
HEIGHT = 480
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    closed: bool = False

    @classmethod
    def graph(cls, label, x, y):
        return cls(label, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))

    @classmethod
    def curve(cls, label, points, closed=True):
        z = np.asarray(points, dtype=np.complex128)
        return cls(label, z.real.copy(), z.imag.copy(), closed)


def _fmt(v):
    return format(float(v), ".17g")


def _nice_ticks(lo, hi, count=5):
    span = hi - lo
    raw = span / count
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return [t for t in ticks if lo - 1e-12 * span <= t <= hi + 1e-12 * span]


def _range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        pad = max(abs(lo), 1.0) * 0.5
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def export_svg(series, title=None, equal_aspect=False, xlabel=None, ylabel=None):
    """Render labelled series as an SVG document string."""
    series = list(series)
    if not series:
        raise EmptySeries("nothing to plot")
    for s in series:
        if len(s.x) == 0 or len(s.x) != len(s.y):
            raise EmptySeries(f"series '{s.label}' has no points")
        if not (np.all(np.isfinite(s.x)) and np.all(np.isfinite(s.y))):
            raise EmptySeries(f"series '{s.label}' has non-finite points")

    xs = np.concatenate([s.x for s in series])
    ys = np.concatenate([s.y for s in series])
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)
    if equal_aspect:
        s_ = min(sx, sy)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        sx = sy = s_
        x0, x1 = cx - 0.5 * pw / s_, cx + 0.5 * pw / s_
        y0, y1 = cy - 0.5 * ph / s_, cy + 0.5 * ph / s_
    tx = MARGIN - x0 * sx
    ty = MARGIN + y1 * sy

    def px(x):
        return MARGIN + (x - x0) * sx

    def py(y):
        return MARGIN + (y1 - y) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        "<style>",
        ".axis{stroke:#000;stroke-width:1;fill:none}",
        ".tick{font-family:sans-serif;font-size:11px}",
    ]
    for i in range(len(series)):
        color = PALETTE[i % len(PALETTE)]
        dash = "" if i < len(PALETTE) else ";stroke-dasharray:4 2"
        out.append(f".series-{i}{{stroke:{color};fill:none;stroke-width:1.5;"
                   f"vector-effect:non-scaling-stroke{dash}}}")
    out.append("</style>")
    if title:
        out.append(f'<text class="tick" x="{WIDTH / 2:g}" y="{MARGIN / 2:g}" '
                   f'text-anchor="middle">{escape(title)}</text>')
    out.append(f'<rect class="axis" x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}"/>')
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line class="axis" x1="{X:.3f}" y1="{MARGIN + ph}" x2="{X:.3f}" y2="{MARGIN + ph + 5}"/>')
        out.append(f'<text class="tick" x="{X:.3f}" y="{MARGIN + ph + 18}" text-anchor="middle">{t + 0.0:.4g}</text>')
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line class="axis" x1="{MARGIN - 5}" y1="{Y:.3f}" x2="{MARGIN}" y2="{Y:.3f}"/>')
        out.append(f'<text class="tick" x="{MARGIN - 8}" y="{Y + 4:.3f}" text-anchor="end">{t + 0.0:.4g}</text>')
    if xlabel:
        out.append(f'<text class="tick" x="{WIDTH / 2:g}" y="{HEIGHT - 12}" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text class="tick" x="14" y="{HEIGHT / 2:g}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {HEIGHT / 2:g})">{escape(ylabel)}</text>')

    out.append(f'<g class="data" transform="matrix({_fmt(sx)} 0 0 {_fmt(-sy)} {_fmt(tx)} {_fmt(ty)})">')
    for i, s in enumerate(series):
        pts = " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in zip(s.x, s.y))
        d = "M " + pts + (" Z" if s.closed else "")
        out.append(f'<path class="series-{i}" data-label="{escape(s.label)}" d="{d}"/>')
    out.append("</g>")
    for i, s in enumerate(series):
        y = MARGIN + 14 + 14 * i
        out.append(f'<text class="tick series-{i}" x="{MARGIN + pw - 4}" y="{y}" '
                   f'text-anchor="end" style="fill:{PALETTE[i % len(PALETTE)]};stroke:none">'
                   f"{escape(s.label)}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_paths(svg_text):
    """``(class, label, points)`` for every data path, with points as a complex array."""
    found = []
    for m in re.finditer(r'<path class="([^"]+)" data-label="([^"]*)" d="([^"]+)"/>', svg_text):
        nums = re.findall(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?", m.group(3))
        arr = np.array([float(v) for v in nums]).reshape(-1, 2)
        found.append((m.group(1), m.group(2), arr[:, 0] + 1j * arr[:, 1]))
    return found
