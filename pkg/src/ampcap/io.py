"""CSV tables and SVG line plots.

CSV: comma delimiter, header row, LF line endings, floats written with
``repr`` (shortest round-trip form), empty field for a missing value.
SVG: self-contained SVG 1.1, linear axes, numbers with 6 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

__all__ = ["CsvParseError", "Table", "format_value", "write_csv", "read_csv", "render_svg", "emit_svg"]


class CsvParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row has {len(r)} fields, header has {len(header)}")
        lines.append(",".join(format_value(v) for v in r))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: tuple

    def column(self, name):
        k = self.header.index(name)
        return [r[k] for r in self.rows]


def _cell(s):
    if s == "":
        return None
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path):
    """Parse a table written by :func:`write_csv`; numeric cells become floats."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0]:
        raise CsvParseError(path, 1, "missing header")
    header = tuple(lines[0].split(","))
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if "\r" in line:
            raise CsvParseError(path, i, "CR in line (expected LF endings)")
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvParseError(path, i, f"expected {len(header)} fields, got {len(cells)}")
        rows.append(tuple(_cell(c) for c in cells))
    return Table(header, tuple(rows))


def _g6(x):
    return f"{x:.6g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(series, xlabel, ylabel, title=""):
    """Line plot of ``series = [(label, xs, ys), ...]`` as an SVG document."""
    W, H, ml, mr, mt, mb = 640, 420, 80, 150, 40, 60
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 0.5 * (abs(x0) or 1), x1 + 0.5 * (abs(x1) or 1)
    if y1 == y0:
        y0, y1 = y0 - 0.5 * (abs(y0) or 1), y1 + 0.5 * (abs(y1) or 1)
    pw, ph = W - ml - mr, H - mt - mb
    sx = lambda x: ml + (x - x0) / (x1 - x0) * pw
    sy = lambda y: mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        X = _g6(sx(t))
        out.append(f'<line x1="{X}" y1="{mt + ph}" x2="{X}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{mt + ph + 20}" font-size="11" text-anchor="middle">{_g6(t)}</text>')
    for t in _ticks(y0, y1):
        Y = _g6(sy(t))
        out.append(f'<line x1="{ml - 5}" y1="{Y}" x2="{ml}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y}" font-size="11" text-anchor="end" dominant-baseline="middle">{_g6(t)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{H - 15}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{mt + ph / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 20 {mt + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="25" font-size="14" text-anchor="middle">{escape(title)}</text>')
    for k, (label, xs, ys) in enumerate(series):
        c = _COLORS[k % len(_COLORS)]
        xy = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if len(xy) > 1:
            coords = " ".join(f"{_g6(a)},{_g6(b)}" for a, b in xy)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        for a, b in xy:
            out.append(f'<circle cx="{_g6(a)}" cy="{_g6(b)}" r="2.5" fill="{c}"/>')
        ly = mt + 15 + 20 * k
        out.append(f'<line x1="{W - mr + 10}" y1="{ly}" x2="{W - mr + 35}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{W - mr + 40}" y="{ly}" font-size="12" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(csv_paths, labels, x_col, y_col, out_path, xlabel=None, ylabel=None, title=""):
    """Plot column ``y_col`` against ``x_col`` of each CSV into one SVG file."""
    series = []
    for path, label in zip(csv_paths, labels):
        t = read_csv(path)
        pairs = [
            (x, y) for x, y in zip(t.column(x_col), t.column(y_col))
            if isinstance(x, float) and isinstance(y, float)
        ]
        series.append((label, [p[0] for p in pairs], [p[1] for p in pairs]))
    doc = render_svg(series, xlabel or x_col, ylabel or y_col, title)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(doc)
    return out_path
