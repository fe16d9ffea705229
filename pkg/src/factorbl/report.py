"""Machine-readable tables and deterministic SVG charts.

Charts are written as hand-rolled SVG so identical specs produce identical
bytes: fixed palette, fixed float formatting, no timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocate import WeightVector
from .blacklitterman import BLResult
from .errors import BadInput, EmptyChart, IoError

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)

WIDTH, HEIGHT = 960, 540
MARGIN = {"left": 70.0, "right": 170.0, "top": 40.0, "bottom": 50.0}


@dataclass(frozen=True)
class ChartSpec:
    kind: str  # line | stacked_area | heatmap | grouped_bar
    series: dict  # name -> 1-D values (heatmap: name -> matrix row)
    path: str
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    x_ticks: tuple = field(default_factory=tuple)  # labels along x, optional

    def __post_init__(self):
        if self.kind not in ("line", "stacked_area", "heatmap", "grouped_bar"):
            raise BadInput(f"unknown chart kind {self.kind!r}")
        lengths = {len(np.atleast_1d(v)) for v in self.series.values()}
        if len(lengths) > 1:
            raise BadInput("all series must have equal length")


def _esc(text) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Svg:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="#333333", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def polyline(self, points, color):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    def polygon(self, points, color, opacity=0.85):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{color}"/>'
        )

    def text(self, x, y, content, size=12, anchor="start", color="#222222"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" text-anchor="{anchor}" '
            f'fill="{color}">{_esc(content)}</text>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _y_scale(lo: float, hi: float):
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo

    def to_pix(v):
        return bottom - (v - lo) / span * (bottom - top)

    return to_pix


def _x_positions(count: int):
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    if count == 1:
        return np.array([0.5 * (left + right)])
    return np.linspace(left, right, count)


def _frame(svg: _Svg, spec: ChartSpec, y_lo, y_hi, to_pix):
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    svg.line(left, bottom, right, bottom)
    svg.line(left, top, left, bottom)
    if spec.title:
        svg.text(0.5 * (left + right), top - 16, spec.title, size=15, anchor="middle")
    if spec.x_label:
        svg.text(0.5 * (left + right), HEIGHT - 12, spec.x_label, anchor="middle")
    if spec.y_label:
        svg.text(16, 0.5 * (top + bottom), spec.y_label, anchor="middle")
    for tick in np.linspace(y_lo, y_hi, 5):
        y = to_pix(tick)
        svg.line(left - 4, y, left, y)
        svg.text(left - 8, y + 4, f"{tick:.4g}", size=10, anchor="end")


def _legend(svg: _Svg, names):
    x = WIDTH - MARGIN["right"] + 14
    y = MARGIN["top"] + 8
    for i, name in enumerate(names):
        color = PALETTE[i % len(PALETTE)]
        svg.rect(x, y + 16 * i - 8, 10, 10, color)
        svg.text(x + 16, y + 16 * i + 2, name, size=11)


def _heat_color(v: float) -> str:
    # blue (-1) -> white (0) -> red (+1)
    v = float(np.clip(v, -1.0, 1.0))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v)), round(255 * (1 - v))
    else:
        r, g, b = round(255 * (1 + v)), round(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_chart(spec: ChartSpec) -> str:
    """Write the chart as SVG and return the output path."""
    if not spec.series or all(len(np.atleast_1d(v)) == 0 for v in spec.series.values()):
        raise EmptyChart("chart spec has no data")
    svg = _Svg()
    names = list(spec.series)

    if spec.kind == "heatmap":
        matrix = np.stack([np.atleast_1d(spec.series[n]) for n in names])
        rows, cols = matrix.shape
        left, top = MARGIN["left"], MARGIN["top"]
        w = (WIDTH - MARGIN["right"] - left) / cols
        h = (HEIGHT - MARGIN["bottom"] - top) / rows
        for i in range(rows):
            for j in range(cols):
                svg.rect(left + j * w, top + i * h, w, h, _heat_color(matrix[i, j]))
            svg.text(left - 6, top + (i + 0.6) * h, names[i], size=9, anchor="end")
        labels = spec.x_ticks if spec.x_ticks else names
        for j, label in enumerate(labels[:cols]):
            svg.text(left + (j + 0.5) * w, HEIGHT - MARGIN["bottom"] + 14, label, size=8, anchor="middle")
        if spec.title:
            svg.text(0.5 * WIDTH, top - 16, spec.title, size=15, anchor="middle")
    elif spec.kind == "stacked_area":
        stack = np.stack([np.asarray(spec.series[n], dtype=float) for n in names])
        cum = np.cumsum(stack, axis=0)
        y_lo = min(0.0, float(cum.min()))
        y_hi = float(cum.max())
        to_pix = _y_scale(y_lo, y_hi)
        xs = _x_positions(stack.shape[1])
        lower = np.zeros(stack.shape[1])
        for i, name in enumerate(names):
            upper = cum[i]
            points = [(x, to_pix(u)) for x, u in zip(xs, upper)]
            points += [(x, to_pix(l)) for x, l in zip(xs[::-1], lower[::-1])]
            svg.polygon(points, PALETTE[i % len(PALETTE)])
            lower = upper
        _frame(svg, spec, y_lo, y_hi, to_pix)
        _legend(svg, names)
    elif spec.kind == "line":
        values = np.stack([np.asarray(spec.series[n], dtype=float) for n in names])
        y_lo, y_hi = float(values.min()), float(values.max())
        to_pix = _y_scale(y_lo, y_hi)
        xs = _x_positions(values.shape[1])
        for i, name in enumerate(names):
            svg.polyline(list(zip(xs, [to_pix(v) for v in values[i]])), PALETTE[i % len(PALETTE)])
        _frame(svg, spec, y_lo, y_hi, to_pix)
        _legend(svg, names)
    else:  # grouped_bar
        values = np.stack([np.asarray(spec.series[n], dtype=float) for n in names])
        y_lo, y_hi = min(0.0, float(values.min())), max(0.0, float(values.max()))
        to_pix = _y_scale(y_lo, y_hi)
        n_groups = values.shape[1]
        left, right = MARGIN["left"], WIDTH - MARGIN["right"]
        group_w = (right - left) / n_groups
        bar_w = group_w * 0.8 / len(names)
        base = to_pix(0.0)
        for i, name in enumerate(names):
            for j in range(n_groups):
                x = left + j * group_w + group_w * 0.1 + i * bar_w
                y = to_pix(values[i, j])
                svg.rect(x, min(y, base), bar_w, abs(base - y), PALETTE[i % len(PALETTE)])
        if spec.x_ticks:
            for j, label in enumerate(spec.x_ticks[:n_groups]):
                svg.text(left + (j + 0.5) * group_w, HEIGHT - MARGIN["bottom"] + 14, label, size=8, anchor="middle")
        _frame(svg, spec, y_lo, y_hi, to_pix)
        _legend(svg, names)

    try:
        with open(spec.path, "w", newline="\n") as fh:
            fh.write(svg.render())
    except OSError as exc:
        raise IoError(f"cannot write chart to {spec.path}: {exc}") from exc
    return spec.path


def format_percent(v: float) -> str:
    """Two-decimal percentage with thousands separators, e.g. 17,107.41%."""
    return f"{v * 100.0:,.2f}%"


def parse_percent(text: str) -> float:
    return float(text.replace(",", "").rstrip("%")) / 100.0


def emit_bl_table(result: BLResult, prior: WeightVector, names, path) -> str:
    """Posterior-vs-prior comparison table, percentages to two decimals.

    Column order: posterior return, equilibrium return, return difference,
    posterior weights, prior weights, weights difference (active weights).
    """
    names = list(names)
    if len(names) != result.posterior_mu.size:
        raise BadInput("names and result disagree on N")
    header = "asset,bl_return,pi,return_difference,bl_weights,prior_weights,weights_difference"
    lines = [header]
    for i, name in enumerate(names):
        cells = [
            format_percent(result.posterior_mu[i]),
            format_percent(result.prior_pi[i]),
            format_percent(result.posterior_mu[i] - result.prior_pi[i]),
            format_percent(result.posterior_weights.weights[i]),
            format_percent(prior.weights[i]),
            format_percent(result.posterior_weights.weights[i] - prior.weights[i]),
        ]
        lines.append(name + "," + ",".join(f'"{c}"' for c in cells))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write table to {path}: {exc}") from exc
    return path


def read_bl_table(path) -> dict[str, dict[str, float]]:
    """Parse an emitted comparison table back to numbers (at stored precision)."""
    out = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            name = parts[0]
            cells = [p.strip('"') for p in parts[1:]]
            out[name] = {col: parse_percent(cell) for col, cell in zip(header[1:], cells)}
    return out


def matrix_to_csv(matrix: np.ndarray, names, path) -> str:
    """Square matrix with variable names as header row and column."""
    names = list(names)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (len(names), len(names)):
        raise BadInput("matrix shape does not match names")
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("," + ",".join(names) + "\n")
            for name, row in zip(names, matrix):
                fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write matrix to {path}: {exc}") from exc
    return path


def weights_table_csv(columns: dict[str, np.ndarray], names, path) -> str:
    """One row per factor, one column per scheme, full float precision."""
    names = list(names)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("asset," + ",".join(columns) + "\n")
            for i, name in enumerate(names):
                fh.write(name + "," + ",".join(repr(float(columns[c][i])) for c in columns) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write table to {path}: {exc}") from exc
    return path
