"""Run reports: results CSV, score histograms, and SVG progress curves.

SVG is built by hand so reports stay dependency-free and byte-stable:
regenerating from the same rows yields identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

RESULT_FIELDS = ("name", "mode", "solved", "expressions", "seconds",
                 "solve_weight", "formula")

HISTOGRAM_FIELDS = ("score_bin_low", "score_bin_high",
                    "count_subexpr", "count_non_subexpr")
NUM_SCORE_BINS = 20

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class ResultRow:
    name: str
    mode: str
    solved: bool
    expressions: int
    seconds: float
    solve_weight: int | None
    formula: str


def write_results_csv(rows, path) -> None:
    rows = sorted(rows, key=lambda r: (r.name, r.mode))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for r in rows:
            writer.writerow([
                r.name, r.mode, int(r.solved), r.expressions,
                f"{r.seconds:.3f}",
                "" if r.solve_weight is None else r.solve_weight,
                r.formula,
            ])


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESULT_FIELDS:
            raise ValueError(f"{path}: unexpected results columns {reader.fieldnames}")
        for rec in reader:
            rows.append(ResultRow(
                rec["name"], rec["mode"], rec["solved"] == "1",
                int(rec["expressions"]), float(rec["seconds"]),
                int(rec["solve_weight"]) if rec["solve_weight"] else None,
                rec["formula"],
            ))
    return rows


def histogram_rows(samples) -> list[tuple[float, float, int, int]]:
    """Bin (score, is_subexpression) pairs into NUM_SCORE_BINS fixed bins."""
    sub = [0] * NUM_SCORE_BINS
    non = [0] * NUM_SCORE_BINS
    width = 1.0 / NUM_SCORE_BINS
    for score, is_sub in samples:
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score out of range: {score!r}")
        b = min(int(score / width), NUM_SCORE_BINS - 1)
        if is_sub:
            sub[b] += 1
        else:
            non[b] += 1
    return [(round(i * width, 2), round((i + 1) * width, 2), sub[i], non[i])
            for i in range(NUM_SCORE_BINS)]


def write_histogram_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_FIELDS)
        for low, high, n_sub, n_non in rows:
            writer.writerow([f"{low:.2f}", f"{high:.2f}", n_sub, n_non])


def read_histogram_csv(path) -> list[tuple[float, float, int, int]]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append((float(rec["score_bin_low"]), float(rec["score_bin_high"]),
                         int(rec["count_subexpr"]), int(rec["count_non_subexpr"])))
    return rows


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Svg:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="#333", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"/>')

    def polyline(self, points, color, width=1.8):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(width)}"/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{color}"/>')

    def text(self, x, y, s, size=11, anchor="start", color="#222"):
        s = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{color}">{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def solve_curve_svg(rows, x_field: str, title: str, x_budget: float | None = None) -> str:
    """Step curves of cumulative solved cases per mode over a log-10 x axis."""
    if x_field not in ("expressions", "seconds"):
        raise ValueError("x_field must be 'expressions' or 'seconds'")
    modes = sorted({r.mode for r in rows})
    solves = {
        mode: sorted(max(float(getattr(r, x_field)), 1.0)
                     for r in rows if r.mode == mode and r.solved)
        for mode in modes
    }
    x_max = max([x_budget or 0.0, 10.0]
                + [x for xs in solves.values() for x in xs])
    total = max([1] + [len(xs) for xs in solves.values()])

    w, h = 640, 420
    left, right, top, bottom = 60, 20, 40, 50
    plot_w, plot_h = w - left - right, h - top - bottom
    log_max = math.ceil(math.log10(x_max)) or 1

    def sx(x):
        return left + plot_w * (math.log10(max(x, 1.0)) / log_max)

    def sy(count):
        return top + plot_h * (1.0 - count / total)

    svg = _Svg(w, h)
    svg.text(left, top - 16, title, size=14)
    svg.line(left, top, left, top + plot_h)
    svg.line(left, top + plot_h, left + plot_w, top + plot_h)
    for p in range(0, log_max + 1):
        x = sx(10 ** p)
        svg.line(x, top + plot_h, x, top + plot_h + 4)
        svg.text(x, top + plot_h + 18, f"1e{p}", anchor="middle")
    step = max(1, total // 8)
    for count in range(0, total + 1, step):
        y = sy(count)
        svg.line(left - 4, y, left, y)
        svg.text(left - 8, y + 4, str(count), anchor="end")
    svg.text(left + plot_w / 2, h - 12, x_field, anchor="middle")
    svg.text(14, top + plot_h / 2, "solved", anchor="middle")

    for i, mode in enumerate(modes):
        color = _PALETTE[i % len(_PALETTE)]
        xs = solves[mode]
        points = [(sx(1.0), sy(0))]
        for count, x in enumerate(xs, 1):
            points.append((sx(x), sy(count - 1)))
            points.append((sx(x), sy(count)))
        points.append((sx(x_max), sy(len(xs))))
        svg.polyline(points, color)
        svg.text(left + plot_w - 4, top + 14 + 14 * i, f"{mode} ({len(xs)})",
                 anchor="end", color=color)
    return svg.render()


def histogram_svg(hist_rows, title: str = "model scores by solution membership") -> str:
    """Two panels: score histogram for solution values and for the rest."""
    w, h = 720, 300
    panel_w, panel_h = 310, 200
    top, left0, left1 = 60, 50, 410
    svg = _Svg(w, h)
    svg.text(left0, 24, title, size=14)
    peaks = (max([r[2] for r in hist_rows] + [1]),
             max([r[3] for r in hist_rows] + [1]))
    labels = ("in solution", "not in solution")
    for panel, (left, peak) in enumerate(zip((left0, left1), peaks)):
        svg.text(left, top - 10, labels[panel], size=12)
        svg.line(left, top, left, top + panel_h)
        svg.line(left, top + panel_h, left + panel_w, top + panel_h)
        bar_w = panel_w / len(hist_rows)
        color = _PALETTE[panel]
        for i, row in enumerate(hist_rows):
            count = row[2 + panel]
            bar_h = panel_h * count / peak
            svg.rect(left + i * bar_w + 1, top + panel_h - bar_h,
                     bar_w - 2, bar_h, color)
        for tick in (0.0, 0.5, 1.0):
            x = left + panel_w * tick
            svg.line(x, top + panel_h, x, top + panel_h + 4)
            svg.text(x, top + panel_h + 18, f"{tick:.1f}", anchor="middle")
        svg.text(left + panel_w, top + 12, str(peak), anchor="end", size=10)
    return svg.render()
