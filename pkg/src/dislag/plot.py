"""Minimal static SVG line plots for convergence traces.

No rendering dependency: each panel is a handful of ``<polyline>`` and
``<text>`` elements on a fixed canvas.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dlm import TRACE_HEADER
from .errors import ParseError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 360
MARGIN = dict(left=70, right=20, top=36, bottom=46)


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)  # (xs, ys, color, dashed)

    def line(self, xs, ys, color=None, dashed=False):
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append((np.asarray(xs, float), np.asarray(ys, float), color, dashed))

    def hline(self, y, xs, color="#000000"):
        self.line([xs[0], xs[-1]], [y, y], color=color, dashed=True)

    def to_svg(self) -> str:
        xs = np.concatenate([s[0] for s in self.series])
        ys = np.concatenate([s[1] for s in self.series])
        ok = np.isfinite(ys)
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys[ok].min()), float(ys[ok].max())
        if x1 == x0:
            x1 = x0 + 1.0
        pad = 0.05 * (y1 - y0) if y1 > y0 else max(1.0, abs(y0) * 0.05)
        y0, y1 = y0 - pad, y1 + pad
        pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def px(x):
            return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

        def py(y):
            return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
            'fill="none" stroke="#444"/>',
            f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
            f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle">{escape(self.xlabel)}</text>',
            f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(self.ylabel)}</text>',
        ]
        for t in np.linspace(0.0, 1.0, 5):
            xv, yv = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            out.append(f'<text x="{px(xv):.1f}" y="{HEIGHT - MARGIN["bottom"] + 16}" '
                       f'text-anchor="middle">{xv:.4g}</text>')
            out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.5g}</text>')
        for sx, sy, color, dashed in self.series:
            keep = np.isfinite(sy)
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx[keep], sy[keep]))
            dash = ' stroke-dasharray="6,4"' if dashed else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.4"{dash}/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def read_trace_csv(path):
    """Parse a trace CSV into per-k arrays; raises :class:`ParseError` if empty or malformed."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ParseError(f"{path}: missing or wrong trace header", line=1)
        rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: trace has no rows", line=2)
    try:
        ks = np.array([int(r[0]) for r in rows])
        nodes = np.array([int(r[1]) for r in rows])
        vals = np.array([[float(v) for v in r[2:]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    n = int(nodes.max()) + 1
    uk = np.unique(ks)
    lam = np.full((uk.size, n), np.nan)
    row = np.searchsorted(uk, ks)
    lam[row, nodes] = vals[:, 0]
    first = np.unique(row, return_index=True)[1]
    xs = np.full((uk.size, n), np.nan)
    xs[row, nodes] = vals[:, 2]
    return {
        "k": uk,
        "lambda": lam,
        "x": xs,
        "balance_residual": vals[first, 5],
        "primal_cost": vals[first, 8],
        "lagrangian_sum": vals[first, 7],
    }


def trace_panels(data, f_star=None, lambda_star=None, demand=None, label=""):
    k = data["k"]
    suffix = f" ({label})" if label else ""
    cost = Panel("Total cost" + suffix, "iteration k", "sum f_i(x_i)")
    cost.line(k, data["primal_cost"])
    if f_star is not None:
        cost.hline(f_star, k)
    mult = Panel("Multipliers" + suffix, "iteration k", "lambda_i")
    for i in range(data["lambda"].shape[1]):
        mult.line(k, data["lambda"][:, i])
    if lambda_star is not None:
        mult.hline(lambda_star, k)
    power = Panel("Total allocation" + suffix, "iteration k", "sum x_i")
    power.line(k, np.nansum(data["x"], axis=1))
    if demand is not None:
        power.hline(demand, k)
    return {"cost": cost, "multipliers": mult, "balance": power}


def write_trace_plots(trace_path, out_dir, f_star=None, lambda_star=None, demand=None, label=""):
    """Render the three panels of a trace CSV; returns the written paths.

    Nothing is written if the trace cannot be parsed.
    """
    data = read_trace_csv(trace_path)
    panels = trace_panels(data, f_star, lambda_star, demand, label)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(trace_path).stem
    written = []
    for key, panel in panels.items():
        target = out_dir / f"{stem}_{key}.svg"
        target.write_text(panel.to_svg())
        written.append(target)
    return written
