"""Hand-written SVG: ternary diagram of a menu and the circle of identified arcs."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from . import circle
from .errors import UnsupportedDimension
from .geometry import extreme_indices
from .identification import Experiment, identified_family
from .prior import PriorModel

WIDTH, HEIGHT = 600, 520
PALETTE = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#1f78b4", "#b2df8a", "#fb9a99",
)
# simplex vertices a, b, c on the canvas
TRI = np.array([[30.0, 330.0], [290.0, 330.0], [160.0, 105.0]])
CENTER = np.array([450.0, 218.0])
RADIUS = 110.0


def _xy(p: np.ndarray) -> tuple[float, float]:
    x, y = p @ TRI
    return float(x), float(y)


def _circle_xy(theta: float, r: float = RADIUS) -> tuple[float, float]:
    return CENTER[0] + r * math.cos(theta), CENTER[1] - r * math.sin(theta)


def _arc_path(a: float, b: float) -> str:
    x0, y0 = _circle_xy(a)
    x1, y1 = _circle_xy(b)
    large = 1 if b - a > math.pi else 0
    return (
        f"M {CENTER[0]:.2f} {CENTER[1]:.2f} L {x0:.2f} {y0:.2f} "
        f"A {RADIUS:.2f} {RADIUS:.2f} 0 {large} 0 {x1:.2f} {y1:.2f} Z"
    )


def render_svg(e: Experiment, prior: PriorModel, title: str = "") -> str:
    """SVG text for a three-outcome experiment; colours mark partition cells."""
    if e.menu.dim != 3 or prior.dim != 3:
        raise UnsupportedDimension("plots exist only for three outcomes")
    fam = identified_family(e, prior)
    owner = e.cell_index_array()
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" font-size="15">{escape(title)}</text>')
    tri = " ".join(f"{x:.2f},{y:.2f}" for x, y in TRI)
    out.append(f'<polygon points="{tri}" fill="none" stroke="#444" stroke-width="1.2"/>')
    for lab, (x, y), dy in zip("abc", TRI, (16, 16, -8)):
        out.append(f'<text x="{x:.2f}" y="{y + dy:.2f}" text-anchor="middle">{lab}</text>')
    ext = list(extreme_indices(e.menu))
    if len(ext) >= 3:
        pts = np.array([_xy(e.menu.points[i]) for i in ext])
        c = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
        hull = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts[order])
        out.append(f'<polygon points="{hull}" fill="#ddd" stroke="#888"/>')
    elif len(ext) == 2:
        (x0, y0), (x1, y1) = (_xy(e.menu.points[i]) for i in ext)
        out.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="#888"/>')
    for i, p in enumerate(e.menu.points):
        x, y = _xy(p)
        col = PALETTE[owner[i] % len(PALETTE)]
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{col}" stroke="black" stroke-width="0.5"/>')
    out.append(
        f'<circle cx="{CENTER[0]:.2f}" cy="{CENTER[1]:.2f}" r="{RADIUS:.2f}" fill="none" stroke="#444"/>'
    )
    for k in range(e.n_cells):
        arcs = fam.arcs(k)
        col = PALETTE[k % len(PALETTE)]
        mu = fam.measures[k].value
        for a, b in arcs.intervals:
            if b - a <= 1e-12:
                continue
            if b - a >= circle.TWO_PI - 1e-9:
                out.append(
                    f'<circle cx="{CENTER[0]:.2f}" cy="{CENTER[1]:.2f}" r="{RADIUS:.2f}" '
                    f'fill="{col}" fill-opacity="0.55" stroke="white"/>'
                )
            else:
                out.append(f'<path d="{_arc_path(a, b)}" fill="{col}" fill-opacity="0.55" stroke="white"/>')
        if arcs.intervals and mu > 0:
            a, b = max(arcs.intervals, key=lambda iv: iv[1] - iv[0])
            x, y = _circle_xy(0.5 * (a + b), RADIUS + 18)
            out.append(f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="middle">{mu:.3f}</text>')
    y = 380
    for k, cell in enumerate(e.partition):
        col = PALETTE[k % len(PALETTE)]
        name = e.cell_labels[k] if e.cell_labels else ",".join(map(str, cell))
        out.append(f'<rect x="30" y="{y - 10}" width="12" height="12" fill="{col}"/>')
        out.append(
            f'<text x="50" y="{y}">cell {escape(name)}: mu = {fam.measures[k].value:.4f}</text>'
        )
        y += 16
        if y > HEIGHT - 8:
            break
    out.append("</svg>")
    return "\n".join(out) + "\n"
