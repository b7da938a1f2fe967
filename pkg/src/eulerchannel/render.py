"""Deterministic SVG rendering of streamfunction contours and orbits.

Hand-emitted SVG (textual, diffable); identical inputs produce byte-identical
files.  Contours are drawn at evenly spaced interior levels, wall curves in
black, contractible orbits highlighted.
"""

from __future__ import annotations

import numpy as np

from .contours import extract_level_curves
from .geometry import ScalarField, TWO_PI

_W = 840
_MARGIN = 24


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _wrap_split(points: np.ndarray):
    """Wrap unwrapped-x polylines into [0, 2pi), splitting at the seam."""
    x = np.mod(points[:, 0], TWO_PI)
    y = points[:, 1]
    segs = []
    start = 0
    for k in range(1, len(x)):
        if abs(x[k] - x[k - 1]) > np.pi:
            if k - start > 1:
                segs.append(np.column_stack([x[start:k], y[start:k]]))
            start = k
    if len(x) - start > 1:
        segs.append(np.column_stack([x[start:], y[start:]]))
    return segs


class _Canvas:
    def __init__(self, ymax: float):
        self.ymax = ymax
        usable_w = _W - 2 * _MARGIN
        self.scale = usable_w / TWO_PI
        self.height = int(2 * ymax * self.scale + 2 * _MARGIN)
        self.parts = []

    def to_screen(self, pts):
        sx = _MARGIN + pts[:, 0] * self.scale
        sy = _MARGIN + (self.ymax - pts[:, 1]) * self.scale
        return sx, sy

    def polyline(self, pts, stroke, width, dash=None):
        if len(pts) < 2:
            return
        sx, sy = self.to_screen(pts)
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx, sy))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{dash_attr}/>'
        )

    def text(self, x, y, s):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="monospace" font-size="12">{s}</text>'
        )

    def tostring(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{self.height}" '
            f'viewBox="0 0 {_W} {self.height}">\n'
            f'<rect width="{_W}" height="{self.height}" fill="white"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def render_contours(psi: ScalarField, orbits=(), path=None, n_levels: int = 20,
                    caption: str | None = None) -> str:
    """SVG of the flow: filled-channel outline, psi level curves, orbit overlays.

    Levels are the ``n_levels`` evenly spaced interior values between the
    field extremes.  Contractible orbits are stroked red, other traced
    orbits light blue.  Returns the SVG text; writes it to ``path`` when
    given.  Output is deterministic for fixed input.
    """
    g = psi.grid
    ymax = float(g.half_height * (1.0 + np.abs(g.profile.derivative(g.x, 0)).max()))
    canvas = _Canvas(ymax * 1.02)

    vmin = float(psi.values.min())
    vmax = float(psi.values.max())
    if vmax - vmin < 1e-300:
        levels = []
    else:
        levels = list(np.linspace(vmin, vmax, n_levels + 2)[1:-1])
    for lv in levels:
        for curve in extract_level_curves(psi, lv):
            for seg in _wrap_split(curve.points):
                canvas.polyline(seg, stroke="#555555", width=1.0)

    # walls (append the seam point to close the outline)
    xw = np.concatenate([g.x, [TWO_PI]])
    yw = g.half_height * (1.0 + g.profile.derivative(xw, 0))
    canvas.polyline(np.column_stack([xw, yw]), stroke="#000000", width=2.0)
    canvas.polyline(np.column_stack([xw, -yw]), stroke="#000000", width=2.0)

    for orb in orbits:
        color = "#cc2222" if getattr(orb, "contractible", False) else "#6699cc"
        width = 1.8 if getattr(orb, "contractible", False) else 1.1
        for seg in _wrap_split(orb.points):
            canvas.polyline(seg, stroke=color, width=width)

    if caption:
        canvas.text(_MARGIN, canvas.height - 6, caption)

    svg = canvas.tostring()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return svg
