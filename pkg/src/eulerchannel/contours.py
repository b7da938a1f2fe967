"""Level-curve extraction on channel grids (marching squares).

Works on the reference rectangle with periodic stitching across the x seam,
then maps vertices to physical coordinates.  Each extracted curve carries
its net x travel, so closed curves split into contractible loops
(``x_winding == 0``) and channel-wrapping ones.  Used by the SVG renderer
and as an independent cross-check of the orbit tracer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ChannelGrid, ScalarField, TWO_PI


@dataclass
class LevelCurve:
    """One stitched level-set polyline in physical coordinates.

    ``points[:, 0]`` is unwrapped x (continuous across the seam); ``closed``
    means the chain returned to its first cell edge.  ``x_winding`` is the
    net number of periods traversed (0 for contractible loops).
    """

    points: np.ndarray
    closed: bool
    x_winding: int

    @property
    def contractible(self) -> bool:
        return self.closed and self.x_winding == 0


def _edge_point(level, pa, va, pb, vb):
    t = (level - va) / (vb - va)
    return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))


# edge pairs entered by corner-occupancy code; corners sw=1, se=2, ne=4, nw=8
_CASES = {
    1: [("w", "s")], 2: [("s", "e")], 3: [("w", "e")], 4: [("e", "n")],
    6: [("s", "n")], 7: [("w", "n")], 8: [("n", "w")], 9: [("n", "s")],
    11: [("n", "e")], 12: [("e", "w")], 13: [("s", "e")], 14: [("w", "s")],
}


def _cell_segments(level, corners):
    """Edge pairs crossed by the level set in one cell.

    Saddle cases (5 and 10) are disambiguated by the cell-center average.
    """
    sw, se, ne, nw = corners
    code = int(sw > level) | (int(se > level) << 1) | (int(ne > level) << 2) | (int(nw > level) << 3)
    if code in (0, 15):
        return []
    if code == 5:  # sw and ne above
        center_above = 0.25 * (sw + se + ne + nw) > level
        return [("w", "n"), ("s", "e")] if center_above else [("w", "s"), ("e", "n")]
    if code == 10:  # se and nw above
        center_above = 0.25 * (sw + se + ne + nw) > level
        return [("w", "s"), ("e", "n")] if center_above else [("w", "n"), ("s", "e")]
    return _CASES[code]


def _edge_key(side, i, j, nx):
    if side == "s":
        return ("h", i % nx, j)
    if side == "n":
        return ("h", i % nx, j + 1)
    if side == "w":
        return ("v", i % nx, j)
    return ("v", (i + 1) % nx, j)


def extract_level_curves(field: ScalarField, level: float) -> list[LevelCurve]:
    """All level curves of a nodal field at one level, stitched and classified."""
    g = field.grid
    v = field.values
    nx, ny = g.shape
    osc = float(v.max() - v.min()) or 1.0
    if np.any(np.abs(v - level) < 1e-14 * osc):
        level = level + 1e-9 * osc  # dodge degenerate nodal crossings

    # prefilter cells whose corner range brackets the level
    vn = np.roll(v, -1, axis=0)
    c_min = np.minimum.reduce([v[:, :-1], vn[:, :-1], v[:, 1:], vn[:, 1:]])
    c_max = np.maximum.reduce([v[:, :-1], vn[:, :-1], v[:, 1:], vn[:, 1:]])
    hits = np.argwhere((c_min <= level) & (level <= c_max))

    seg_by_edge: dict = {}
    segments = []
    for i, j in hits:
        ip = (i + 1) % nx
        corners = (v[i, j], v[ip, j], v[ip, j + 1], v[i, j + 1])
        segs = _cell_segments(level, corners)
        if not segs:
            continue
        pts = {}
        sw, se, ne, nw = corners
        if (sw > level) != (se > level):
            pts["s"] = _edge_point(level, (0.0, 0.0), sw, (1.0, 0.0), se)
        if (se > level) != (ne > level):
            pts["e"] = _edge_point(level, (1.0, 0.0), se, (1.0, 1.0), ne)
        if (nw > level) != (ne > level):
            pts["n"] = _edge_point(level, (0.0, 1.0), nw, (1.0, 1.0), ne)
        if (sw > level) != (nw > level):
            pts["w"] = _edge_point(level, (0.0, 0.0), sw, (0.0, 1.0), nw)
        for a, b in segs:
            if a not in pts or b not in pts:
                continue
            pa = (i + pts[a][0], j + pts[a][1])
            pb = (i + pts[b][0], j + pts[b][1])
            ka = _edge_key(a, i, j, nx)
            kb = _edge_key(b, i, j, nx)
            idx = len(segments)
            segments.append((ka, kb, pa, pb))
            seg_by_edge.setdefault(ka, []).append(idx)
            seg_by_edge.setdefault(kb, []).append(idx)

    used = np.zeros(len(segments), dtype=bool)
    curves = []
    for start in range(len(segments)):
        if used[start]:
            continue
        pts, closed = _walk(start, segments, seg_by_edge, used)
        curves.append(_to_physical(g, pts, closed))
    return curves


def _walk(start, segments, seg_by_edge, used):
    """Follow edge-to-edge adjacency from one segment in both directions."""
    ka, kb, pa, pb = segments[start]
    used[start] = True
    pts = [pa, pb]
    ends = [ka, kb]
    closed = False
    for direction in (1, 0):
        while True:
            key = ends[direction]
            nxt = [s for s in seg_by_edge.get(key, []) if not used[s]]
            if not nxt:
                break
            s = nxt[0]
            used[s] = True
            sa, sb, qa, qb = segments[s]
            if sa == key:
                new_key, new_pt = sb, qb
            else:
                new_key, new_pt = sa, qa
            if direction == 1:
                pts.append(new_pt)
            else:
                pts.insert(0, new_pt)
            ends[direction] = new_key
            if ends[0] == ends[1]:
                closed = True
                break
        if closed:
            break
    return pts, closed


def _to_physical(grid: ChannelGrid, ref_pts, closed) -> LevelCurve:
    arr = np.asarray(ref_pts, dtype=float)
    nx = grid.nx
    # unwrap the x index coordinate (cells wrap at nx)
    xi = arr[:, 0]
    dxs = np.diff(xi)
    dxs = np.where(dxs > nx / 2, dxs - nx, dxs)
    dxs = np.where(dxs < -nx / 2, dxs + nx, dxs)
    xi = np.concatenate([[xi[0]], xi[0] + np.cumsum(dxs)])
    x = xi * grid.dx
    eta = grid.eta[0] + arr[:, 1] * grid.deta
    yscale = grid.half_height * (1.0 + grid.profile.derivative(np.mod(x, TWO_PI), 0))
    y = eta * yscale
    winding = int(np.round((x[-1] - x[0]) / TWO_PI)) if closed else 0
    return LevelCurve(points=np.column_stack([x, y]), closed=closed, x_winding=winding)


def curve_through_point(field: ScalarField, x: float, y: float) -> LevelCurve:
    """The level curve passing (nearest) through a given physical point."""
    from .topology import FieldInterpolant  # local import to avoid a cycle

    interp = FieldInterpolant(field)
    level = float(interp.value(x, y))
    curves = extract_level_curves(field, level)
    if not curves:
        raise ValueError("no level curve found at this level")

    def dist(curve):
        dx = np.mod(curve.points[:, 0] - x + np.pi, TWO_PI) - np.pi
        return float(np.min(np.hypot(dx, curve.points[:, 1] - y)))

    return min(curves, key=dist)
