"""Streamline topology: critical points, orbit tracing, island inventory.

The classifier works on a smooth interpolant of the nodal streamfunction
(bicubic spline in reference coordinates, chain-ruled to physical space).
Velocities are derived from that same interpolant, so the traced flow
conserves the interpolated streamfunction exactly in continuous time and
the recorded level drift measures only integration error.

Orbits are integrated with fixed-step fourth-order Runge-Kutta on the unit
tangent field (same streamlines, arc-length parametrization), which makes
closure detection a simple ball test around the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .geometry import ChannelGrid, ScalarField, TWO_PI
from .operators import gradient

_PAD = 8  # wraparound columns providing smooth spline support at the seam


class FieldInterpolant:
    """C2 evaluation of a nodal field and its physical derivatives anywhere.

    Spline interpolation happens on the reference rectangle; physical x/y
    derivatives come from the analytic map metric, so a streamfunction's
    interpolated velocity is exactly divergence-free for the interpolated
    surface.
    """

    def __init__(self, fld: ScalarField):
        g = fld.grid
        self.grid = g
        v = fld.values
        xpad = np.concatenate([g.x[-_PAD:] - TWO_PI, g.x, g.x[:_PAD] + TWO_PI])
        vpad = np.concatenate([v[-_PAD:], v, v[:_PAD]], axis=0)
        self._s = RectBivariateSpline(xpad, g.eta, vpad, kx=3, ky=3, s=0)
        self._eta_min = g.eta[0]
        self._eta_max = g.eta[-1]

    def _ref(self, x, y):
        xm = np.mod(x, TWO_PI)
        prof = self.grid.profile
        Y = self.grid.half_height * (1.0 + prof.derivative(xm, 0))
        Yp = self.grid.half_height * prof.derivative(xm, 1)
        eta = np.clip(np.asarray(y, dtype=float) / Y, self._eta_min, self._eta_max)
        return xm, eta, Y, Yp

    def value(self, x, y):
        xm, eta, _, _ = self._ref(x, y)
        return self._s.ev(xm, eta)

    def grad(self, x, y):
        """Physical (d/dx, d/dy)."""
        xm, eta, Y, Yp = self._ref(x, y)
        se = self._s.ev(xm, eta, dy=1)
        sx = self._s.ev(xm, eta, dx=1)
        return sx - (eta * Yp / Y) * se, se / Y

    def velocity(self, x, y):
        """(-d/dy, d/dx) of the interpolated streamfunction."""
        px, py = self.grad(x, y)
        return -py, px

    def hessian(self, x, y):
        """Physical second derivatives (xx, xy, yy) by the chain rule."""
        xm, eta, Y, Yp = self._ref(x, y)
        Ypp = self.grid.half_height * self.grid.profile.derivative(xm, 2)
        se = self._s.ev(xm, eta, dy=1)
        see = self._s.ev(xm, eta, dy=2)
        sxe = self._s.ev(xm, eta, dx=1, dy=1)
        sxx = self._s.ev(xm, eta, dx=2)
        hyy = see / Y**2
        hxy = sxe / Y - (Yp / Y**2) * (se + eta * see)
        hxx = (
            sxx
            - 2.0 * (eta * Yp / Y) * sxe
            + (eta**2 * Yp**2 / Y**2) * see
            + eta * (2.0 * Yp**2 / Y**2 - Ypp / Y) * se
        )
        return hxx, hxy, hyy


# -- critical points ---------------------------------------------------------


@dataclass
class CriticalPoint:
    position: tuple[float, float]
    kind: str  # 'elliptic' | 'hyperbolic' | 'degenerate'
    psi_value: float
    hessian_det: float
    converged: bool = True


@dataclass
class CriticalLine:
    """A stagnation line along a whole grid row (eta = const) of vanishing gradient."""

    eta: float
    y_at_seam: float
    max_speed: float


@dataclass
class CriticalSet:
    points: list[CriticalPoint]
    lines: list[CriticalLine]

    def count(self, kind: str) -> int:
        return sum(1 for p in self.points if p.kind == kind)


def find_critical_points(psi: ScalarField, grad_tol: float = 1e-10,
                         interp: FieldInterpolant | None = None) -> CriticalSet:
    """Locate and classify stagnation points of the interpolated field.

    Grid cells where both gradient components change sign seed a 2-D Newton
    refinement of ``grad psi = 0``; converged roots are deduplicated within
    one cell diameter and classified by the Hessian determinant.  Candidate
    rows covering more than half the period collapse to a CriticalLine
    (shear flows stagnate on whole lines, not points).  Newton failures
    that still sit at a small gradient are kept, flagged degenerate.
    """
    g = psi.grid
    interp = interp or FieldInterpolant(psi)
    gx, gy = gradient(psi)
    ax, ay = gx.values, gy.values
    scale = max(float(np.hypot(ax, ay).max()), 1e-300)

    def straddles(a):
        an = np.roll(a, -1, axis=0)
        cmin = np.minimum.reduce([a[:, :-1], an[:, :-1], a[:, 1:], an[:, 1:]])
        cmax = np.maximum.reduce([a[:, :-1], an[:, :-1], a[:, 1:], an[:, 1:]])
        return (cmin <= 0.0) & (cmax >= 0.0)

    cand = straddles(ax) & straddles(ay)

    # whole-row clusters = stagnation lines
    lines = []
    line_rows = set()
    row_counts = cand.sum(axis=0)
    for j in np.nonzero(row_counts > 0.5 * g.nx)[0]:
        for jr in (j, j + 1):
            speeds = np.hypot(ax[:, jr], ay[:, jr])
            if speeds.max() < 1e-8 * scale and jr not in line_rows:
                line_rows.add(jr)
                lines.append(
                    CriticalLine(
                        eta=float(g.eta[jr]),
                        y_at_seam=float(g.eta[jr] * g.yscale[0]),
                        max_speed=float(speeds.max()),
                    )
                )
    if line_rows:
        keep_rows = np.array([j for j in range(g.ny - 1)
                              if j not in line_rows and j + 1 not in line_rows])
        mask = np.zeros_like(cand)
        if keep_rows.size:
            mask[:, keep_rows] = cand[:, keep_rows]
        cand = mask

    cells = np.argwhere(cand)
    ymax = g.half_height * (1.0 + np.abs(g.profile.derivative(g.x, 0))).max()
    cell_diam = float(np.hypot(g.dx, g.deta * ymax))

    raw = []
    for i, j in cells:
        x0 = g.x[i] + 0.5 * g.dx
        e0 = g.eta[j] + 0.5 * g.deta
        p = np.array([x0, e0 * g.half_height * (1.0 + g.profile.derivative(x0, 0))])
        ok = False
        for _ in range(40):
            dxv, dyv = interp.grad(p[0], p[1])
            gn = float(np.hypot(dxv, dyv))
            if gn < grad_tol * max(scale, 1.0):
                ok = True
                break
            hxx, hxy, hyy = interp.hessian(p[0], p[1])
            det = hxx * hyy - hxy * hxy
            if abs(det) < 1e-300:
                break
            step = np.array(
                [(hyy * dxv - hxy * dyv) / det, (-hxy * dxv + hxx * dyv) / det]
            ).ravel()
            if np.hypot(*step) > 4 * cell_diam:
                step *= 4 * cell_diam / np.hypot(*step)
            p = p - step
            ylim = interp.grid.half_height * (1.0 + g.profile.derivative(np.mod(p[0], TWO_PI), 0))
            p[1] = np.clip(p[1], -ylim, ylim)
        dxv, dyv = interp.grad(p[0], p[1])
        gn = float(np.hypot(dxv, dyv))
        if ok:
            raw.append((p[0] % TWO_PI, p[1], gn, True))
        elif gn < 1e-4 * scale:
            raw.append((p[0] % TWO_PI, p[1], gn, False))

    # deduplicate within one cell diameter (wrapped x metric), keep best
    raw.sort(key=lambda r: r[2])
    accepted = []
    for x, y, gn, ok in raw:
        dup = False
        for ax_, ay_, _, _ in accepted:
            dxw = (x - ax_ + np.pi) % TWO_PI - np.pi
            if np.hypot(dxw, y - ay_) < cell_diam:
                dup = True
                break
        if not dup:
            accepted.append((x, y, gn, ok))

    points = []
    for x, y, gn, ok in accepted:
        hxx, hxy, hyy = (float(v) for v in interp.hessian(x, y))
        det = hxx * hyy - hxy * hxy
        hnorm = hxx * hxx + 2 * hxy * hxy + hyy * hyy
        if not ok or abs(det) < 1e-8 * max(hnorm, 1e-30):
            kind = "degenerate"
        elif det > 0:
            kind = "elliptic"
        else:
            kind = "hyperbolic"
        points.append(
            CriticalPoint(
                position=(float(x), float(y)),
                kind=kind,
                psi_value=float(interp.value(x, y)),
                hessian_det=float(det),
                converged=ok,
            )
        )
    return CriticalSet(points=points, lines=lines)


# -- orbit tracing -----------------------------------------------------------


@dataclass
class Orbit:
    """A traced streamline; ``points[:, 0]`` is unwrapped x."""

    seed: tuple[float, float]
    points: np.ndarray = field(repr=False)
    closed: bool
    x_winding: int
    status: str  # 'closed' | 'stagnation' | 'max_steps'
    level_drift: float

    @property
    def contractible(self) -> bool:
        return self.closed and self.x_winding == 0


class StagnationSeedError(ValueError):
    """Seed speed below the stagnation threshold; orbit undefined."""


def default_step(grid: ChannelGrid) -> float:
    ymin = grid.half_height * (1.0 - np.abs(grid.profile.derivative(grid.x, 0))).min()
    return float(min(grid.dx, grid.deta * abs(ymin)) / 4.0)


def trace_orbits(interp: FieldInterpolant, seeds, step: float | None = None,
                 max_steps: int = 20000, stagnation_tol: float | None = None) -> list[Orbit]:
    """Trace many orbits in lockstep (vectorized RK4 on the unit tangent field).

    Each orbit stops on closure (re-entering a ball of radius ``2*step``
    around its seed after having left it), on stagnation (speed below
    ``stagnation_tol``), or on exhausting ``max_steps``.
    """
    g = interp.grid
    h = default_step(g) if step is None else float(step)
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    n = len(seeds)
    if stagnation_tol is None:
        gx, gy = interp.grad(g.x[:, None] * np.ones((1, g.ny)), g.physical_y())
        stagnation_tol = 1e-5 * float(np.hypot(gx, gy).max())

    closure_tol = 2.0 * h
    pos = seeds.copy()
    active = np.ones(n, dtype=bool)
    armed = np.zeros(n, dtype=bool)
    status = np.array(["max_steps"] * n, dtype=object)
    winding = np.zeros(n, dtype=int)
    traj = [seeds.copy()]
    n_steps = np.zeros(n, dtype=int)

    def vel_unit(p, alive):
        u1, u2 = interp.velocity(p[alive, 0], p[alive, 1])
        sp = np.hypot(u1, u2)
        bad = sp < stagnation_tol
        sp_safe = np.where(sp > 0, sp, 1.0)
        return np.column_stack([u1 / sp_safe, u2 / sp_safe]), bad

    for it in range(max_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        p0 = pos[idx]
        k1, bad = vel_unit(pos, active)
        if bad.any():
            status[idx[bad]] = "stagnation"
            active[idx[bad]] = False
            idx = idx[~bad]
            if idx.size == 0:
                traj.append(pos.copy())
                continue
            p0 = pos[idx]
            k1 = k1[~bad]

        def stage(base, kk, frac):
            q = base + frac * h * kk
            u1, u2 = interp.velocity(q[:, 0], q[:, 1])
            sp = np.hypot(u1, u2)
            sp = np.where(sp > 0, sp, 1.0)
            return np.column_stack([u1 / sp, u2 / sp])

        k2 = stage(p0, k1, 0.5)
        k3 = stage(p0, k2, 0.5)
        k4 = stage(p0, k3, 1.0)
        pnew = p0 + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        # stay inside the (interpolated) channel
        ylim = g.half_height * (1.0 + g.profile.derivative(np.mod(pnew[:, 0], TWO_PI), 0))
        pnew[:, 1] = np.clip(pnew[:, 1], -ylim, ylim)
        pos[idx] = pnew
        n_steps[idx] = it + 1

        dxw = (pnew[:, 0] - seeds[idx, 0] + np.pi) % TWO_PI - np.pi
        dist = np.hypot(dxw, pnew[:, 1] - seeds[idx, 1])
        newly_armed = dist > 2.0 * closure_tol
        armed[idx[newly_armed]] = True
        closing = armed[idx] & (dist < closure_tol)
        if closing.any():
            ci = idx[closing]
            status[ci] = "closed"
            winding[ci] = np.round((pos[ci, 0] - seeds[ci, 0]) / TWO_PI).astype(int)
            active[ci] = False
        traj.append(pos.copy())

    traj = np.asarray(traj)  # (steps+1, n, 2)
    orbits = []
    for k in range(n):
        m = n_steps[k] + 1
        pts = traj[:m, k, :]
        lev = interp.value(np.mod(pts[:, 0], TWO_PI), pts[:, 1])
        drift = float(np.max(np.abs(lev - lev[0]))) if len(lev) else 0.0
        closed = status[k] == "closed"
        orbits.append(
            Orbit(
                seed=(float(seeds[k, 0]), float(seeds[k, 1])),
                points=pts.copy(),
                closed=bool(closed),
                x_winding=int(winding[k]),
                status=str(status[k]),
                level_drift=drift,
            )
        )
    return orbits


def trace_orbit(psi: ScalarField | FieldInterpolant, seed, step: float | None = None,
                max_steps: int = 20000, stagnation_tol: float | None = None) -> Orbit:
    """Trace a single orbit; raises StagnationSeedError on a stagnant seed."""
    interp = psi if isinstance(psi, FieldInterpolant) else FieldInterpolant(psi)
    if stagnation_tol is None:
        g = interp.grid
        gx, gy = interp.grad(g.x[:, None] * np.ones((1, g.ny)), g.physical_y())
        stagnation_tol = 1e-5 * float(np.hypot(gx, gy).max())
    u1, u2 = interp.velocity(np.mod(seed[0], TWO_PI), seed[1])
    if float(np.hypot(u1, u2)) <= stagnation_tol:
        raise StagnationSeedError(f"seed speed {float(np.hypot(u1, u2)):.3e} below threshold")
    return trace_orbits(interp, [seed], step=step, max_steps=max_steps,
                        stagnation_tol=stagnation_tol)[0]


# -- whole-flow classification -------------------------------------------------


def symmetry_residual(psi: ScalarField) -> float:
    """Max nodal asymmetry |psi(x, y) - psi(x, -y)| (exact array reflection)."""
    v = psi.values
    return float(np.max(np.abs(v - v[:, ::-1])))


def _point_in_polygon(x, y, poly):
    """Even-odd ray casting; poly is an (n, 2) closed-or-not polyline."""
    px = poly[:, 0]
    py = poly[:, 1]
    qx = np.roll(px, -1)
    qy = np.roll(py, -1)
    crosses = ((py > y) != (qy > y)) & (x < px + (y - py) * (qx - px) / np.where(qy != py, qy - py, 1e-300))
    return bool(np.sum(crosses) % 2)


def orbit_encloses(orbit: Orbit, x, y) -> bool:
    """Whether a (contractible, closed) orbit's polygon contains the point,
    comparing against the x image nearest the orbit."""
    poly = orbit.points
    cx = 0.5 * (poly[:, 0].min() + poly[:, 0].max())
    xs = x + TWO_PI * np.round((cx - x) / TWO_PI)
    return _point_in_polygon(xs, y, poly)


@dataclass
class TopologyReport:
    critical_points: list[CriticalPoint]
    critical_lines: list[CriticalLine]
    islands: int
    island_orbits: list[Orbit]
    wrapping_orbits: int
    symmetry_residual: float
    centerline_test: list[tuple[tuple[float, float], float, str]]
    elliptic_count: int
    hyperbolic_count: int

    @property
    def index_balanced(self) -> bool:
        """Diagnostic only: isolated elliptic and hyperbolic counts agree."""
        return self.elliptic_count == self.hyperbolic_count


def centerline_island_test(solution, n_samples: int = 32, stagnation_tol: float | None = None,
                           interp: FieldInterpolant | None = None, step: float | None = None,
                           max_steps: int = 20000, sym_tol: float = 1e-6):
    """Classify the orbit through each centerline sample (the closed-streamline test).

    Samples sit at half-cell offsets on y = 0.  Entries are
    ``((x, 0.0), |u2|, classification)`` with classification one of
    'stagnant', 'contractible', 'wrapping', 'stagnation_adjacent' (the
    trace ran into a critical point) or 'unresolved' (step budget).
    Requires a reflection-symmetric solution.
    """
    psi = solution.psi
    sres = symmetry_residual(psi)
    osc = float(psi.values.max() - psi.values.min()) or 1.0
    if sres > sym_tol * max(1.0, osc):
        raise ValueError(f"solution is not reflection-symmetric (residual {sres:.3e})")
    interp = interp or FieldInterpolant(psi)
    g = psi.grid
    if stagnation_tol is None:
        u1, u2 = interp.velocity(g.x[:, None] * np.ones((1, g.ny)), g.physical_y())
        stagnation_tol = 1e-5 * float(np.hypot(u1, u2).max())

    xs = (np.arange(n_samples) + 0.5) * TWO_PI / n_samples
    u1, u2 = interp.velocity(xs, np.zeros(n_samples))
    speeds = np.abs(u2)
    seeds = [(x, 0.0) for x, s in zip(xs, speeds) if s > stagnation_tol]
    orbits = trace_orbits(interp, seeds, step=step, max_steps=max_steps,
                          stagnation_tol=stagnation_tol) if seeds else []
    results = []
    oi = iter(orbits)
    for x, s in zip(xs, speeds):
        if s <= stagnation_tol:
            results.append(((float(x), 0.0), float(s), "stagnant"))
            continue
        orb = next(oi)
        if orb.closed:
            cls = "contractible" if orb.x_winding == 0 else "wrapping"
        elif orb.status == "stagnation":
            cls = "stagnation_adjacent"
        else:
            cls = "unresolved"
        results.append(((float(x), 0.0), float(s), cls))
    return results


def classify_flow(solution, n_centerline: int = 32, seed_grid: tuple[int, int] = (12, 9),
                  step: float | None = None, max_steps: int = 20000,
                  stagnation_tol: float | None = None) -> TopologyReport:
    """Full streamline-topology survey of a converged solution.

    Runs the critical-point search, traces a stratified family of orbits
    (centerline plus an interior seed lattice), and counts islands as the
    distinct elliptic centers enclosed by at least one contractible closed
    orbit.
    """
    psi = solution.psi
    g = psi.grid
    interp = FieldInterpolant(psi)
    crit = find_critical_points(psi, interp=interp)

    if stagnation_tol is None:
        u1g, u2g = interp.velocity(g.x[:, None] * np.ones((1, g.ny)), g.physical_y())
        stagnation_tol = 1e-5 * float(np.hypot(u1g, u2g).max())

    # stratified seeds: centerline + interior lattice, skipping stagnant spots
    nsx, nsy = seed_grid
    xs = (np.arange(nsx) + 0.5) * TWO_PI / nsx
    etas = np.linspace(-0.9, 0.9, nsy)
    Xs, Es = np.meshgrid(xs, etas, indexing="ij")
    Ys = Es * g.half_height * (1.0 + g.profile.derivative(Xs, 0))
    lattice = np.column_stack([Xs.ravel(), Ys.ravel()])
    xc = (np.arange(n_centerline) + 0.5) * TWO_PI / n_centerline
    seeds = np.vstack([np.column_stack([xc, np.zeros(n_centerline)]), lattice])
    u1, u2 = interp.velocity(seeds[:, 0], seeds[:, 1])
    seeds = seeds[np.hypot(u1, u2) > stagnation_tol]

    orbits = trace_orbits(interp, seeds, step=step, max_steps=max_steps,
                          stagnation_tol=stagnation_tol)
    contractible = [o for o in orbits if o.contractible]
    wrapping = [o for o in orbits if o.closed and o.x_winding != 0]

    island_orbits = []
    enclosed = set()
    for k, cp in enumerate(crit.points):
        if cp.kind != "elliptic":
            continue
        for o in contractible:
            if orbit_encloses(o, cp.position[0], cp.position[1]):
                enclosed.add(k)
                island_orbits.append(o)
                break

    centerline = centerline_island_test(
        solution, n_samples=n_centerline, stagnation_tol=stagnation_tol,
        interp=interp, step=step, max_steps=max_steps, sym_tol=np.inf,
    )

    return TopologyReport(
        critical_points=crit.points,
        critical_lines=crit.lines,
        islands=len(enclosed),
        island_orbits=island_orbits,
        wrapping_orbits=len(wrapping),
        symmetry_residual=symmetry_residual(psi),
        centerline_test=centerline,
        elliptic_count=crit.count("elliptic"),
        hyperbolic_count=crit.count("hyperbolic"),
    )
