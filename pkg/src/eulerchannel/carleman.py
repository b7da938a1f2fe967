"""Weighted-estimate diagnostics on the upper half-channel.

Validates the machinery behind the unique-continuation step: the
conjugated-operator splitting

    e^{s phi} lap (e^{-s phi} w) = A w + B w ,
    A = lap + s^2 |grad phi|^2 ,     B = -s (2 grad phi . grad + lap phi) ,

the pointwise divergence identity ``2 Aw Bw = div T + K``, and the
quadratic-growth lower bound ``||e^{s phi} lap e^{-s phi} w||^2 >=
C s^2 ||w||^2`` for compactly supported w, with the exponential weight
``phi = exp(steepness * phi0)``, ``phi0 = 1 + h(x) - y``.

All weight derivatives are analytic (closed forms from the Fourier wall
profile), so identity residuals isolate the discretization error of the
test function alone.  The conjugation strength ``s`` enters the expanded
forms polynomially; nothing ever exponentiates ``s * phi``, which keeps
large-strength sweeps overflow-free (the direct exponentiated evaluation
is conjugation-shift invariant and only safe at moderate strength).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryProfile, ChannelGrid, ScalarField, TWO_PI
from .operators import apply_operator, gradient, laplacian

# exponent budget for exp(steepness * max phi0); beyond this the weight itself overflows
_EXP_BUDGET = 700.0


def upper_half_grid(profile: BoundaryProfile, nx: int, ny: int) -> ChannelGrid:
    """Grid over the upper half-channel 0 <= y <= 1 + h(x) (eta in [0, 1])."""
    if profile.max_abs() >= 1.0:
        raise ValueError("profile violates |h| < 1")
    return ChannelGrid(profile, nx, np.linspace(0.0, 1.0, ny), half_height=1.0)


class CarlemanWeight:
    """Exponential weight and its closed-form derivatives on a half-channel grid.

    ``base = 1 + h(x) - y`` is nonnegative with unit vertical slope, and
    ``values = exp(steepness * base) >= 1`` with equality on the top wall.
    Gradients, Hessians, bi-Laplacian all come from term-by-term derivatives
    of the wall series; nothing is finite-differenced.
    """

    def __init__(self, grid: ChannelGrid, steepness: float = 2.0):
        if grid.half_height != 1.0:
            raise ValueError("weight is defined on the unit-height half-channel")
        if steepness * (1.0 + grid.profile.max_abs()) > _EXP_BUDGET:
            raise OverflowError("steepness * max(base) exceeds the double-precision budget")
        self.grid = grid
        self.steepness = float(steepness)
        X, Y = grid.meshes()
        self._X, self._Y = X, Y
        p = grid.profile
        self._h = p.derivative(grid.x, 0)[:, None] + 0.0 * Y
        self._h1 = p.derivative(grid.x, 1)[:, None] + 0.0 * Y
        self._h2 = p.derivative(grid.x, 2)[:, None] + 0.0 * Y
        self._h3 = p.derivative(grid.x, 3)[:, None] + 0.0 * Y
        self._h4 = p.derivative(grid.x, 4)[:, None] + 0.0 * Y
        self.base = ScalarField(grid, 1.0 + self._h - Y)
        self.values = ScalarField(grid, np.exp(self.steepness * self.base.values))

    # -- closed-form derivative fields (nodal arrays) -----------------------

    def grad(self):
        """(d/dx, d/dy) of the weight: steepness * weight * grad(base)."""
        lam = self.steepness
        phi = self.values.values
        return lam * self._h1 * phi, -lam * phi

    def grad_sq(self):
        lam = self.steepness
        phi = self.values.values
        return lam**2 * (1.0 + self._h1**2) * phi**2

    def hessian(self):
        """(xx, xy, yy) of the weight."""
        lam = self.steepness
        phi = self.values.values
        hxx = lam * (self._h2 + lam * self._h1**2) * phi
        hxy = -(lam**2) * self._h1 * phi
        hyy = lam**2 * phi
        return hxx, hxy, hyy

    def _g(self):
        # lap phi = g * phi with g a function of x only
        lam = self.steepness
        return lam * (self._h2 + lam * (1.0 + self._h1**2))

    def lap(self):
        return self._g() * self.values.values

    def bilap(self):
        """lap(lap phi) via lap(g phi) = (g_xx + 2 lam g_x h' + g^2) phi."""
        lam = self.steepness
        g = self._g()
        g_x = lam * (self._h3 + 2 * lam * self._h1 * self._h2)
        g_xx = lam * (self._h4 + 2 * lam * (self._h2**2 + self._h1 * self._h3))
        return (g_xx + 2 * lam * g_x * self._h1 + g**2) * self.values.values

    def grad_lap(self):
        """gradient of lap phi: phi * (g_x + lam g h', -lam g)."""
        lam = self.steepness
        g = self._g()
        g_x = lam * (self._h3 + 2 * lam * self._h1 * self._h2)
        phi = self.values.values
        return (g_x + lam * g * self._h1) * phi, -lam * g * phi


_COLLAR = 3  # nodes forced to zero at each eta boundary


@dataclass
class TestFunction:
    """Compactly supported smooth field on the half-channel grid.

    The nodal values vanish on a collar of at least two cells at both eta
    boundaries, so one-sided gradients vanish on the walls too.
    """

    field: ScalarField

    def __post_init__(self):
        v = self.field.values
        if np.any(v[:, :_COLLAR] != 0.0) or np.any(v[:, -_COLLAR:] != 0.0):
            raise ValueError(
                f"test function must vanish on a {_COLLAR}-node collar at the eta boundaries"
            )

    @property
    def grid(self):
        return self.field.grid


@dataclass(frozen=True)
class BumpSpec:
    """Closed-form compactly supported bump, resolution-independent.

    w(x, eta) = bump((eta - lo)/(hi - lo)) * sum_k (a_k cos kx + b_k sin kx)
    with an infinitely flat bump (exact zeros outside the eta band).
    """

    eta_lo: float = 0.15
    eta_hi: float = 0.85
    cos_amps: tuple[float, ...] = (1.0,)
    sin_amps: tuple[float, ...] = ()
    offset: float = 0.0

    def __call__(self, x, eta):
        x = np.asarray(x, dtype=float)
        eta = np.asarray(eta, dtype=float)
        t = (eta - self.eta_lo) / (self.eta_hi - self.eta_lo)
        prof = np.full(np.broadcast(x, eta).shape, self.offset)
        for k, a in enumerate(self.cos_amps, start=1):
            prof = prof + a * np.cos(k * x)
        for k, b in enumerate(self.sin_amps, start=1):
            prof = prof + b * np.sin(k * x)
        return _flat_bump(t) * prof

    def sample(self, grid: ChannelGrid) -> TestFunction:
        X = grid.x[:, None] + 0.0 * grid.eta[None, :]
        E = grid.eta[None, :] + 0.0 * grid.x[:, None]
        return TestFunction(ScalarField(grid, self(X, E)))


def _flat_bump(t):
    """C-infinity bump: exp(4 - 1/t - 1/(1-t)) on (0, 1), exactly 0 outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(4.0 - 1.0 / ti - 1.0 / (1.0 - ti))
    return out


def smooth_step(z):
    """C-infinity step: exactly 0 for z <= 0, exactly 1 for z >= 1."""
    z = np.asarray(z, dtype=float)
    lo = np.where(z > 0.0, z, 1.0)
    hi = np.where(z < 1.0, 1.0 - z, 1.0)
    s_lo = np.where(z > 0.0, np.exp(-1.0 / lo), 0.0)
    s_hi = np.where(z < 1.0, np.exp(-1.0 / hi), 0.0)
    return np.where(z <= 0.0, 0.0, np.where(z >= 1.0, 1.0, s_lo / (s_lo + s_hi)))


def random_bump(rng, n_modes: int = 2, eta_lo: float = 0.15, eta_hi: float = 0.85) -> BumpSpec:
    """Seeded random smooth test function spec (low mode count keeps the
    asymptotic refinement regime reachable on coarse grids)."""
    cos_amps = tuple(rng.uniform(-1.0, 1.0, n_modes))
    sin_amps = tuple(rng.uniform(-1.0, 1.0, n_modes))
    offset = float(rng.uniform(0.5, 1.5))
    return BumpSpec(eta_lo=eta_lo, eta_hi=eta_hi, cos_amps=cos_amps,
                    sin_amps=sin_amps, offset=offset)


# -- operators ---------------------------------------------------------------


def conjugated_parts(w: TestFunction, weight: CarlemanWeight, strength: float,
                     lap_op=None) -> tuple[ScalarField, ScalarField]:
    """The splitting (A w, B w) of the conjugated Laplacian at strength s.

    ``A w = lap w + s^2 |grad phi|^2 w`` (discrete Laplacian of w, analytic
    weight factors); ``B w = -s (2 grad phi . grad w + lap phi w)``.
    """
    grid = w.grid
    if grid is not weight.grid and grid.shape != weight.grid.shape:
        raise ValueError("test function and weight live on different grids")
    L = laplacian(grid) if lap_op is None else lap_op
    wv = w.field.values
    lap_w = apply_operator(L, w.field).values
    a = lap_w + strength**2 * weight.grad_sq() * wv
    wx, wy = gradient(w.field)
    px, py = weight.grad()
    b = -strength * (2.0 * (px * wx.values + py * wy.values) + weight.lap() * wv)
    return ScalarField(grid, a), ScalarField(grid, b)


def conjugated_operator(w: TestFunction, weight: CarlemanWeight, strength: float,
                        lap_op=None) -> ScalarField:
    """e^{s phi} lap(e^{-s phi} w) via the expanded form A w + B w.

    Never exponentiates ``s * phi``; valid at any strength for which the
    weight itself is representable.  ``strength = 0`` returns the plain
    discrete Laplacian of w.
    """
    a, b = conjugated_parts(w, weight, strength, lap_op=lap_op)
    return ScalarField(w.grid, a.values + b.values)


@dataclass
class IdentityCheck:
    """Pointwise residual of the divergence identity and the wall flux of T."""

    residual: float
    boundary_flux: float


def divergence_identity_residual(w: TestFunction, weight: CarlemanWeight,
                                 strength: float, lap_op=None) -> IdentityCheck:
    """Residual of ``2 Aw Bw = div T + K`` at interior nodes.

    K and the weight factors of T are analytic; derivatives of w and the
    divergence of T are discrete, so the residual decays at second order
    under grid refinement.  The wall flux of T vanishes identically for
    collar-supported w.
    """
    grid = w.grid
    s = float(strength)
    a, b = conjugated_parts(w, weight, s, lap_op=lap_op)
    wv = w.field.values
    wx, wy = (f.values for f in gradient(w.field))
    px, py = weight.grad()
    hxx, hxy, hyy = weight.hessian()
    lap_phi = weight.lap()
    glx, gly = weight.grad_lap()
    gp2 = weight.grad_sq()

    K = (
        4 * s * (hxx * wx**2 + 2 * hxy * wx * wy + hyy * wy**2)
        + 4 * s**3 * (hxx * px**2 + 2 * hxy * px * py + hyy * py**2) * wv**2
        - s * weight.bilap() * wv**2
    )
    dot = px * wx + py * wy
    grad_w_sq = wx**2 + wy**2
    T1 = -2 * s * (2 * wx * dot - px * grad_w_sq + lap_phi * wx * wv
                   - 0.5 * wv**2 * glx + s**2 * gp2 * px * wv**2)
    T2 = -2 * s * (2 * wy * dot - py * grad_w_sq + lap_phi * wy * wv
                   - 0.5 * wv**2 * gly + s**2 * gp2 * py * wv**2)
    t1x, _ = gradient(ScalarField(grid, T1))
    _, t2y = gradient(ScalarField(grid, T2))
    div_T = t1x.values + t2y.values

    lhs = 2.0 * a.values * b.values
    resid = float(np.max(np.abs(lhs - div_T - K)[:, 1:-1]))

    # wall flux: top normal (-h', 1)dx, bottom (flat y=0) normal (0, -1)dx
    hp = grid.yscale_p
    top = np.sum(-hp * T1[:, -1] + T2[:, -1]) * grid.dx
    bottom = np.sum(-T2[:, 0]) * grid.dx
    return IdentityCheck(residual=resid, boundary_flux=float(top + bottom))


@dataclass
class SweepPoint:
    strength: float
    lhs: float
    scaled_mass: float  # strength^2 * ||w||^2
    ratio: float

    @property
    def log_lhs(self) -> float:
        return float(np.log(self.lhs)) if self.lhs > 0 else float("-inf")


def carleman_ratio_sweep(w: TestFunction, weight: CarlemanWeight, strengths) -> list[SweepPoint]:
    """Quadrature of ||e^{s phi} lap e^{-s phi} w||^2 against s^2 ||w||^2.

    The lower-bound constant of the estimate is the infimum of the reported
    ratios; for w = 0 the ratios are NaN (skipped).  Expanded-form
    evaluation keeps every strength in range.
    """
    grid = w.grid
    qw = grid.quadrature_weights()
    mass = float(np.sum(qw * w.field.values**2))
    L = laplacian(grid)
    out = []
    for s in strengths:
        s = float(s)
        conj = conjugated_operator(w, weight, s, lap_op=L)
        lhs = float(np.sum(qw * conj.values**2))
        scaled = s**2 * mass
        ratio = lhs / scaled if scaled > 0 else float("nan")
        out.append(SweepPoint(strength=s, lhs=lhs, scaled_mass=scaled, ratio=ratio))
    return out


def build_cutoff(grid: ChannelGrid, weight: CarlemanWeight, c: float) -> ScalarField:
    """Cutoff ``chi((phi - 1)/c)``: exactly 1 where phi >= 1 + c, exactly 0
    where phi <= 1 + c/2, C-infinity between (vanishes near the top wall)."""
    if c <= 0:
        raise ValueError("cutoff width must be positive")
    z = (weight.values.values - 1.0) / c
    return ScalarField(grid, smooth_step(2.0 * z - 1.0))


def unique_continuation_decay(strengths, c: float) -> list[tuple[float, float]]:
    """Reported decay factors exp(-s c) driving the continuation argument."""
    return [(float(s), float(np.exp(-float(s) * c))) for s in strengths]


def collar_mask(grid: ChannelGrid, margin: float | None = None) -> np.ndarray:
    """Smooth mask vanishing (to all orders) within ``margin`` of both walls.

    The default margin keeps at least a three-node collar exactly zero on
    the given grid.
    """
    if margin is None:
        margin = max(0.12, 4.5 * grid.deta)
    eta = grid.eta[None, :] + 0.0 * grid.x[:, None]
    lo = smooth_step((eta - 0.5 * margin) / margin)
    hi = smooth_step((1.0 - eta - 0.5 * margin) / margin)
    return lo * hi
