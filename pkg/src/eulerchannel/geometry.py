"""Channel geometry: wall profiles, mapped tensor grids, nodal scalar fields.

The physical domain is a periodic channel whose walls are mirror images of
each other,

    x in [0, 2*pi),   -(1 + h(x)) <= y <= 1 + h(x),

with ``h`` a truncated Fourier series satisfying ``|h| < 1``.  All
computations happen on the reference rectangle ``[0, 2*pi) x [-1, 1]``
through the vertical-stretch map

    (x, eta)  ->  (x, y) ,   y = eta * (1 + h(x)) ,

which keeps the centerline ``{y = 0}`` and the up/down reflection exact on
the grid.  An optional ``half_height`` factor scales the vertical extent
(``y = eta * half_height * (1 + h(x))``) so that taller flat strips such as
``[-2, 2]`` reuse the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BoundaryProfile:
    """Wall shape ``h(x) = sum_k a_k cos(kx) + sum_k b_k sin(kx)``.

    Coefficients are indexed by wavenumber: ``cosine_coeffs[k]`` is the
    amplitude of ``cos(kx)`` (``k = 0`` allowed), ``sine_coeffs[k]`` of
    ``sin(kx)`` (the ``k = 0`` slot is ignored).  The series is finite, so
    every derivative is available in closed form and "the wall is straight"
    (``h' == 0``) is decidable exactly from the coefficients.
    """

    cosine_coeffs: tuple[float, ...] = ()
    sine_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cosine_coeffs", tuple(float(a) for a in self.cosine_coeffs))
        object.__setattr__(self, "sine_coeffs", tuple(float(b) for b in self.sine_coeffs))

    @classmethod
    def from_pairs(cls, cos_pairs=(), sin_pairs=()):
        """Build from sparse ``(wavenumber, amplitude)`` pairs."""
        kmax = 0
        for k, _ in list(cos_pairs) + list(sin_pairs):
            if k < 0 or k != int(k):
                raise ValueError(f"wavenumber must be a nonnegative integer, got {k}")
            kmax = max(kmax, int(k))
        a = np.zeros(kmax + 1)
        b = np.zeros(kmax + 1)
        for k, amp in cos_pairs:
            a[int(k)] += amp
        for k, amp in sin_pairs:
            b[int(k)] += amp
        return cls(tuple(a), tuple(b))

    @classmethod
    def flat(cls):
        return cls((), ())

    @classmethod
    def cosine(cls, amplitude, mode=1):
        """Single-mode wall ``h = amplitude * cos(mode * x)``."""
        return cls.from_pairs(cos_pairs=[(mode, amplitude)])

    def scaled(self, factor):
        """Profile with every amplitude multiplied by ``factor``."""
        return BoundaryProfile(
            tuple(factor * a for a in self.cosine_coeffs),
            tuple(factor * b for b in self.sine_coeffs),
        )

    @property
    def max_mode(self):
        return max(len(self.cosine_coeffs), len(self.sine_coeffs), 1) - 1

    @property
    def is_flat(self) -> bool:
        """True exactly when h' vanishes identically (all k >= 1 amplitudes zero)."""
        return all(a == 0.0 for a in self.cosine_coeffs[1:]) and all(
            b == 0.0 for b in self.sine_coeffs[1:]
        )

    def derivative(self, x, order=0):
        """Evaluate the ``order``-th derivative of h at ``x`` (term by term).

        Exact for the truncated series: each derivative rotates the
        coefficient pair ``(a_k, b_k) -> (k*b_k, -k*a_k)``.
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(self.max_mode + 1):
            a = self.cosine_coeffs[k] if k < len(self.cosine_coeffs) else 0.0
            b = self.sine_coeffs[k] if k < len(self.sine_coeffs) else 0.0
            if a == 0.0 and b == 0.0:
                continue
            for _ in range(order):
                a, b = k * b, -k * a
            if a != 0.0:
                out = out + a * np.cos(k * x)
            if b != 0.0:
                out = out + b * np.sin(k * x)
        return out if out.shape else float(out)

    def __call__(self, x):
        return self.derivative(x, 0)

    def max_abs(self):
        """Max of |h| by dense sampling at >= 8x the highest retained mode."""
        n = max(1024, 16 * max(self.max_mode, 1))
        xs = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return float(np.max(np.abs(self.derivative(xs, 0)))) if n else 0.0


def eval_profile(profile: BoundaryProfile, x):
    """Wall height h(x); exact for the truncated Fourier series."""
    return profile(x)


class ChannelGrid:
    """Tensor-product grid on the reference rectangle with mapping metadata.

    Nodes are ``x_i = 2*pi*i/nx`` (periodic, no duplicated seam column) and
    the entries of ``eta`` (inclusive endpoints).  Metric arrays come from
    analytic derivatives of the Fourier series, never from finite
    differencing of h.

    Attributes:
        profile: the wall shape.
        nx, ny: node counts in x and eta.
        x, eta: 1-D node coordinate arrays.
        dx, deta: uniform spacings.
        half_height: vertical scale factor (1.0 for the standard channel).
        j: nodal samples of 1 + h(x).
        hp, hpp: nodal samples of h' and h''.
        yscale, yscale_p, yscale_pp: ``half_height * (1 + h)`` and its x
            derivatives; the coefficient of eta in the physical map.
    """

    def __init__(self, profile: BoundaryProfile, nx: int, eta: np.ndarray, half_height: float = 1.0):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim != 1 or eta.size < 3:
            raise ValueError("eta must be a 1-D array with at least 3 nodes")
        d = np.diff(eta)
        if not np.allclose(d, d[0], rtol=0, atol=1e-13):
            raise ValueError("eta nodes must be uniformly spaced")
        self.profile = profile
        self.nx = int(nx)
        self.ny = int(eta.size)
        self.x = TWO_PI * np.arange(self.nx) / self.nx
        self.eta = eta
        self.dx = TWO_PI / self.nx
        self.deta = float(d[0])
        self.half_height = float(half_height)
        self.j = 1.0 + profile.derivative(self.x, 0)
        if np.any(self.j <= 0.0):
            raise ValueError("map is singular: 1 + h(x) must stay positive")
        self.hp = profile.derivative(self.x, 1)
        self.hpp = profile.derivative(self.x, 2)
        self.yscale = self.half_height * self.j
        self.yscale_p = self.half_height * self.hp
        self.yscale_pp = self.half_height * self.hpp

    # -- coordinates -------------------------------------------------------

    def physical_y(self):
        """(nx, ny) array of physical y over all nodes."""
        return self.eta[None, :] * self.yscale[:, None]

    def meshes(self):
        """Physical coordinate meshes (X, Y), each (nx, ny)."""
        X = np.broadcast_to(self.x[:, None], (self.nx, self.ny)).copy()
        return X, self.physical_y()

    def interior_slice(self):
        return slice(1, self.ny - 1)

    def quadrature_weights(self):
        """(nx, ny) physical-area weights: J dx deta, trapezoid in eta."""
        w_eta = np.full(self.ny, self.deta)
        w_eta[0] *= 0.5
        w_eta[-1] *= 0.5
        return self.yscale[:, None] * self.dx * w_eta[None, :]

    @property
    def shape(self):
        return (self.nx, self.ny)

    def __repr__(self):
        return (
            f"ChannelGrid(nx={self.nx}, ny={self.ny}, half_height={self.half_height}, "
            f"flat={self.profile.is_flat})"
        )


def build_grid(profile: BoundaryProfile, nx: int, ny: int, half_height: float = 1.0) -> ChannelGrid:
    """Validated grid over the full channel, eta in [-1, 1].

    ``ny`` must be odd so the centerline ``eta = 0`` is a grid line and the
    grid is exactly symmetric under ``eta -> -eta``.
    """
    if nx < 16:
        raise ValueError(f"nx must be >= 16, got {nx}")
    if ny < 17:
        raise ValueError(f"ny must be >= 17, got {ny}")
    if ny % 2 == 0:
        raise ValueError(f"ny must be odd so the centerline is a grid line, got {ny}")
    m = profile.max_abs()
    if m >= 1.0:
        raise ValueError(f"profile violates |h| < 1 (max |h| = {m:.4f})")
    eta = np.linspace(-1.0, 1.0, ny)
    return ChannelGrid(profile, nx, eta, half_height=half_height)


def physical_coords(grid: ChannelGrid, i: int, j: int):
    """Physical (x, y) of node (i, j); raises IndexError when out of range."""
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise IndexError(f"node ({i}, {j}) outside grid {grid.shape}")
    return float(grid.x[i]), float(grid.eta[j] * grid.yscale[i])


@dataclass
class ScalarField:
    """Nodal values of a scalar on a ChannelGrid (shape (nx, ny), no seam column)."""

    grid: ChannelGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    @classmethod
    def from_function(cls, grid: ChannelGrid, fn):
        """Sample ``fn(x, y)`` (physical coordinates) at the nodes."""
        X, Y = grid.meshes()
        return cls(grid, np.asarray(fn(X, Y), dtype=float))

    @classmethod
    def zeros(cls, grid: ChannelGrid):
        return cls(grid, np.zeros(grid.shape))
