"""Steady-state solver: Dirichlet problems ``lap psi = F(psi)`` on the channel.

The streamfunction is fixed to ``c1 = 0`` on the bottom wall and ``c2 = gap``
on the top wall (it is only defined up to a constant), so the prescribed
``gap`` controls the flow's harmonic content directly.  Solutions come from
damped Newton iteration on ``N(psi) = lap psi - F(psi)``; each step solves
the linearization ``(lap - F'(psi_k)) delta = -N(psi_k)`` with zero
Dirichlet data and backtracks on the residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BoundaryProfile, ChannelGrid, ScalarField, build_grid
from .operators import laplacian, perp_gradient


class NonConvergenceError(RuntimeError):
    """Newton residual stagnated; carries the last iterate for inspection."""

    def __init__(self, message, psi=None, residual=None):
        super().__init__(message)
        self.psi = psi
        self.residual = residual


class SingularLinearizationError(RuntimeError):
    """Inner linear solve failed, typically F' close to a -lambda_1 resonance."""


# -- vorticity profiles ------------------------------------------------------


@dataclass(frozen=True)
class ConstantVorticity:
    """F(psi) = value; F' = 0, within the stability hypothesis F' > -lambda1."""

    value: float = 1.0

    def f(self, psi):
        return np.full_like(np.asarray(psi, dtype=float), self.value)

    def df(self, psi):
        return np.zeros_like(np.asarray(psi, dtype=float))

    def arnold_admissible(self, lambda1: float) -> bool:
        return True  # F' = 0 > -lambda1


@dataclass(frozen=True)
class AffineVorticity:
    """F(psi) = slope * psi + offset."""

    slope: float
    offset: float = 0.0

    def f(self, psi):
        return self.slope * np.asarray(psi, dtype=float) + self.offset

    def df(self, psi):
        return np.full_like(np.asarray(psi, dtype=float), self.slope)

    def arnold_admissible(self, lambda1: float) -> bool:
        return (-lambda1 < self.slope < 0.0) or self.slope > 0.0


@dataclass(frozen=True)
class ExponentialVorticity:
    """F(psi) = scale * exp(-2 psi), the profile of the classical cat's-eye row."""

    scale: float = 1.0

    def f(self, psi):
        return self.scale * np.exp(-2.0 * np.asarray(psi, dtype=float))

    def df(self, psi):
        return -2.0 * self.scale * np.exp(-2.0 * np.asarray(psi, dtype=float))

    def arnold_admissible(self, lambda1: float) -> bool:
        # F' depends on the attained range of psi; cannot be decided statically.
        return True


VorticityProfile = ConstantVorticity | AffineVorticity | ExponentialVorticity


@dataclass
class EquilibriumSolution:
    """Converged steady state and its derived fields."""

    psi: ScalarField
    u: tuple[ScalarField, ScalarField]
    omega: ScalarField
    boundary_values: tuple[float, float]
    homology_gap: float
    pde_residual: float
    newton_iterations: int

    @property
    def grid(self) -> ChannelGrid:
        return self.psi.grid


# -- 1-D reduction (initial guess and test oracle) ---------------------------


def solve_channel_bvp(profile: VorticityProfile, gap: float, ny: int, half_height: float = 1.0,
                      tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Solve psi'' = F(psi), psi(-H) = 0, psi(H) = gap on ny uniform nodes.

    Dense tridiagonal Newton; doubles as the independent oracle for the
    flat-channel solver (x-independent states reduce to this problem).
    """
    y = np.linspace(-half_height, half_height, ny)
    dy = y[1] - y[0]
    # rounding floor of the residual: the difference stencil amplifies by 1/dy^2
    tol = max(tol, 100 * np.finfo(float).eps / dy**2 * max(1.0, abs(gap)))

    def residual(p):
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.zeros(ny)
            r[1:-1] = (p[2:] - 2 * p[1:-1] + p[:-2]) / dy**2 - profile.f(p[1:-1])
        r[~np.isfinite(r)] = np.inf
        return r

    psi = (gap / 2.0) * (y / half_height + 1.0)
    res = residual(psi)
    res_norm = np.max(np.abs(res))
    for _ in range(max_iter):
        if res_norm < tol:
            break
        band = np.zeros((3, ny))
        band[0, 2:] = 1.0 / dy**2
        band[1, 1:-1] = -2.0 / dy**2 - profile.df(psi[1:-1])
        band[1, [0, -1]] = 1.0
        band[2, :-2] = 1.0 / dy**2
        # zero rows for the pinned endpoints
        band[0, 1] = 0.0
        band[2, -2] = 0.0
        delta = sla.solve_banded((1, 1), band, -res)
        alpha = 1.0
        while alpha >= 1e-4:
            trial = psi + alpha * delta
            trial[0], trial[-1] = 0.0, gap
            trial_res = residual(trial)
            trial_norm = np.max(np.abs(trial_res))
            if trial_norm < res_norm:
                break
            alpha *= 0.5
        else:
            raise NonConvergenceError("1-D channel profile iteration stagnated")
        psi, res, res_norm = trial, trial_res, trial_norm
    else:
        raise NonConvergenceError("1-D channel profile iteration did not converge")
    return psi


# -- Newton solver ------------------------------------------------------------


def _interior_mask(grid: ChannelGrid) -> np.ndarray:
    m = np.zeros(grid.shape, dtype=bool)
    m[:, 1:-1] = True
    return m.ravel()


def solve_equilibrium(grid: ChannelGrid, profile: VorticityProfile, gap: float,
                      tol: float = 1e-10, source: ScalarField | None = None,
                      initial_guess: ScalarField | None = None,
                      max_iter: int = 50) -> EquilibriumSolution:
    """Damped Newton solve of ``lap psi = F(psi) + source`` with ``psi = 0 / gap``
    on the bottom / top wall.

    The optional ``source`` supports manufactured-solution verification; the
    default is the homogeneous problem.  Backtracking halves the step until
    the interior residual decreases (floor 1e-4); convergence is
    ``max |lap psi - F(psi) - source| < tol`` over interior nodes.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    L = laplacian(grid)
    interior = _interior_mask(grid)
    nx, ny = grid.shape
    src = np.zeros(nx * ny) if source is None else source.values.ravel()

    if initial_guess is None:
        prof_1d = solve_channel_bvp(profile, gap, ny, half_height=grid.half_height)
        psi = np.tile(prof_1d, (nx, 1)).ravel()
    else:
        psi = initial_guess.values.ravel().copy()
    # boundary data imposed exactly
    psi = psi.reshape(nx, ny)
    psi[:, 0] = 0.0
    psi[:, -1] = gap
    psi = psi.ravel()

    def residual(p):
        with np.errstate(over="ignore", invalid="ignore"):
            r = L @ p - profile.f(p) - src
        r[~interior] = 0.0
        r[~np.isfinite(r)] = np.inf
        return r

    res = residual(psi)
    res_norm = float(np.max(np.abs(res)))
    iterations = 0
    stagnant = 0
    while res_norm >= tol:
        if iterations >= max_iter:
            raise NonConvergenceError(
                f"Newton did not reach tol={tol:g} in {max_iter} iterations "
                f"(residual {res_norm:.3e})",
                psi=ScalarField(grid, psi.reshape(nx, ny)),
                residual=res_norm,
            )
        with np.errstate(over="ignore", invalid="ignore"):
            dfp = profile.df(psi)
        dfp[~interior] = 0.0
        if not np.all(np.isfinite(dfp)):
            raise SingularLinearizationError("vorticity slope overflowed at the current iterate")
        Jmat = (L - sp.diags(dfp)).tocsc()
        try:
            delta = spla.spsolve(Jmat, -res)
        except Exception as exc:  # pragma: no cover - scipy raises various types
            raise SingularLinearizationError(
                f"linearized solve failed ({exc}); F' may be near a -lambda1 resonance"
            ) from exc
        if not np.all(np.isfinite(delta)):
            raise SingularLinearizationError(
                "linearized solve produced non-finite step; "
                "F' may be near a -lambda1 resonance"
            )
        alpha = 1.0
        while alpha >= 1e-4:
            trial = psi + alpha * delta
            trial_res = residual(trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < res_norm:
                break
            alpha *= 0.5
        else:
            stagnant += 1
            trial, trial_res, trial_norm = psi + 1e-4 * delta, None, res_norm
            if stagnant >= 5:
                raise NonConvergenceError(
                    f"Newton stagnated at residual {res_norm:.3e}",
                    psi=ScalarField(grid, psi.reshape(nx, ny)),
                    residual=res_norm,
                )
            trial_res = residual(trial)
            trial_norm = float(np.max(np.abs(trial_res)))
        psi, res, res_norm = trial, trial_res, trial_norm
        iterations += 1

    psi_field = ScalarField(grid, psi.reshape(nx, ny))
    u = perp_gradient(psi_field)
    omega_vals = (L @ psi).reshape(nx, ny).copy()
    omega_vals[:, 0] = (profile.f(psi.reshape(nx, ny)[:, 0]) + src.reshape(nx, ny)[:, 0])
    omega_vals[:, -1] = (profile.f(psi.reshape(nx, ny)[:, -1]) + src.reshape(nx, ny)[:, -1])
    return EquilibriumSolution(
        psi=psi_field,
        u=u,
        omega=ScalarField(grid, omega_vals),
        boundary_values=(0.0, float(gap)),
        homology_gap=float(gap),
        pde_residual=res_norm,
        newton_iterations=iterations,
    )


def continuation_sweep(shape: BoundaryProfile, eps_list, profile: VorticityProfile, gap: float,
                       nx: int = 128, ny: int = 65, tol: float = 1e-10,
                       half_height: float = 1.0) -> list[EquilibriumSolution]:
    """Solve along increasing wall amplitudes, warm-starting from the last state.

    ``eps_list`` must start at 0 and increase; the converged field at each
    amplitude (same reference nodes) seeds the next solve.  Solver errors
    propagate annotated with the amplitude at which they occurred.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or eps_list[0] != 0.0 or any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must start at 0 and strictly increase")
    out = []
    guess = None
    for eps in eps_list:
        grid = build_grid(shape.scaled(eps), nx, ny, half_height=half_height)
        try:
            sol = solve_equilibrium(grid, profile, gap, tol=tol, initial_guess=guess)
        except (NonConvergenceError, SingularLinearizationError) as exc:
            raise type(exc)(f"continuation failed at eps={eps:g}: {exc}") from exc
        out.append(sol)
        guess = ScalarField(grid, sol.psi.values)
    return out


# -- named reference flows ----------------------------------------------------


def builtin_named_flows(grid: ChannelGrid) -> dict[str, ScalarField]:
    """Exact nodal streamfunctions of the classical straight-channel flows.

    couette:            psi = -y^2/2            u = (y, 0)
    poiseuille:         psi = -y^3/3 + y/3      u = (y^2 - 1/3, 0)
    shear_with_current: psi = -y^2/2 + 1.01 y   stagnation-free, carries net flux
    """
    if not grid.profile.is_flat:
        raise ValueError("named flows are defined on a flat grid")
    return {
        "couette": ScalarField.from_function(grid, lambda x, y: -0.5 * y**2),
        "poiseuille": ScalarField.from_function(grid, lambda x, y: -y**3 / 3.0 + y / 3.0),
        "shear_with_current": ScalarField.from_function(grid, lambda x, y: -0.5 * y**2 + 1.01 * y),
    }


def stuart_vortex(nx: int = 256, ny: int = 129, a: float = np.sqrt(2.0)) -> tuple[ChannelGrid, ScalarField]:
    """Kelvin-Stuart cat's-eye streamfunction on the flat strip [-2, 2].

    psi = ln(a cosh y + b cos x) with b = sqrt(a^2 - 1), an exact steady
    state satisfying lap psi = (a^2 - b^2) e^{-2 psi} = e^{-2 psi}.
    """
    if a <= 1.0:
        raise ValueError("need a > 1 for a real cat's-eye amplitude")
    grid = build_grid(BoundaryProfile.flat(), nx, ny, half_height=2.0)
    b = np.sqrt(a * a - 1.0)
    psi = ScalarField.from_function(grid, lambda x, y: np.log(a * np.cosh(y) + b * np.cos(x)))
    return grid, psi


def stuart_analytic(grid: ChannelGrid, a: float = np.sqrt(2.0)) -> dict[str, np.ndarray]:
    """Closed-form derivatives of the cat's-eye streamfunction at the nodes.

    The second derivatives are evaluated as independent rational expressions
    (no pre-simplification), so summing them checks the steady-state
    identity lap psi = (a^2 - b^2) e^{-2 psi} nontrivially.
    """
    b = np.sqrt(a * a - 1.0)
    X, Y = grid.meshes()
    D = a * np.cosh(Y) + b * np.cos(X)
    psi = np.log(D)
    psi_x = -b * np.sin(X) / D
    psi_y = a * np.sinh(Y) / D
    psi_xx = (-b * np.cos(X) * D - b**2 * np.sin(X) ** 2) / D**2
    psi_yy = (a * np.cosh(Y) * D - a**2 * np.sinh(Y) ** 2) / D**2
    psi_xy = b * np.sin(X) * a * np.sinh(Y) / D**2
    return {
        "psi": psi,
        "psi_x": psi_x,
        "psi_y": psi_y,
        "psi_xx": psi_xx,
        "psi_yy": psi_yy,
        "psi_xy": psi_xy,
        "vorticity_scale": a * a - b * b,
    }
