"""Smallest Dirichlet eigenvalue of -lap on the channel.

Inverse power iteration on the symmetric pencil ``A v = lambda M v`` from
``operators.dirichlet_stiffness``; inner solves by Jacobi-preconditioned
conjugate gradient.  Only the ground state is needed, so no Lanczos.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ChannelGrid, ScalarField
from .operators import dirichlet_stiffness, embed_interior


class EigenConvergenceError(RuntimeError):
    """Raised when the power iteration stalls; carries the last iterate."""

    def __init__(self, message, last_result=None):
        super().__init__(message)
        self.last_result = last_result


@dataclass
class EigenResult:
    """Converged ground state of the Dirichlet Laplacian.

    Attributes:
        lambda1: smallest eigenvalue (> 0).
        eigenfunction: nodal field, unit J-weighted L2 norm, positive interior.
        residual: ||(-lap - lambda1) v|| / ||v|| in the J-weighted norm.
        iterations: outer power-iteration count.
    """

    lambda1: float
    eigenfunction: ScalarField
    residual: float
    iterations: int


def _cg(A, b, x0, rtol, M=None):
    # scipy renamed tol -> rtol in 1.12; support both
    try:
        x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, M=M)
    except TypeError:  # pragma: no cover
        x, info = spla.cg(A, b, x0=x0, tol=rtol, atol=0.0, M=M)
    if info != 0:
        raise EigenConvergenceError(f"inner conjugate-gradient solve failed (info={info})")
    return x


def smallest_dirichlet_eigenvalue(grid: ChannelGrid, tol: float = 1e-10, max_outer: int = 500) -> EigenResult:
    """Ground Dirichlet eigenpair by deterministic inverse power iteration.

    Starts from the flat-channel eigenfunction ``cos(pi*eta/2)`` mapped to
    the grid.  Stops when successive Rayleigh quotients differ by less than
    ``tol`` and the eigen-residual is below ``10*tol``; raises
    EigenConvergenceError (with the last iterate attached) otherwise.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, M = dirichlet_stiffness(grid)
    m_diag = M.diagonal()
    precond = sp.diags(1.0 / A.diagonal())

    nin = A.shape[0]
    v = np.cos(0.5 * np.pi * grid.eta[1:-1])
    v = np.tile(v, grid.nx)
    v /= np.sqrt(v @ (m_diag * v))

    lam_old = np.inf
    lam = float(v @ (A @ v))
    iterations = 0
    residual = np.inf
    for iterations in range(1, max_outer + 1):
        w = _cg(A, M @ v, x0=v / max(lam, 1e-300), rtol=min(1e-12, tol), M=precond)
        nrm = np.sqrt(w @ (m_diag * w))
        v = w / nrm
        lam = float(v @ (A @ v)) / float(v @ (m_diag * v))
        r = A @ v - lam * (m_diag * v)
        residual = float(np.sqrt((r / m_diag) @ r) / np.sqrt(v @ (m_diag * v)))
        if abs(lam - lam_old) < tol and residual < 10 * tol:
            break
        lam_old = lam
    else:
        partial = _pack_result(grid, v, lam, residual, iterations)
        raise EigenConvergenceError(
            f"inverse power iteration did not converge in {max_outer} iterations "
            f"(last lambda={lam:.12g}, residual={residual:.3e})",
            last_result=partial,
        )
    return _pack_result(grid, v, lam, residual, iterations)


def _pack_result(grid, v, lam, residual, iterations):
    full = embed_interior(grid, v, boundary=0.0)
    # sign-definite ground state: fix the interior mean positive
    if full.sum() < 0:
        full = -full
    w = grid.quadrature_weights()
    full /= np.sqrt(np.sum(w * full**2))
    return EigenResult(
        lambda1=float(lam),
        eigenfunction=ScalarField(grid, full),
        residual=residual,
        iterations=iterations,
    )
