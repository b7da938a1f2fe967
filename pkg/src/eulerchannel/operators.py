"""Finite-difference operators on mapped channel grids.

Under the map ``y = eta * Y(x)`` with ``Y = half_height * (1 + h)``, the
physical Laplacian of ``psi(x, y) = f(x, eta)`` becomes

    lap psi = f_xx - 2 (eta Y'/Y) f_xeta + ((1 + eta^2 Y'^2)/Y^2) f_etaeta
              + eta (2 Y'^2/Y^2 - Y''/Y) f_eta ,

and the physical gradient is

    d/dx psi = f_x - (eta Y'/Y) f_eta ,      d/dy psi = f_eta / Y .

Everything is discretized with second-order centered differences on the
reference rectangle (4-point stencil for the cross derivative, one-sided
second-order closures for first derivatives at the eta boundaries),
periodic in x.  Operators are returned as scipy CSR matrices acting on
fields flattened in x-major order (node (i, j) -> row i*ny + j).

Two assemblies of the same physical operator are provided:

* ``laplacian`` - the plain mapped-coordinate form above, with Dirichlet
  rows replaced by identity rows.  Used by the nonlinear solver and for
  residual evaluation.
* ``dirichlet_stiffness`` - the divergence form ``-div(K grad .)`` with
  ``K = [[Y, -eta Y'], [-eta Y', (1+eta^2 Y'^2)/Y]]`` restricted to
  interior nodes, assembled so that the matrix is exactly symmetric, plus
  the diagonal area weight ``M = diag(Y)``.  The Dirichlet eigenvalue
  problem is the generalized pencil ``A v = lambda M v``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .geometry import ChannelGrid, ScalarField


def node_index(grid: ChannelGrid, i, j):
    """Flat row index of node (i, j), x-major."""
    return np.asarray(i) * grid.ny + np.asarray(j)


def _coefficients(grid: ChannelGrid):
    """Nodal PDE coefficients of the mapped Laplacian, each shape (nx, ny)."""
    Y = grid.yscale[:, None]
    Yp = grid.yscale_p[:, None]
    Ypp = grid.yscale_pp[:, None]
    eta = grid.eta[None, :]
    c_cross = -2.0 * eta * Yp / Y
    c_ee = (1.0 + eta**2 * Yp**2) / Y**2
    c_e = eta * (2.0 * Yp**2 / Y**2 - Ypp / Y)
    return c_cross, c_ee, c_e


def laplacian(grid: ChannelGrid) -> sp.csr_matrix:
    """Mapped-coordinate Laplacian on all nodes; Dirichlet rows are identity.

    Second-order accurate at interior nodes.  On a flat grid the stencil
    reduces to the standard 5-point Laplacian with spacings (dx, deta).
    """
    nx, ny = grid.nx, grid.ny
    dx, de = grid.dx, grid.deta
    c_cross, c_ee, c_e = _coefficients(grid)

    I, J = np.meshgrid(np.arange(nx), np.arange(1, ny - 1), indexing="ij")
    Ip = (I + 1) % nx
    Im = (I - 1) % nx

    rows, cols, vals = [], [], []

    def add(ii, jj, v):
        rows.append(node_index(grid, I, J).ravel())
        cols.append(node_index(grid, ii, jj).ravel())
        vals.append(np.broadcast_to(v, I.shape).ravel())

    cc = c_cross[I, J]
    ce2 = c_ee[I, J]
    ce1 = c_e[I, J]

    # f_xx
    add(Ip, J, np.full(I.shape, 1.0 / dx**2))
    add(Im, J, np.full(I.shape, 1.0 / dx**2))
    # f_etaeta
    add(I, J + 1, ce2 / de**2)
    add(I, J - 1, ce2 / de**2)
    # center
    add(I, J, -2.0 / dx**2 - 2.0 * ce2 / de**2)
    # f_eta (centered)
    add(I, J + 1, ce1 / (2 * de))
    add(I, J - 1, -ce1 / (2 * de))
    # f_xeta (4-point centered)
    w = cc / (4 * dx * de)
    add(Ip, J + 1, w)
    add(Ip, J - 1, -w)
    add(Im, J + 1, -w)
    add(Im, J - 1, w)

    # identity rows at the eta boundaries
    bidx = np.concatenate(
        [node_index(grid, np.arange(nx), 0), node_index(grid, np.arange(nx), ny - 1)]
    )
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))

    n = nx * ny
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A.tocsr()


def apply_operator(op: sp.csr_matrix, field: ScalarField) -> ScalarField:
    """Matrix-vector product returned as a field on the same grid."""
    out = op @ field.values.ravel()
    return ScalarField(field.grid, out.reshape(field.grid.shape))


def _deta_matrix_values(values: np.ndarray, de: float) -> np.ndarray:
    """d/deta of nodal values: centered inside, one-sided 2nd order at ends."""
    out = np.empty_like(values)
    out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2 * de)
    out[:, 0] = (-3 * values[:, 0] + 4 * values[:, 1] - values[:, 2]) / (2 * de)
    out[:, -1] = (3 * values[:, -1] - 4 * values[:, -2] + values[:, -3]) / (2 * de)
    return out


def gradient(field: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Physical (d/dx, d/dy) of a nodal field via the chain rule.

    Centered second-order differences; one-sided second-order at the eta
    boundaries, periodic wraparound in x.
    """
    g = field.grid
    v = field.values
    fx_ref = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * g.dx)
    fe = _deta_matrix_values(v, g.deta)
    Y = g.yscale[:, None]
    Yp = g.yscale_p[:, None]
    eta = g.eta[None, :]
    px = fx_ref - (eta * Yp / Y) * fe
    py = fe / Y
    return ScalarField(g, px), ScalarField(g, py)


def perp_gradient(field: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Velocity ``(-d/dy psi, d/dx psi)`` of a streamfunction field."""
    px, py = gradient(field)
    return ScalarField(field.grid, -py.values), px


def divergence(u1: ScalarField, u2: ScalarField) -> ScalarField:
    """Physical divergence d/dx u1 + d/dy u2 (same discretization as gradient)."""
    d1x, _ = gradient(u1)
    _, d2y = gradient(u2)
    return ScalarField(u1.grid, d1x.values + d2y.values)


# -- symmetric interior form for the eigenproblem ---------------------------


def interior_index(grid: ChannelGrid, i, j):
    """Row index in the interior-only numbering (j = 1 .. ny-2)."""
    return np.asarray(i) * (grid.ny - 2) + (np.asarray(j) - 1)


def dirichlet_stiffness(grid: ChannelGrid):
    """Exactly symmetric interior discretization of -div(K grad .) with mass.

    Returns ``(A, M)`` where ``A`` is SPD on interior nodes (CSR) and ``M``
    the diagonal area weight, so that the Dirichlet Laplacian eigenpairs
    solve ``A v = lambda M v``.  The xx and eta-eta fluxes use compact
    conservative stencils with analytic midpoint coefficients; the mixed
    term is ``Dx^T K12 Deta + Deta^T K12 Dx`` with centered first
    differences, symmetric by construction.
    """
    nx, ny = grid.nx, grid.ny
    dx, de = grid.dx, grid.deta
    nin = nx * (ny - 2)
    eta = grid.eta
    hh = grid.half_height

    prof = grid.profile
    x_mid = grid.x + 0.5 * dx
    Y_mid = hh * (1.0 + prof.derivative(x_mid, 0))  # K11 at x midpoints
    Y = grid.yscale
    Yp = grid.yscale_p

    I, J = np.meshgrid(np.arange(nx), np.arange(1, ny - 1), indexing="ij")
    R = interior_index(grid, I, J)

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.broadcast_to(r, v.shape).ravel())
        cols.append(np.broadcast_to(c, v.shape).ravel())
        vals.append(v.ravel())

    # x-direction flux: K11 = Y(x)
    aE = np.broadcast_to((Y_mid / dx**2)[:, None], I.shape)
    aW = np.broadcast_to((np.roll(Y_mid, 1) / dx**2)[:, None], I.shape)
    add(R, interior_index(grid, (I + 1) % nx, J), -aE)
    add(R, interior_index(grid, (I - 1) % nx, J), -aW)
    add(R, R, aE + aW)

    # eta-direction flux: K22 = (1 + eta^2 Y'^2)/Y at eta midpoints
    eta_mid = eta[:-1] + 0.5 * de  # midpoints between node j and j+1
    K22 = (1.0 + eta_mid[None, :] ** 2 * Yp[:, None] ** 2) / Y[:, None]  # (nx, ny-1)
    bN = K22[I, J] / de**2  # face between j and j+1
    bS = K22[I, J - 1] / de**2
    maskN = J + 1 <= ny - 2
    add(R[maskN], interior_index(grid, I[maskN], J[maskN] + 1), -bN[maskN])
    maskS = J - 1 >= 1
    add(R[maskS], interior_index(grid, I[maskS], J[maskS] - 1), -bS[maskS])
    add(R, R, bN + bS)

    # mixed flux: K12 = -eta Y' nodal
    K12 = -eta[None, 1:-1] * Yp[:, None]  # (nx, ny-2) interior nodes
    Dx_rows = np.repeat(np.arange(nin), 2)
    Dx_cols = np.stack(
        [interior_index(grid, (I + 1) % nx, J), interior_index(grid, (I - 1) % nx, J)], axis=-1
    ).reshape(-1)
    Dx_vals = np.tile(np.array([1.0, -1.0]) / (2 * dx), nin)
    Dx = sp.csr_matrix((Dx_vals, (Dx_rows, Dx_cols)), shape=(nin, nin))

    de_rows, de_cols, de_vals = [], [], []
    up = J + 1 <= ny - 2
    de_rows.append(R[up])
    de_cols.append(interior_index(grid, I[up], J[up] + 1))
    de_vals.append(np.full(int(up.sum()), 1.0 / (2 * de)))
    dn = J - 1 >= 1
    de_rows.append(R[dn])
    de_cols.append(interior_index(grid, I[dn], J[dn] - 1))
    de_vals.append(np.full(int(dn.sum()), -1.0 / (2 * de)))
    Deta = sp.csr_matrix(
        (np.concatenate(de_vals), (np.concatenate(de_rows), np.concatenate(de_cols))),
        shape=(nin, nin),
    )

    Kd = sp.diags(K12.ravel())
    A_cross = Dx.T @ Kd @ Deta + Deta.T @ Kd @ Dx

    A_main = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nin, nin)
    )
    A = (A_main + A_cross).tocsr()
    M = sp.diags(np.broadcast_to(Y[:, None], I.shape).ravel())
    return A, M


def interior_values(grid: ChannelGrid, values: np.ndarray) -> np.ndarray:
    """Flatten the interior block of a nodal array to interior numbering."""
    return values[:, 1:-1].ravel()


def embed_interior(grid: ChannelGrid, vec: np.ndarray, boundary=0.0) -> np.ndarray:
    """Expand an interior-numbered vector to a full nodal array."""
    out = np.full(grid.shape, float(boundary))
    out[:, 1:-1] = vec.reshape(grid.nx, grid.ny - 2)
    return out
