"""Independent dense reference assemblies used as test oracles.

Nothing here calls the sweep kernels: the DG oracle integrates the upwind
bilinear form with Gauss quadrature on the physical cell, and the FV
oracle builds the cell-balance matrix column by column from the
reconstruction routine. ``TABLE_1`` transcribes the published per-cell
flop and unknown counts.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from hybrid_transport import fv
from hybrid_transport.mesh import FACE_POINTS, InflowData, Mesh2D

G3, W3 = np.polynomial.legendre.leggauss(3)


def _basis(xi, eta):
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    return np.stack([np.ones_like(xi), xi, eta, xi * eta], axis=-1)


def _basis_grad(xi, eta):
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    dxi = np.stack([np.zeros_like(xi), np.ones_like(xi), np.zeros_like(xi), eta], axis=-1)
    deta = np.stack([np.zeros_like(xi), np.zeros_like(xi), np.ones_like(xi), xi], axis=-1)
    return dxi, deta


def dg_dense_system(omega, mesh: Mesh2D, sigma, iso=None, inflow: InflowData | None = None, i: int = 0):
    """Global matrix and load vector of the upwind Q1 DG form for one ordinate.

    Unknown ordering: ``((j * ny) + k) * 4 + m``.
    """
    ox, oy = float(omega[0]), float(omega[1])
    nx, ny, dx, dy = mesh.nx, mesh.ny, mesh.dx, mesh.dy
    sigma = np.broadcast_to(np.asarray(sigma, float), (nx, ny))
    n = nx * ny * 4
    A = np.zeros((n, n))
    b = np.zeros(n)
    jac = 0.25 * dx * dy

    def idx(j, k):
        return ((j * ny) + k) * 4

    XI, ETA = np.meshgrid(G3, G3, indexing="ij")
    WW = np.outer(W3, W3)
    B = _basis(XI, ETA)  # (3,3,4)
    DXI, DETA = _basis_grad(XI, ETA)
    for j in range(nx):
        for k in range(ny):
            r = idx(j, k)
            # volume: sigma u v - u (Omega . grad v)
            grad_dot = ox * (2.0 / dx) * DXI + oy * (2.0 / dy) * DETA
            vol = np.einsum("ab,abm,abn->mn", WW, sigma[j, k] * B - grad_dot, B) * jac
            A[r:r + 4, r:r + 4] += vol
            if iso is not None:
                q = B @ iso[j, k]
                b[r:r + 4] += np.einsum("ab,ab,abm->m", WW, q, B) * jac
            # faces: (x, n, local coords, half-length)
            faces = [
                ("east", (1.0, 0.0), lambda s: (np.ones_like(s), s), 0.5 * dy, (j + 1, k)),
                ("west", (-1.0, 0.0), lambda s: (-np.ones_like(s), s), 0.5 * dy, (j - 1, k)),
                ("north", (0.0, 1.0), lambda s: (s, np.ones_like(s)), 0.5 * dx, (j, k + 1)),
                ("south", (0.0, -1.0), lambda s: (s, -np.ones_like(s)), 0.5 * dx, (j, k - 1)),
            ]
            for name, nrm, loc, half, nb in faces:
                on = ox * nrm[0] + oy * nrm[1]
                xi_f, eta_f = loc(G3)
                v = _basis(xi_f, eta_f)  # (3,4)
                if on > 0:
                    A[r:r + 4, r:r + 4] += on * half * np.einsum("a,am,an->mn", W3, v, v)
                    continue
                jn, kn = nb
                if 0 <= jn < nx and 0 <= kn < ny:
                    # neighbour's trace on the shared face
                    xi_n, eta_n = xi_f.copy(), eta_f.copy()
                    if name in ("east", "west"):
                        xi_n = -xi_f
                    else:
                        eta_n = -eta_f
                    u = _basis(xi_n, eta_n)
                    rn = idx(jn, kn)
                    A[r:r + 4, rn:rn + 4] += on * half * np.einsum("a,am,an->mn", W3, v, u)
                elif inflow is not None:
                    g = getattr(inflow, name)[i, k if name in ("east", "west") else j]
                    # linear data through the two Gauss samples
                    s2 = np.array([FACE_POINTS[0], FACE_POINTS[2]])
                    slope = (g[2] - g[0]) / (s2[1] - s2[0])
                    gvals = 0.5 * (g[0] + g[2]) + slope * G3
                    b[r:r + 4] -= on * half * np.einsum("a,a,am->m", W3, gvals, v)
    return A, b


def dg_dense_solve(omega, mesh, sigma, iso=None, inflow=None, i=0):
    A, b = dg_dense_system(omega, mesh, sigma, iso, inflow, i)
    return np.linalg.solve(A, b).reshape(mesh.nx, mesh.ny, 4)


def fv_dense_system(omega, mesh: Mesh2D, sigma, rhs, inflow: InflowData | None = None, i: int = 0):
    """Affine FV cell balance ``A psi + r0`` assembled column by column (x-major ravel)."""
    shape = (mesh.nx, mesh.ny)
    zero = np.zeros(shape)
    r0 = fv.cell_balance_residual(zero, omega, mesh, sigma, rhs, inflow, i).ravel()
    n = mesh.nx * mesh.ny
    A = np.empty((n, n))
    for c in range(n):
        e = np.zeros(n)
        e[c] = 1.0
        A[:, c] = fv.cell_balance_residual(e.reshape(shape), omega, mesh, sigma, rhs, inflow, i).ravel() - r0
    return A, r0


def fv_dense_solve(omega, mesh: Mesh2D, sigma, rhs, inflow: InflowData | None = None, i: int = 0):
    """Solve the FV cell balance by assembling its affine map column by column."""
    A, r0 = fv_dense_system(omega, mesh, sigma, rhs, inflow, i)
    return np.linalg.solve(A, -r0).reshape(mesh.nx, mesh.ny)


def fv_dense_transport(quad, mesh: Mesh2D, sigma_t, sigma_s, q):
    """Direct solve of the fully coupled FV transport system with isotropic scattering.

    ``q`` is an isotropic cell source; vacuum inflow. Returns the angular flux.
    """
    n = mesh.nx * mesh.ny
    n_ord = quad.count
    big = np.zeros((n_ord * n, n_ord * n))
    rhs = np.zeros(n_ord * n)
    for i, omega in enumerate(quad.directions):
        A, r0 = fv_dense_system(omega, mesh, sigma_t, q)
        big[i * n:(i + 1) * n, i * n:(i + 1) * n] += A
        rhs[i * n:(i + 1) * n] = -r0
        for jj in range(n_ord):
            big[i * n:(i + 1) * n, jj * n:(jj + 1) * n] -= np.diag(np.ravel(sigma_s)) * quad.weights[jj] / (4 * np.pi)
    return np.linalg.solve(big, rhs).reshape(n_ord, mesh.nx, mesh.ny)


d, N, Nu, Nc = sp.symbols("d N N_u N_c")

# transcription of the published per-cell table (Cartesian, Triangular)
TABLE_1 = {
    ("FV", "Cartesian"): (N, N),
    ("DG", "Cartesian"): ((2**d + 2 ** (2 * d)) * N, 2**d * N),
    ("DG-DG", "Cartesian"): ((2**d + 2 ** (2 * d)) * (Nu + Nc), 2**d * (Nu + Nc)),
    ("FV-DG", "Cartesian"): (Nu + (2**d + 2 ** (2 * d)) * Nc, Nu + 2**d * Nc),
    ("FV", "Triangular"): (N, N),
    ("DG", "Triangular"): ((d + 1) ** 2 * N, (d + 1) * N),
    ("DG-DG", "Triangular"): ((d + 1) * (d + 2) * (Nu + Nc), (d + 1) * (Nu + Nc)),
    ("FV-DG", "Triangular"): (Nu + (d + 1) * (d + 2) * Nc, Nu + (d + 1) * Nc),
}
