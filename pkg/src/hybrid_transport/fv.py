"""Second-order upwind finite volumes on cell averages.

Angular fluxes are arrays of shape ``(N*, nx, ny)``. Each ordinate is
reconstructed linearly per cell with one-sided (upwind) slopes; the
half-cell slope at an inflow boundary uses the boundary trace at the
face midpoint. No limiter is applied.
"""

from __future__ import annotations

import numba
import numpy as np

from .mesh import InflowData, Mesh2D, gauss_cell_points, ordinate_groups


def cell_average_identity(f: np.ndarray) -> np.ndarray:
    """FV fields are already cell averages."""
    return f


def project_cell_average(mesh: Mesh2D, func, n_points: int = 3) -> np.ndarray:
    """Cell averages of ``func(x, y)`` by tensor Gauss quadrature."""
    X, Y, _, _, w = gauss_cell_points(mesh, n_points)
    return np.asarray(func(X, Y), dtype=float) @ w / 4.0


def _inflow_faces(inflow: InflowData, i: int, omega):
    """Midpoint and face-average inflow values on the x and y inflow sides."""
    gx = inflow.west[i] if omega[0] > 0 else inflow.east[i]
    gy = inflow.south[i] if omega[1] > 0 else inflow.north[i]
    return gx, gy


def reconstruct_slopes(f: np.ndarray, omega, mesh: Mesh2D, inflow: InflowData | None = None, i: int = 0):
    """Upwind slopes ``(s_x, s_y)`` of one ordinate's cell averages ``f``.

    ``inflow`` supplies the boundary trace of ordinate ``i``; ``None`` means
    a vacuum boundary.
    """
    f = np.asarray(f, dtype=float)
    ox, oy = omega[0], omega[1]
    if inflow is None:
        bx = np.zeros(mesh.ny)
        by = np.zeros(mesh.nx)
    else:
        gx, gy = _inflow_faces(inflow, i, omega)
        bx, by = gx[:, 1], gy[:, 1]

    sx = np.empty_like(f)
    sy = np.empty_like(f)
    if ox >= 0:
        sx[1:] = (f[1:] - f[:-1]) / mesh.dx
        sx[0] = 2.0 * (f[0] - bx) / mesh.dx
    else:
        sx[:-1] = (f[1:] - f[:-1]) / mesh.dx
        sx[-1] = 2.0 * (bx - f[-1]) / mesh.dx
    if oy >= 0:
        sy[:, 1:] = (f[:, 1:] - f[:, :-1]) / mesh.dy
        sy[:, 0] = 2.0 * (f[:, 0] - by) / mesh.dy
    else:
        sy[:, :-1] = (f[:, 1:] - f[:, :-1]) / mesh.dy
        sy[:, -1] = 2.0 * (by - f[:, -1]) / mesh.dy
    return sx, sy


def outflow_traces(f: np.ndarray, omega, mesh: Mesh2D, inflow: InflowData | None = None, i: int = 0):
    """Face-averaged reconstructed traces on the downwind x and y boundaries."""
    sx, sy = reconstruct_slopes(f, omega, mesh, inflow, i)
    if omega[0] > 0:
        tx = f[-1] + 0.5 * mesh.dx * sx[-1]
    else:
        tx = f[0] - 0.5 * mesh.dx * sx[0]
    if omega[1] > 0:
        ty = f[:, -1] + 0.5 * mesh.dy * sy[:, -1]
    else:
        ty = f[:, 0] - 0.5 * mesh.dy * sy[:, 0]
    return tx, ty


@numba.njit(parallel=True, cache=True)
def _fv_sweep_kernel(ox, oy, dx, dy, groups, sigma, iso, ang, west, east, south, north, out):
    nx, ny = sigma.shape
    n_ang = ang.shape[0]
    n_grp, gsize = groups.shape
    for gi in numba.prange(n_grp):
        grp = groups[gi]
        ng = 0
        while ng < gsize and grp[ng] >= 0:
            ng += 1
        px = ox[grp[0]] > 0
        py = oy[grp[0]] > 0
        # padded lanes get unit coefficients and zero data; they are never stored
        ax = np.ones(gsize)
        ay = np.ones(gsize)
        for g in range(ng):
            ax[g] = abs(ox[grp[g]]) / dx
            ay[g] = abs(oy[grp[g]]) / dy
        # per-lane x state along the current column: subtracted part and incoming trace
        subx = np.zeros((ny, gsize))
        inx = np.zeros((ny, gsize))
        suby = np.zeros(gsize)
        iny = np.zeros(gsize)
        rhs = np.zeros(gsize)
        psi = np.zeros(gsize)
        for k in range(ny):
            for g in range(ng):
                b = west[grp[g], k] if px else east[grp[g], k]
                subx[k, g] = b[1]
                inx[k, g] = 0.5 * (b[0] + b[2])
        for jj in range(nx):
            j = jj if px else nx - 1 - jj
            cx = 2.0 if jj == 0 else 1.5
            for g in range(ng):
                b = south[grp[g], j] if py else north[grp[g], j]
                suby[g] = b[1]
                iny[g] = 0.5 * (b[0] + b[2])
            for kk in range(ny):
                k = kk if py else ny - 1 - kk
                cy = 2.0 if kk == 0 else 1.5
                s = sigma[j, k]
                q = iso[j, k]
                for g in range(ng):
                    rhs[g] = q + ang[grp[g] if n_ang > 1 else 0, j, k]
                for g in range(gsize):
                    # outgoing trace is c * psi - sub; the divisor does not depend on upwind data
                    v = (rhs[g] + ax[g] * (subx[k, g] + inx[k, g]) + ay[g] * (suby[g] + iny[g])) / (
                        ax[g] * cx + ay[g] * cy + s
                    )
                    psi[g] = v
                    inx[k, g] = cx * v - subx[k, g]
                    subx[k, g] = 0.5 * v
                    iny[g] = cy * v - suby[g]
                    suby[g] = 0.5 * v
                for g in range(ng):
                    out[grp[g], j, k] = psi[g]


def fv_sweep(
    quad_dirs: np.ndarray,
    mesh: Mesh2D,
    sigma_eff: np.ndarray,
    iso_source: np.ndarray | None = None,
    ang_source: np.ndarray | None = None,
    inflow: InflowData | None = None,
) -> np.ndarray:
    """Invert the FV streaming-plus-removal operator for every ordinate.

    Solves per cell, in sweep order,
    ``(Ox/dx)(out - in)_x + (Oy/dy)(out - in)_y + sigma_eff psi = rhs``
    with ``rhs = iso_source + ang_source[i]``.

    ``quad_dirs`` is an ``(n, 3)`` direction array (a subset of a
    quadrature is fine); ``inflow`` must have matching leading size.
    """
    dirs = np.atleast_2d(np.asarray(quad_dirs, dtype=float))
    n = dirs.shape[0]
    sigma = np.ascontiguousarray(np.broadcast_to(np.asarray(sigma_eff, dtype=float), (mesh.nx, mesh.ny)))
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("removal coefficient must be finite and nonnegative")
    if np.any(dirs[:, 0] == 0) or np.any(dirs[:, 1] == 0):
        raise ValueError("axis-aligned ordinates cannot be swept")
    iso = np.zeros((mesh.nx, mesh.ny)) if iso_source is None else np.ascontiguousarray(iso_source, dtype=float)
    if ang_source is None:
        ang = np.zeros((1, mesh.nx, mesh.ny))
    else:
        ang = np.ascontiguousarray(ang_source, dtype=float)
        if ang.ndim == 2:
            ang = ang[None]
        if ang.shape[0] not in (1, n):
            raise ValueError(f"angular source has {ang.shape[0]} ordinates, expected {n}")
    if inflow is None:
        inflow = InflowData.zeros(mesh, n)
    out = np.empty((n, mesh.nx, mesh.ny))
    ox, oy = np.ascontiguousarray(dirs[:, 0]), np.ascontiguousarray(dirs[:, 1])
    _fv_sweep_kernel(
        ox, oy, mesh.dx, mesh.dy, ordinate_groups(ox, oy), sigma, iso, ang,
        inflow.west, inflow.east, inflow.south, inflow.north, out,
    )
    return out


def cell_balance_residual(psi, omega, mesh, sigma_eff, rhs, inflow=None, i=0):
    """Per-cell residual of the FV balance for one swept ordinate."""
    sx, sy = reconstruct_slopes(psi, omega, mesh, inflow, i)
    hx, hy = 0.5 * mesh.dx, 0.5 * mesh.dy
    if inflow is None:
        inflow = InflowData.zeros(mesh, i + 1)
    gx, gy = _inflow_faces(inflow, i, omega)
    gx_avg = 0.5 * (gx[:, 0] + gx[:, 2])
    gy_avg = 0.5 * (gy[:, 0] + gy[:, 2])
    if omega[0] > 0:
        out_x = psi + hx * sx
        in_x = np.vstack([gx_avg[None, :], out_x[:-1]])
    else:
        out_x = psi - hx * sx
        in_x = np.vstack([out_x[1:], gx_avg[None, :]])
    if omega[1] > 0:
        out_y = psi + hy * sy
        in_y = np.hstack([gy_avg[:, None], out_y[:, :-1]])
    else:
        out_y = psi - hy * sy
        in_y = np.hstack([out_y[:, 1:], gy_avg[:, None]])
    return (
        abs(omega[0]) / mesh.dx * (out_x - in_x)
        + abs(omega[1]) / mesh.dy * (out_y - in_y)
        + sigma_eff * psi
        - rhs
    )
