"""Q1 discontinuous Galerkin with upwind traces.

Each cell carries four coefficients in the modal basis
``{1, xi, eta, xi*eta}`` with ``xi = 2(x - x_j)/dx`` and
``eta = 2(y - y_k)/dy``; the basis index is ``p + 2q`` for ``xi**p eta**q``.
Angular fluxes are arrays of shape ``(N*, nx, ny, 4)``.
"""

from __future__ import annotations

import functools

import numba
import numpy as np

from .mesh import InflowData, Mesh2D, gauss_cell_points

MASS_DIAG = np.array([1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 9.0])

# 1D pieces on [-1, 1] for the basis {1, s}
_M1 = np.diag([2.0, 2.0 / 3.0])
_D1 = np.array([[0.0, 0.0], [2.0, 0.0]])  # D1[m, n] = int b_n b_m'


def _trace_outer(a: float, b: float) -> np.ndarray:
    """T[m, n] = b_m(a) b_n(b) for the 1D basis {1, s}."""
    return np.outer([1.0, a], [1.0, b])


def mass_matrix(mesh: Mesh2D) -> np.ndarray:
    return mesh.cell_area * np.diag(MASS_DIAG)


def streaming_matrix(ox: float, oy: float, dx: float, dy: float) -> np.ndarray:
    """Volume advection plus outflow-face terms of one cell (test x trial)."""
    sx = 1.0 if ox > 0 else -1.0
    sy = 1.0 if oy > 0 else -1.0
    return (
        -ox * 0.5 * dy * np.kron(_M1, _D1)
        - oy * 0.5 * dx * np.kron(_D1, _M1)
        + abs(ox) * 0.5 * dy * np.kron(_M1, _trace_outer(sx, sx))
        + abs(oy) * 0.5 * dx * np.kron(_trace_outer(sy, sy), _M1)
    )


def dg_local_operator(omega, mesh: Mesh2D, sigma_eff: float):
    """Local 4x4 matrix and upwind coupling maps for one cell and ordinate.

    Returns ``(A, Cx, Cy)``: the cell solves ``A c = M rhs + Cx c_x + Cy c_y``
    where ``c_x, c_y`` are the coefficients of the upwind x and y neighbours.
    """
    ox, oy = float(omega[0]), float(omega[1])
    dx, dy = mesh.dx, mesh.dy
    sx = 1.0 if ox > 0 else -1.0
    sy = 1.0 if oy > 0 else -1.0
    A = streaming_matrix(ox, oy, dx, dy) + sigma_eff * mass_matrix(mesh)
    # neighbour trace at its downwind face, tested on our upwind face
    Cx = abs(ox) * 0.5 * dy * np.kron(_M1, _trace_outer(-sx, sx))
    Cy = abs(oy) * 0.5 * dx * np.kron(_trace_outer(-sy, sy), _M1)
    return A, Cx, Cy


def project_q1(mesh: Mesh2D, func, n_points: int = 3) -> np.ndarray:
    """L2 projection of ``func(x, y)`` onto Q1, shape ``(nx, ny, 4)``."""
    X, Y, xi, eta, w = gauss_cell_points(mesh, n_points)
    vals = np.asarray(func(X, Y), dtype=float)
    basis = np.stack([np.ones_like(xi), xi, eta, xi * eta], axis=1)  # (n_q, 4)
    return (vals @ (w[:, None] * basis)) / (4.0 * MASS_DIAG)


def cell_average(f: np.ndarray) -> np.ndarray:
    """Constant-mode coefficient, i.e. the mean over each cell."""
    return f[..., 0]


def evaluate(coeffs: np.ndarray, xi, eta):
    """Point values of Q1 coefficients at reference coordinates."""
    return coeffs[..., 0] + coeffs[..., 1] * xi + coeffs[..., 2] * eta + coeffs[..., 3] * xi * eta


@functools.lru_cache(maxsize=32)
def _streaming_stack(dir_bytes: bytes, n_cols: int, dx: float, dy: float) -> np.ndarray:
    dirs = np.frombuffer(dir_bytes).reshape(-1, n_cols)
    stack = np.stack([streaming_matrix(o[0], o[1], dx, dy) for o in dirs])
    stack.flags.writeable = False
    return stack


_INVERSE_CACHE: dict = {}


def _inverse_table(dirs: np.ndarray, mesh: Mesh2D, sigma: np.ndarray):
    """Prefactored local inverses, one per (ordinate, distinct sigma).

    The last few tables are memoized: every sweep of one implicit stage
    reuses the same directions and removal field.
    """
    dir_bytes = np.ascontiguousarray(dirs, dtype=float).tobytes()
    sig = np.ascontiguousarray(sigma, dtype=float)
    key = (dir_bytes, dirs.shape[1], mesh.dx, mesh.dy, sig.shape, sig.tobytes())
    hit = _INVERSE_CACHE.get(key)
    if hit is not None:
        return hit
    values, classes = np.unique(sig, return_inverse=True)
    stream = _streaming_stack(dir_bytes, dirs.shape[1], mesh.dx, mesh.dy)
    mass = mass_matrix(mesh)
    A = stream[:, None, :, :] + values[None, :, None, None] * mass[None, None]
    ainv = np.ascontiguousarray(np.linalg.inv(A))
    cls = classes.reshape(sig.shape).astype(np.int64)
    ainv.flags.writeable = False
    cls.flags.writeable = False
    if len(_INVERSE_CACHE) >= 8:
        _INVERSE_CACHE.pop(next(iter(_INVERSE_CACHE)))
    _INVERSE_CACHE[key] = (ainv, cls)
    return ainv, cls


@numba.njit(parallel=True, cache=True)
def _dg_sweep_kernel(ox, oy, dx, dy, ainv, cls, iso, ang, west, east, south, north, out):
    n_ord = ox.shape[0]
    nx, ny = cls.shape
    n_ang = ang.shape[0]
    r3 = np.sqrt(3.0) / 2.0
    m0 = dx * dy
    m1 = m0 / 3.0
    m3 = m0 / 9.0
    for i in numba.prange(n_ord):
        ia = np.int64(i) if n_ang > 1 else np.int64(0)
        sx = 1.0 if ox[i] > 0 else -1.0
        sy = 1.0 if oy[i] > 0 else -1.0
        fx = abs(ox[i]) * 0.5 * dy
        fy = abs(oy[i]) * 0.5 * dx
        b = np.empty(4)
        for jj in range(nx):
            j = jj if ox[i] > 0 else nx - 1 - jj
            jp = j - 1 if ox[i] > 0 else j + 1
            for kk in range(ny):
                k = kk if oy[i] > 0 else ny - 1 - kk
                kp = k - 1 if oy[i] > 0 else k + 1
                b[0] = m0 * (iso[j, k, 0] + ang[ia, j, k, 0])
                b[1] = m1 * (iso[j, k, 1] + ang[ia, j, k, 1])
                b[2] = m1 * (iso[j, k, 2] + ang[ia, j, k, 2])
                b[3] = m3 * (iso[j, k, 3] + ang[ia, j, k, 3])
                # incoming x trace t0 + t1*eta
                if jj == 0:
                    if ox[i] > 0:
                        t0 = 0.5 * (west[i, k, 0] + west[i, k, 2])
                        t1 = r3 * (west[i, k, 2] - west[i, k, 0])
                    else:
                        t0 = 0.5 * (east[i, k, 0] + east[i, k, 2])
                        t1 = r3 * (east[i, k, 2] - east[i, k, 0])
                else:
                    t0 = out[i, jp, k, 0] + sx * out[i, jp, k, 1]
                    t1 = out[i, jp, k, 2] + sx * out[i, jp, k, 3]
                b[0] += fx * 2.0 * t0
                b[1] -= fx * sx * 2.0 * t0
                b[2] += fx * (2.0 / 3.0) * t1
                b[3] -= fx * sx * (2.0 / 3.0) * t1
                # incoming y trace t0 + t1*xi
                if kk == 0:
                    if oy[i] > 0:
                        t0 = 0.5 * (south[i, j, 0] + south[i, j, 2])
                        t1 = r3 * (south[i, j, 2] - south[i, j, 0])
                    else:
                        t0 = 0.5 * (north[i, j, 0] + north[i, j, 2])
                        t1 = r3 * (north[i, j, 2] - north[i, j, 0])
                else:
                    t0 = out[i, j, kp, 0] + sy * out[i, j, kp, 2]
                    t1 = out[i, j, kp, 1] + sy * out[i, j, kp, 3]
                b[0] += fy * 2.0 * t0
                b[1] += fy * (2.0 / 3.0) * t1
                b[2] -= fy * sy * 2.0 * t0
                b[3] -= fy * sy * (2.0 / 3.0) * t1
                c = cls[j, k]
                for m in range(4):
                    out[i, j, k, m] = (
                        ainv[i, c, m, 0] * b[0]
                        + ainv[i, c, m, 1] * b[1]
                        + ainv[i, c, m, 2] * b[2]
                        + ainv[i, c, m, 3] * b[3]
                    )


def dg_sweep(
    quad_dirs: np.ndarray,
    mesh: Mesh2D,
    sigma_eff: np.ndarray,
    iso_source: np.ndarray | None = None,
    ang_source: np.ndarray | None = None,
    inflow: InflowData | None = None,
) -> np.ndarray:
    """Invert the upwind DG streaming-plus-removal operator per ordinate.

    Sources are Q1 coefficient fields (``(nx, ny, 4)`` isotropic and/or
    ``(N*, nx, ny, 4)`` angular); the local right-hand side is their
    mass-matrix action plus upwind inflow.
    """
    dirs = np.atleast_2d(np.asarray(quad_dirs, dtype=float))
    n = dirs.shape[0]
    sigma = np.broadcast_to(np.asarray(sigma_eff, dtype=float), (mesh.nx, mesh.ny))
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("removal coefficient must be finite and nonnegative")
    if np.any(dirs[:, 0] == 0) or np.any(dirs[:, 1] == 0):
        raise ValueError("axis-aligned ordinates cannot be swept")
    ainv, cls = _inverse_table(dirs, mesh, sigma)
    if not np.all(np.isfinite(ainv)):
        raise np.linalg.LinAlgError("singular local DG matrix")
    iso = np.zeros((mesh.nx, mesh.ny, 4)) if iso_source is None else np.ascontiguousarray(iso_source, dtype=float)
    if ang_source is None:
        ang = np.zeros((1, mesh.nx, mesh.ny, 4))
    else:
        ang = np.ascontiguousarray(ang_source, dtype=float)
        if ang.ndim == 3:
            ang = ang[None]
        if ang.shape[0] not in (1, n):
            raise ValueError(f"angular source has {ang.shape[0]} ordinates, expected {n}")
    if inflow is None:
        inflow = InflowData.zeros(mesh, n)
    out = np.empty((n, mesh.nx, mesh.ny, 4))
    _dg_sweep_kernel(
        np.ascontiguousarray(dirs[:, 0]), np.ascontiguousarray(dirs[:, 1]),
        mesh.dx, mesh.dy, ainv, cls, iso, ang,
        inflow.west, inflow.east, inflow.south, inflow.north, out,
    )
    return out


def outflow_traces(f: np.ndarray, omega, mesh: Mesh2D):
    """Face averages of the traces on the downwind x and y boundaries."""
    sx = 1.0 if omega[0] > 0 else -1.0
    sy = 1.0 if omega[1] > 0 else -1.0
    jx = -1 if omega[0] > 0 else 0
    ky = -1 if omega[1] > 0 else 0
    tx = f[jx, :, 0] + sx * f[jx, :, 1]
    ty = f[:, ky, 0] + sy * f[:, ky, 2]
    return tx, ty
