"""Restarted GMRES with modified Gram-Schmidt and Givens rotations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GMRESInfo:
    iterations: int
    residual: float  # final relative residual
    converged: bool
    restarts: int = 0


class GMRESConvergenceError(RuntimeError):
    def __init__(self, message: str, x: np.ndarray, info: GMRESInfo):
        super().__init__(message)
        self.x = x
        self.info = info


def gmres_solve(operator, rhs, tol: float = 1e-8, restart: int = 30, maxit: int = 200, x0=None):
    """Solve ``operator(x) = rhs`` to relative residual ``tol``.

    ``operator`` maps 1D arrays to 1D arrays. Returns ``(x, GMRESInfo)``;
    ``iterations`` counts operator applications inside Arnoldi. Raises
    :class:`GMRESConvergenceError` (carrying the best iterate) if ``maxit``
    iterations do not reach ``tol``.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {tol}")
    if restart < 1 or maxit < 1:
        raise ValueError("restart and maxit must be positive")
    b = np.asarray(rhs, dtype=float).ravel()
    n = b.size
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    if bnorm == 0.0:
        return np.zeros(n), GMRESInfo(0, 0.0, True)

    total = 0
    restarts = 0
    r = b - operator(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    rel = beta / bnorm
    while True:
        if rel <= tol:
            return x, GMRESInfo(total, rel, True, restarts)
        if total >= maxit:
            info = GMRESInfo(total, rel, False, restarts)
            raise GMRESConvergenceError(
                f"GMRES did not reach tol={tol:.1e} in {maxit} iterations "
                f"(best relative residual {rel:.3e})",
                x,
                info,
            )
        m = min(restart, maxit - total)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            w = np.array(operator(V[k]), dtype=float).ravel()  # copy: operator may return its input
            total += 1
            for j in range(k + 1):
                H[j, k] = np.dot(V[j], w)
                w -= H[j, k] * V[j]
            hk1 = np.linalg.norm(w)
            H[k + 1, k] = hk1
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k] = H[k, k] / denom
                sn[k] = H[k + 1, k] / denom
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            if abs(g[k + 1]) / bnorm <= tol or hk1 == 0.0:
                break
            if k + 1 < m:
                V[k + 1] = w / hk1
        y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used])
        x = x + y @ V[:k_used]
        r = b - operator(x)
        beta = np.linalg.norm(r)
        rel = beta / bnorm
        restarts += 1
