"""Hybrid collided/uncollided steady solves and the monolithic baseline.

The uncollided component is swept on its own space and quadrature; the
collided scalar flux solves a matrix-free GMRES system; a final sweep on
the uncollided discretization recombines both into the returned flux.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from . import dg, fv
from .cost_model import tally
from .krylov import GMRESConvergenceError, GMRESInfo, gmres_solve
from .mesh import InflowData, Mesh2D
from .quadrature import FOUR_PI, Quadrature, build_product_quadrature

log = logging.getLogger(__name__)

SPACES = ("FV", "DG")


@dataclass(frozen=True)
class GMRESOptions:
    tol: float = 1e-8
    restart: int = 30
    maxit: int = 200

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"GMRES tolerance must lie in (0, 1), got {self.tol}")
        if self.restart < 1 or self.maxit < 1:
            raise ValueError("GMRES restart and maxit must be positive")


def _check_order(n, name):
    if isinstance(n, bool) or int(n) != n or n < 2 or n % 2:
        raise ValueError(f"{name} must be an even integer >= 2, got {n!r}")


def _check_space(s, name):
    if s not in SPACES:
        raise ValueError(f"{name} must be one of {SPACES}, got {s!r}")


@dataclass(frozen=True)
class HybridConfig:
    """Uncollided/collided spaces and quadrature orders, e.g. FV-DG S8S4."""

    n_u: int
    n_c: int
    space_u: str = "FV"
    space_c: str = "DG"
    gmres: GMRESOptions = field(default_factory=GMRESOptions)

    def __post_init__(self):
        _check_order(self.n_u, "n_u")
        _check_order(self.n_c, "n_c")
        _check_space(self.space_u, "space_u")
        _check_space(self.space_c, "space_c")

    @property
    def label(self) -> str:
        return f"{self.space_u}-{self.space_c} S{self.n_u}S{self.n_c}"


@dataclass(frozen=True)
class MonolithicConfig:
    """A single space and quadrature (pure FV or pure DG)."""

    n: int
    space: str = "DG"
    gmres: GMRESOptions = field(default_factory=GMRESOptions)

    def __post_init__(self):
        _check_order(self.n, "n")
        _check_space(self.space, "space")

    @property
    def label(self) -> str:
        return f"{self.space} S{self.n}"


@dataclass(frozen=True)
class CrossSections:
    sigma_t: np.ndarray
    sigma_a: np.ndarray
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if np.any(self.sigma_t < 0) or np.any(self.sigma_a < 0):
            raise ValueError("cross sections must be nonnegative")
        if np.any(self.scattering < -1e-12 * np.maximum(self.sigma_t / self.eps, 1.0)):
            raise ValueError("sigma_t - eps^2 sigma_a must be nonnegative")

    @property
    def scattering(self) -> np.ndarray:
        """Coefficient ``sigma_t/eps - eps*sigma_a`` of the scattering operator."""
        return self.sigma_t / self.eps - self.eps * self.sigma_a

    @property
    def removal(self) -> np.ndarray:
        return self.sigma_t / self.eps


@functools.lru_cache(maxsize=None)
def quadrature(order: int) -> Quadrature:
    return build_product_quadrature(order)


@dataclass(frozen=True)
class Discretization:
    """One (space, quadrature) pair on a mesh."""

    space: str
    mesh: Mesh2D
    quad: Quadrature

    @property
    def n_modes(self) -> int:
        return 1 if self.space == "FV" else 4

    @property
    def scalar_shape(self) -> tuple:
        m = self.mesh
        return (m.nx, m.ny) if self.space == "FV" else (m.nx, m.ny, 4)

    @property
    def angular_shape(self) -> tuple:
        return (self.quad.count,) + self.scalar_shape

    def project(self, func, n_points: int = 3) -> np.ndarray:
        """Project ``func(x, y)`` onto the trial space."""
        if self.space == "FV":
            return fv.project_cell_average(self.mesh, func, n_points)
        return dg.project_q1(self.mesh, func, n_points)

    def project_angular(self, func, n_points: int = 3) -> np.ndarray:
        """Project ``func(x, y, omega)`` for every ordinate."""
        out = np.empty(self.angular_shape)
        for i, omega in enumerate(self.quad.directions):
            out[i] = self.project(lambda x, y: func(x, y, omega), n_points)
        tally("source", self.quad.count * self.mesh.n_cells * self.n_modes)
        return out

    def integral(self, phi: np.ndarray) -> float:
        """Exact domain integral of a scalar field in this space."""
        mean = phi if self.space == "FV" else phi[..., 0]
        return float(np.sum(mean) * self.mesh.cell_area)

    def cell_means(self, field: np.ndarray) -> np.ndarray:
        return field if self.space == "FV" else field[..., 0]

    def sweep(self, sigma_eff, iso=None, ang=None, inflow=None) -> np.ndarray:
        return sweep_all(self, sigma_eff, iso, ang, inflow)

    def average(self, psi: np.ndarray) -> np.ndarray:
        return apply_average(psi, self.quad)

    def net_outflow(self, psi: np.ndarray, inflow: InflowData | None = None) -> float:
        """Sum over ordinates of ``w_i * int_{dX} (Omega_i . n) psi_i``."""
        mesh = self.mesh
        total = 0.0
        for i, omega in enumerate(self.quad.directions):
            w = self.quad.weights[i]
            if self.space == "FV":
                tx, ty = fv.outflow_traces(psi[i], omega, mesh, inflow, i)
            else:
                tx, ty = dg.outflow_traces(psi[i], omega, mesh)
            out = abs(omega[0]) * mesh.dy * tx.sum() + abs(omega[1]) * mesh.dx * ty.sum()
            if inflow is not None:
                gx = inflow.west[i] if omega[0] > 0 else inflow.east[i]
                gy = inflow.south[i] if omega[1] > 0 else inflow.north[i]
                gx_avg = 0.5 * (gx[:, 0] + gx[:, 2])
                gy_avg = 0.5 * (gy[:, 0] + gy[:, 2])
                out -= abs(omega[0]) * mesh.dy * gx_avg.sum() + abs(omega[1]) * mesh.dx * gy_avg.sum()
            total += w * out
        return total


def apply_average(psi: np.ndarray, quad: Quadrature) -> np.ndarray:
    """``(1/4pi) sum_i w_i psi_i`` accumulated in ordinate storage order."""
    if psi.shape[0] != quad.count:
        raise ValueError(f"angular field has {psi.shape[0]} ordinates, quadrature has {quad.count}")
    flat = np.ascontiguousarray(psi, dtype=float).reshape(quad.count, -1)
    acc = _weighted_sum(np.asarray(quad.weights, dtype=float), flat)
    tally("integrate", psi.size)
    return acc.reshape(psi.shape[1:]) / FOUR_PI


@numba.njit(cache=True)
def _weighted_sum(w, flat):
    acc = np.zeros(flat.shape[1])
    for i in range(flat.shape[0]):
        wi = w[i]
        for c in range(flat.shape[1]):
            acc[c] += wi * flat[i, c]
    return acc


def transfer(phi: np.ndarray, source_space: str, target_space: str) -> np.ndarray:
    """Move a scalar field between FV and DG layouts (mean-preserving)."""
    _check_space(source_space, "source space")
    _check_space(target_space, "target space")
    expect_dims = 2 if source_space == "FV" else 3
    if phi.ndim != expect_dims or (source_space == "DG" and phi.shape[-1] != 4):
        raise ValueError(f"field of shape {phi.shape} is not a {source_space} scalar field")
    if source_space == target_space:
        return phi
    if source_space == "DG":
        return phi[..., 0].copy()
    out = np.zeros(phi.shape + (4,))
    out[..., 0] = phi
    return out


def apply_scatter(phi: np.ndarray, source_space: str, target_space: str, sigma_s: np.ndarray,
                  n_ordinates: int | None = None) -> np.ndarray:
    """Isotropic scattering source ``sigma_s * phi`` in the target space.

    Returns a spatial field shared by every ordinate, or the field copied
    to ``n_ordinates`` ordinates when that is given.
    """
    moved = transfer(phi, source_space, target_space)
    coef = sigma_s if target_space == "FV" else sigma_s[..., None]
    src = coef * moved
    if n_ordinates is not None:
        return np.broadcast_to(src, (n_ordinates,) + src.shape).copy()
    return src


def sweep_all(disc: Discretization, sigma_eff, iso=None, ang=None, inflow=None) -> np.ndarray:
    """Apply the inverse streaming operator of ``disc`` to a source."""
    m = disc.n_modes
    n = disc.quad.count
    if iso is not None:
        tally("copy", n * disc.mesh.n_cells * m)
    tally("sweep", n * disc.mesh.n_cells * m * m)
    kernel = fv.fv_sweep if disc.space == "FV" else dg.dg_sweep
    return kernel(disc.quad.directions, disc.mesh, sigma_eff, iso, ang, inflow)


def discretizations(config: HybridConfig, mesh: Mesh2D):
    return (
        Discretization(config.space_u, mesh, quadrature(config.n_u)),
        Discretization(config.space_c, mesh, quadrature(config.n_c)),
    )


def collided_operator_apply(phi_c: np.ndarray, disc_c: Discretization, sigma_eff, sigma_s) -> np.ndarray:
    """``phi_c - A (L^c)^-1 S phi_c``, the left-hand operator of the collided solve."""
    src = apply_scatter(phi_c, disc_c.space, disc_c.space, sigma_s)
    return phi_c - disc_c.average(disc_c.sweep(sigma_eff, iso=src))


@dataclass
class HybridSolution:
    f: np.ndarray
    f_u: np.ndarray
    phi_u: np.ndarray
    phi_c: np.ndarray
    gmres: GMRESInfo
    f_c: np.ndarray | None = None


@dataclass
class MonolithicSolution:
    f: np.ndarray
    phi: np.ndarray
    gmres: GMRESInfo


def _gmres(op, rhs, shape, opts: GMRESOptions, what: str):
    def matvec(v):
        return op(v.reshape(shape)).ravel()

    try:
        x, info = gmres_solve(matvec, rhs.ravel(), opts.tol, opts.restart, opts.maxit)
    except GMRESConvergenceError as exc:
        raise GMRESConvergenceError(f"{what}: {exc}", exc.x, exc.info) from exc
    log.debug("%s: GMRES %d iterations, residual %.2e", what, info.iterations, info.residual)
    return x.reshape(shape), info


def solve_hybrid_stage(
    mesh: Mesh2D,
    config: HybridConfig,
    sigma_eff,
    sigma_s,
    q_iso=None,
    q_ang=None,
    inflow: InflowData | None = None,
    with_collided: bool = False,
) -> HybridSolution:
    """One steady hybrid solve for prepared coefficients.

    ``q_iso``/``q_ang`` are the (already scaled) uncollided sources in the
    uncollided space; ``inflow`` is sampled on the uncollided ordinates.
    """
    du, dc = discretizations(config, mesh)
    f_u = du.sweep(sigma_eff, q_iso, q_ang, inflow)
    phi_u = du.average(f_u)

    src_uc = apply_scatter(phi_u, du.space, dc.space, sigma_s)
    rhs = dc.average(dc.sweep(sigma_eff, iso=src_uc))
    phi_c, info = _gmres(
        lambda v: collided_operator_apply(v, dc, sigma_eff, sigma_s),
        rhs, dc.scalar_shape, config.gmres, f"collided solve ({config.label})",
    )

    iso = apply_scatter(phi_c, dc.space, du.space, sigma_s) + apply_scatter(phi_u, du.space, du.space, sigma_s)
    if q_iso is not None:
        iso = iso + q_iso
    f = du.sweep(sigma_eff, iso, q_ang, inflow)

    f_c = None
    if with_collided:
        f_c = dc.sweep(sigma_eff, iso=src_uc + apply_scatter(phi_c, dc.space, dc.space, sigma_s))
    return HybridSolution(f=f, f_u=f_u, phi_u=phi_u, phi_c=phi_c, gmres=info, f_c=f_c)


def solve_monolithic_stage(
    mesh: Mesh2D,
    config: MonolithicConfig,
    sigma_eff,
    sigma_s,
    q_iso=None,
    q_ang=None,
    inflow: InflowData | None = None,
) -> MonolithicSolution:
    """Krylov source iteration ``(I - A L^-1 S) phi = A L^-1 q`` plus a final sweep."""
    disc = Discretization(config.space, mesh, quadrature(config.n))
    rhs = disc.average(disc.sweep(sigma_eff, q_iso, q_ang, inflow))
    phi, info = _gmres(
        lambda v: collided_operator_apply(v, disc, sigma_eff, sigma_s),
        rhs, disc.scalar_shape, config.gmres, f"source iteration ({config.label})",
    )
    iso = apply_scatter(phi, disc.space, disc.space, sigma_s)
    if q_iso is not None:
        iso = iso + q_iso
    f = disc.sweep(sigma_eff, iso, q_ang, inflow)
    return MonolithicSolution(f=f, phi=phi, gmres=info)


def primary_discretization(method, mesh: Mesh2D) -> Discretization:
    """Space/quadrature on which a method's returned flux lives."""
    if isinstance(method, HybridConfig):
        return Discretization(method.space_u, mesh, quadrature(method.n_u))
    return Discretization(method.space, mesh, quadrature(method.n))


def solve_stage(method, mesh, sigma_eff, sigma_s, q_iso=None, q_ang=None, inflow=None):
    if isinstance(method, HybridConfig):
        return solve_hybrid_stage(mesh, method, sigma_eff, sigma_s, q_iso, q_ang, inflow)
    if isinstance(method, MonolithicConfig):
        return solve_monolithic_stage(mesh, method, sigma_eff, sigma_s, q_iso, q_ang, inflow)
    raise TypeError(f"unsupported method configuration {method!r}")


# --- problem-level drivers ---------------------------------------------------

def cross_sections(problem, mesh: Mesh2D) -> CrossSections:
    """Materials sampled at cell centres."""
    X, Y = mesh.centers()
    st = np.broadcast_to(np.asarray(problem.sigma_t(X, Y), dtype=float), X.shape).copy()
    sa = np.broadcast_to(np.asarray(problem.sigma_a(X, Y), dtype=float), X.shape).copy()
    return CrossSections(st, sa, problem.eps)


def source_terms(problem, disc: Discretization, t: float):
    """Projected external source split into isotropic and angular parts."""
    if problem.source is None:
        return None, None
    if problem.isotropic_source:
        omega = disc.quad.directions[0]
        tally("source", disc.quad.count * disc.mesh.n_cells * disc.n_modes)
        return disc.project(lambda x, y: problem.source(t, x, y, omega)), None
    return None, disc.project_angular(lambda x, y, om: problem.source(t, x, y, om))


def inflow_data(problem, disc: Discretization, t: float) -> InflowData | None:
    if problem.boundary is None:
        return None
    return InflowData.from_function(disc.mesh, disc.quad, problem.boundary, t)


def solve_steady_hybrid(problem, mesh: Mesh2D, config: HybridConfig, t: float = 0.0) -> HybridSolution:
    """Steady hybrid solution with removal ``sigma_t/eps`` and source ``eps*q``."""
    xs = cross_sections(problem, mesh)
    du, _ = discretizations(config, mesh)
    q_iso, q_ang = source_terms(problem, du, t)
    eps = problem.eps
    return solve_hybrid_stage(
        mesh, config, xs.removal, xs.scattering,
        None if q_iso is None else eps * q_iso,
        None if q_ang is None else eps * q_ang,
        inflow_data(problem, du, t),
        with_collided=True,
    )


def solve_steady_monolithic(problem, mesh: Mesh2D, config: MonolithicConfig, t: float = 0.0) -> MonolithicSolution:
    xs = cross_sections(problem, mesh)
    disc = primary_discretization(config, mesh)
    q_iso, q_ang = source_terms(problem, disc, t)
    eps = problem.eps
    return solve_monolithic_stage(
        mesh, config, xs.removal, xs.scattering,
        None if q_iso is None else eps * q_iso,
        None if q_ang is None else eps * q_ang,
        inflow_data(problem, disc, t),
    )


def solve_steady(problem, mesh: Mesh2D, method):
    if isinstance(method, HybridConfig):
        return solve_steady_hybrid(problem, mesh, method)
    return solve_steady_monolithic(problem, mesh, method)
