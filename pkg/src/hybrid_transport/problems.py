"""Benchmark problems, scalar flux, error norms and convergence tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Mesh2D, build_mesh
from .quadrature import FOUR_PI, Quadrature

Bounds = tuple  # (x0, x1, y0, y1)


@dataclass(frozen=True)
class ProblemSpec:
    """Data of a (possibly transient) scaled transport problem.

    ``sigma_t(x, y)`` and ``sigma_a(x, y)`` are sampled at cell centres.
    ``source(t, x, y, omega)``, ``boundary(t, x, y, omega)`` and
    ``initial(x, y, omega)`` may be ``None`` (zero). Sources flagged
    isotropic are evaluated once with an arbitrary ordinate.
    """

    name: str
    bounds: Bounds
    sigma_t: Callable
    sigma_a: Callable
    eps: float = 1.0
    source: Callable | None = None
    boundary: Callable | None = None
    initial: Callable | None = None
    isotropic_source: bool = False
    isotropic_initial: bool = False
    time_dependent_source: bool = False
    steady: bool = True
    t_final: float = 0.0
    dt_factor: float | None = None  # dt = dt_factor * dx when set

    def __post_init__(self):
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {self.bounds}")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not self.steady and self.t_final < 0:
            raise ValueError("final time must be nonnegative")

    def check_materials(self, mesh: Mesh2D):
        """Raise if ``sigma_t < eps^2 sigma_a`` anywhere on the mesh."""
        X, Y = mesh.centers()
        st = np.asarray(self.sigma_t(X, Y), dtype=float)
        sa = np.asarray(self.sigma_a(X, Y), dtype=float)
        if np.any(st - self.eps**2 * sa < -1e-12 * np.maximum(st, 1.0)):
            raise ValueError(f"{self.name}: sigma_t < eps^2 sigma_a somewhere")

    def mesh(self, n: int, ny: int | None = None) -> Mesh2D:
        return build_mesh(self.bounds, n, n if ny is None else ny)


def _const(value):
    return lambda x, y: np.full(np.shape(x), float(value))


# --- diffusion limit --------------------------------------------------------

def diffusion_source(t, x, y, omega):
    """``900 x^2 y^2 (1-x)^2 (1-y)^2 m(Omega)^2`` with ``m = sqrt(3/4pi) Omega_x``."""
    return 900.0 * x**2 * y**2 * (1 - x) ** 2 * (1 - y) ** 2 * (3.0 / FOUR_PI) * omega[0] ** 2


def build_diffusion_limit_problem(eps: float) -> ProblemSpec:
    """Steady problem on the unit square, ``sigma_t = 4``, ``sigma_a = 0.25``, vacuum inflow."""
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    return ProblemSpec(
        name="diffusion_limit",
        bounds=(0.0, 1.0, 0.0, 1.0),
        sigma_t=_const(4.0),
        sigma_a=_const(0.25),
        eps=eps,
        source=diffusion_source,
    )


# --- line source ------------------------------------------------------------

def build_line_source(beta: float = 0.09, t_final: float = 1.0, dt_factor: float = 5.0) -> ProblemSpec:
    """Gaussian pulse ``exp(-r^2/2beta^2)/(8 beta^2 pi^2)`` in a pure scatterer."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    c = 1.0 / (8.0 * beta**2 * math.pi**2)

    def initial(x, y, omega):
        return c * np.exp(-(x**2 + y**2) / (2.0 * beta**2))

    return ProblemSpec(
        name="line_source",
        bounds=(-1.5, 1.5, -1.5, 1.5),
        sigma_t=_const(1.0),
        sigma_a=_const(0.0),
        eps=1.0,
        initial=initial,
        isotropic_initial=True,
        steady=False,
        t_final=t_final,
        dt_factor=dt_factor,
    )


# --- lattice ----------------------------------------------------------------

LATTICE_SOURCE_TILE = (3, 3)
LATTICE_ABSORBERS = frozenset(
    (i, j) for i in range(1, 6) for j in range(1, 6) if (i + j) % 2 == 0
) - {(3, 3), (3, 5)}


def lattice_tiles(x, y):
    """Unit-tile indices ``(i, j)`` on ``[-3.5, 3.5]^2`` (``i`` along x)."""
    i = np.clip(np.floor(np.asarray(x) + 3.5), 0, 6).astype(int)
    j = np.clip(np.floor(np.asarray(y) + 3.5), 0, 6).astype(int)
    return i, j


def _absorber_mask(x, y):
    i, j = lattice_tiles(x, y)
    mask = np.zeros(np.shape(i), dtype=bool)
    for a, b in LATTICE_ABSORBERS:
        mask |= (i == a) & (j == b)
    return mask


def _source_mask(x, y):
    i, j = lattice_tiles(x, y)
    return (i == LATTICE_SOURCE_TILE[0]) & (j == LATTICE_SOURCE_TILE[1])


def build_lattice(t_final: float = 2.8, dt_factor: float = 10.0) -> ProblemSpec:
    """Checkerboard of absorbers (``sigma_t = sigma_a = 10``) around a unit source tile."""

    def sigma_t(x, y):
        return np.where(_absorber_mask(x, y), 10.0, 1.0)

    def sigma_a(x, y):
        return np.where(_absorber_mask(x, y), 10.0, 0.0)

    def source(t, x, y, omega):
        return np.where(_source_mask(x, y), 1.0, 0.0)

    return ProblemSpec(
        name="lattice",
        bounds=(-3.5, 3.5, -3.5, 3.5),
        sigma_t=sigma_t,
        sigma_a=sigma_a,
        eps=1.0,
        source=source,
        isotropic_source=True,
        steady=False,
        t_final=t_final,
        dt_factor=dt_factor,
    )


# --- diagnostics ------------------------------------------------------------

def scalar_flux(f: np.ndarray, quad: Quadrature) -> np.ndarray:
    """Cell-average ``phi = sum_i w_i psi_i`` (constant mode for DG fields)."""
    if f.shape[0] != quad.count:
        raise ValueError(f"angular field has {f.shape[0]} ordinates, quadrature has {quad.count}")
    acc = np.zeros(f.shape[1:3])
    for i in range(quad.count):
        acc += quad.weights[i] * (f[i] if f.ndim == 3 else f[i, ..., 0])
    return acc


def restrict(phi: np.ndarray, shape: tuple) -> np.ndarray:
    """Average a fine cell field onto a coarser mesh with integer ratios."""
    rx, ry = phi.shape[0] // shape[0], phi.shape[1] // shape[1]
    if rx * shape[0] != phi.shape[0] or ry * shape[1] != phi.shape[1] or rx < 1 or ry < 1:
        raise ValueError(f"cannot restrict {phi.shape} to {shape}: ratios must be integers")
    return phi.reshape(shape[0], rx, shape[1], ry).mean(axis=(1, 3))


@dataclass
class ErrorReport:
    e2: float
    einf: float
    h: float
    order: float | None = None


def error_norms(phi: np.ndarray, phi_ref: np.ndarray, h: float = float("nan")) -> ErrorReport:
    """Relative discrete L2 and max errors of cell averages against a reference.

    A finer reference is restricted by cell averaging first. On a uniform
    mesh the cell area cancels from the relative L2 ratio.
    """
    ref = restrict(phi_ref, phi.shape) if phi_ref.shape != phi.shape else phi_ref
    diff = ref - phi
    n2 = math.sqrt(float(np.sum(ref**2)))
    ninf = float(np.max(np.abs(ref)))
    if n2 == 0.0:
        raise ValueError("reference field has zero norm")
    return ErrorReport(math.sqrt(float(np.sum(diff**2))) / n2, float(np.max(np.abs(diff))) / ninf, h)


def observed_order(e_coarse: float, e_fine: float) -> float:
    return math.log2(e_coarse / e_fine)


@dataclass
class ConvergenceTable:
    label: str
    rows: list = field(default_factory=list)

    def format(self) -> str:
        lines = [f"# {self.label}", "h,E2,Einf,order"]
        for r in self.rows:
            order = "" if r.order is None else f"{r.order:.4f}"
            lines.append(f"{r.h:.17g},{r.e2:.6e},{r.einf:.6e},{order}")
        return "\n".join(lines)


def convergence_table(problem: ProblemSpec, method, cells, reference_method, reference_cells: int,
                      reference_phi: np.ndarray | None = None) -> ConvergenceTable:
    """Steady solves on ``n x n`` meshes for each ``n`` in ``cells`` against a fine reference."""
    from .solver import primary_discretization, solve_steady

    if reference_phi is None:
        ref_mesh = problem.mesh(reference_cells)
        sol = solve_steady(problem, ref_mesh, reference_method)
        reference_phi = scalar_flux(sol.f, primary_discretization(reference_method, ref_mesh).quad)
    table = ConvergenceTable(getattr(method, "label", str(method)))
    for n in cells:
        mesh = problem.mesh(n)
        sol = solve_steady(problem, mesh, method)
        phi = scalar_flux(sol.f, primary_discretization(method, mesh).quad)
        rep = error_norms(phi, reference_phi, mesh.h)
        if table.rows:
            rep.order = observed_order(table.rows[-1].e2, rep.e2)
        table.rows.append(rep)
    return table
