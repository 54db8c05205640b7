"""Hybrid collided/uncollided discrete-ordinates transport in 2D."""

import os

# the bundled TBB is too old for numba; avoid the probe warning
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .mesh import InflowData, Mesh2D, build_mesh
from .problems import (
    ProblemSpec,
    build_diffusion_limit_problem,
    build_lattice,
    build_line_source,
    error_norms,
    scalar_flux,
)
from .quadrature import Quadrature, build_product_quadrature
from .solver import (
    GMRESOptions,
    HybridConfig,
    MonolithicConfig,
    solve_steady,
    solve_steady_hybrid,
    solve_steady_monolithic,
)
from .time_integration import TimeGrid, run_transient

__all__ = [
    "GMRESOptions",
    "HybridConfig",
    "InflowData",
    "Mesh2D",
    "MonolithicConfig",
    "ProblemSpec",
    "Quadrature",
    "TimeGrid",
    "build_diffusion_limit_problem",
    "build_lattice",
    "build_line_source",
    "build_mesh",
    "build_product_quadrature",
    "error_norms",
    "run_transient",
    "scalar_flux",
    "solve_steady",
    "solve_steady_hybrid",
    "solve_steady_monolithic",
]
