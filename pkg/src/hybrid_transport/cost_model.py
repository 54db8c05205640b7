"""Leading-order flop and memory predictors, plus runtime flop tallies.

The flop model counts work per cell per solver iteration for the four
kernels every method is built from: ``source`` (project a source onto
the trial space), ``integrate`` (weighted ordinate average), ``copy``
(spread an isotropic field over all ordinates) and ``sweep`` (invert the
streaming operator with prefactored local matrices).
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field

import sympy as sp

BYTES_MB = 7.63e-6  # one float64 entry, in MB
METHODS = ("FV", "DG", "DG-DG", "FV-DG")
GRIDS = ("Cartesian", "Triangular")
SUBROUTINES = ("source", "integrate", "copy", "sweep")


# --- symbolic tables -------------------------------------------------------

def _syms(d, n, nu, nc):
    return [sp.sympify(v) for v in (d, n, nu, nc)]


def subroutine_table(method: str, grid: str, d=None, n_star=None, n_u=None, n_c=None) -> dict:
    """Per-subroutine leading-order flops per cell (rectangular/triangular rows).

    Arguments left as ``None`` stay symbolic.
    """
    d, n, nu, nc = _syms(
        d if d is not None else sp.Symbol("d"),
        n_star if n_star is not None else sp.Symbol("N"),
        n_u if n_u is not None else sp.Symbol("N_u"),
        n_c if n_c is not None else sp.Symbol("N_c"),
    )
    _check(method, grid)
    if grid == "Cartesian":
        m, m2 = 2**d, 2 ** (2 * d)
    else:
        m, m2 = d + 1, (d + 1) ** 2
    rows = {
        "FV": (n, n, n, n),
        "DG": (m * n, m * n, m * n, m2 * n),
        "DG-DG": (m * nu, m * (nu + nc), m * (nu + nc), m2 * (nu + nc)),
        "FV-DG": (nu, nu + m * nc, nu + m * nc, nu + m2 * nc),
    }
    return dict(zip(SUBROUTINES, rows[method]))


def _check(method, grid):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if grid not in GRIDS:
        raise ValueError(f"unknown grid {grid!r}; expected one of {GRIDS}")


def flops_per_cell(method: str, grid: str = "Cartesian", d=2, n_star=None, n_u=None, n_c=None):
    """Leading-order flops per iteration per cell for each method.

    Returns a sympy expression (numeric when all counts are given).
    """
    _check(method, grid)
    d, n, nu, nc = _syms(
        d if d is not None else sp.Symbol("d"),
        n_star if n_star is not None else sp.Symbol("N"),
        n_u if n_u is not None else sp.Symbol("N_u"),
        n_c if n_c is not None else sp.Symbol("N_c"),
    )
    if grid == "Cartesian":
        dg = 2**d + 2 ** (2 * d)
        dgdg = dg
    else:
        dg = (d + 1) ** 2
        dgdg = (d + 1) * (d + 2)
    table = {
        "FV": n,
        "DG": dg * n,
        "DG-DG": dgdg * (nu + nc),
        "FV-DG": nu + dgdg * nc,
    }
    return sp.expand(table[method])


def dof_per_cell(method: str, grid: str = "Cartesian", d=2, n_star=None, n_u=None, n_c=None):
    _check(method, grid)
    d, n, nu, nc = _syms(
        d if d is not None else sp.Symbol("d"),
        n_star if n_star is not None else sp.Symbol("N"),
        n_u if n_u is not None else sp.Symbol("N_u"),
        n_c if n_c is not None else sp.Symbol("N_c"),
    )
    m = 2**d if grid == "Cartesian" else d + 1
    table = {"FV": n, "DG": m * n, "DG-DG": m * (nu + nc), "FV-DG": nu + m * nc}
    return sp.expand(table[method])


def leading_terms(expr_by_subroutine: dict):
    """Collapse a subroutine row to its distinct leading-order terms.

    Each entry is split into ``coefficient(d) * count`` terms per ordinate
    count; every distinct pair appearing anywhere in the row is kept once.
    This is how the per-subroutine rows reduce to one per-iteration count.
    """
    counts = [sp.Symbol(s) for s in ("N", "N_u", "N_c")]
    terms = set()
    for expr in expr_by_subroutine.values():
        for sym, coef in sp.collect(sp.expand(expr), counts, evaluate=False).items():
            terms.add((sym, sp.factor(coef)))
    return sp.expand(sum(coef * sym for sym, coef in terms))


# --- runtime prediction ----------------------------------------------------

@dataclass(frozen=True)
class SubroutineCounts:
    n_so: int
    n_int: int
    n_cp: int
    n_sw: int
    n_int_u: int = 0
    n_cp_u: int = 0
    n_sw_u: int = 0
    n_int_c: int = 0
    n_cp_c: int = 0
    n_sw_c: int = 0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative")


# occurrence counts behind the line-source timing predictions
LINE_SOURCE_COUNTS = SubroutineCounts(42, 124, 124, 166, 42, 42, 84, 124, 124, 124)


def _work_units(method: str, counts: SubroutineCounts, n_star, n_u, n_c, d: int) -> float:
    """Work in units of ``k * M`` (k: time per flop-unit per cell)."""
    m = 2**d
    c = counts
    if method == "DG":
        return (m * c.n_so + m * c.n_int + m * c.n_cp + m * m * c.n_sw) * n_star
    if method == "FV":
        return (c.n_so + c.n_int + c.n_cp + c.n_sw) * n_star
    if method == "DG-DG":
        return ((c.n_so + c.n_int_u + c.n_cp_u + m * c.n_sw_u) * n_u + (c.n_int_c + c.n_cp_c + m * c.n_sw_c) * n_c) * m
    if method == "FV-DG":
        return (c.n_so + c.n_int_u + c.n_cp_u + c.n_sw_u) * n_u + m * (c.n_int_c + c.n_cp_c + m * c.n_sw_c) * n_c
    raise ValueError(f"unknown method {method!r}")


def predict_runtime(counts: SubroutineCounts, reference: dict, target: dict, d: int = 2) -> float:
    """Predicted minutes for ``target`` calibrated on a measured ``reference``.

    Both dicts carry ``method``, ``M`` and either ``n_star`` or
    ``n_u``/``n_c``; ``reference`` also carries ``minutes``.
    """
    if reference["minutes"] <= 0:
        raise ValueError("reference time must be positive")
    ref_units = _work_units(
        reference["method"], counts, reference.get("n_star"), reference.get("n_u"), reference.get("n_c"), d
    )
    k = reference["minutes"] / (ref_units * reference["M"])
    tgt_units = _work_units(target["method"], counts, target.get("n_star"), target.get("n_u"), target.get("n_c"), d)
    return k * tgt_units * target["M"]


# --- memory prediction -----------------------------------------------------

def memory_entries(method: str, M: int, d: int = 2, n_star=None, n_u=None, n_c=None, krylov_iterations: int = 2) -> float:
    """Entries held in the method's large arrays and Krylov vectors.

    Solution/source storage plus GMRES temporaries give five angular-size
    arrays; the spatial-size count is a fixed base plus ``k + 1`` Krylov
    vectors at GMRES depth ``k`` (6 + 3 for the monolithic methods and
    9 + 3 for the hybrids at the default depth of 2).
    """
    m = 2**d
    krylov = krylov_iterations + 1
    if method == "DG":
        return 5 * m * n_star * M + (6 + krylov) * m * M
    if method == "FV":
        return 5 * n_star * M + (6 + krylov) * M
    if method == "DG-DG":
        return 4 * m * n_u * M + m * n_c * M + (9 + krylov) * m * M
    if method == "FV-DG":
        return 4 * n_u * M + m * n_c * M + (9 + krylov) * m * M
    raise ValueError(f"unknown method {method!r}")


def predict_memory(method: str, M: int, d: int = 2, n_star=None, n_u=None, n_c=None,
                   krylov_iterations: int = 2, overhead: float = 21.7) -> float:
    """Predicted peak memory in MB."""
    if M < 0:
        raise ValueError("cell count must be nonnegative")
    return memory_entries(method, M, d, n_star, n_u, n_c, krylov_iterations) * BYTES_MB + overhead


def calibrate_overhead(measured_mb: float, method: str, M: int, d: int = 2, n_star=None, n_u=None, n_c=None,
                       krylov_iterations: int = 2) -> float:
    """Fixed overhead ``x`` such that the model reproduces ``measured_mb``."""
    x = measured_mb - memory_entries(method, M, d, n_star, n_u, n_c, krylov_iterations) * BYTES_MB
    if x < 0:
        raise ValueError(f"measured memory {measured_mb} MB is below the modelled arrays ({measured_mb - x:.1f} MB)")
    return x


# --- runtime instrumentation -----------------------------------------------

@dataclass
class FlopCounter:
    """Flop-unit tallies per subroutine (one unit per multiply-add)."""

    units: dict = field(default_factory=lambda: dict.fromkeys(SUBROUTINES, 0))
    calls: dict = field(default_factory=lambda: dict.fromkeys(SUBROUTINES, 0))

    def add(self, kind: str, units: int):
        self.units[kind] += int(units)
        self.calls[kind] += 1

    @property
    def total(self) -> int:
        return sum(self.units.values())

    def merge(self, other: "FlopCounter"):
        for k in SUBROUTINES:
            self.units[k] += other.units[k]
            self.calls[k] += other.calls[k]


_ACTIVE: contextvars.ContextVar[FlopCounter | None] = contextvars.ContextVar("flop_counter", default=None)


@contextlib.contextmanager
def instrument():
    """Collect flop tallies from every solver call made inside the block."""
    counter = FlopCounter()
    token = _ACTIVE.set(counter)
    try:
        yield counter
    finally:
        _ACTIVE.reset(token)


def tally(kind: str, units: int):
    counter = _ACTIVE.get()
    if counter is not None:
        counter.add(kind, units)
