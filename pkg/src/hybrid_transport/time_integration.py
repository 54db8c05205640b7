"""Implicit time stepping: backward Euler and a two-stage stiffly accurate DIRK.

Every implicit stage is a steady solve with removal
``sigma_t/eps + eps/dt'`` and source ``eps*(state/dt' + q)``, where ``dt'``
is the step (backward Euler) or ``alpha*dt`` (DIRK). For hybrid methods
the split into uncollided and collided parts happens inside each stage,
and the combined flux carries over as the next stage's state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh2D
from .solver import (
    cross_sections,
    inflow_data,
    primary_discretization,
    solve_stage,
    source_terms,
)

DIRK_ALPHA = 1.0 - 1.0 / math.sqrt(2.0)
INTEGRATORS = ("backward_euler", "dirk2")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform steps of ``dt`` up to ``t_final``; the last step may be shorter."""

    dt: float
    t_final: float

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"final time must be nonnegative, got {self.t_final}")

    @classmethod
    def from_cfl(cls, factor: float, dx: float, t_final: float) -> "TimeGrid":
        """``dt = factor * dx``."""
        return cls(factor * dx, t_final)

    @property
    def step_sizes(self) -> np.ndarray:
        n_full = int(math.floor(self.t_final / self.dt + 1e-12))
        sizes = [self.dt] * n_full
        rest = self.t_final - n_full * self.dt
        if rest > 1e-12 * max(self.t_final, 1.0):
            sizes.append(rest)
        return np.array(sizes)

    @property
    def n_steps(self) -> int:
        return len(self.step_sizes)

    @property
    def partial_final_step(self) -> bool:
        sizes = self.step_sizes
        return len(sizes) > 0 and sizes[-1] != self.dt

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.step_sizes)])


class StageAssembler:
    """Cached coefficients for repeated implicit stages of one problem."""

    def __init__(self, problem, mesh: Mesh2D, method):
        self.problem = problem
        self.mesh = mesh
        self.method = method
        self.disc = primary_discretization(method, mesh)
        self.xs = cross_sections(problem, mesh)
        self._source_cache = {}

    def _source(self, t):
        key = 0.0 if not self.problem.time_dependent_source else t
        if key not in self._source_cache:
            self._source_cache = {key: source_terms(self.problem, self.disc, key)}
        return self._source_cache[key]

    def solve(self, state: np.ndarray, t_stage: float, dt_eff: float):
        """Implicit stage ``eps (Y - state)/dt_eff = -L Y + S Y + eps q(t_stage)``."""
        eps = self.problem.eps
        sigma_eff = self.xs.removal + eps / dt_eff
        q_iso, q_src = self._source(t_stage)
        q_ang = (eps / dt_eff) * state
        if q_src is not None:
            q_ang = q_ang + eps * q_src
        if q_iso is not None:
            q_iso = eps * q_iso
        inflow = inflow_data(self.problem, self.disc, t_stage)
        return solve_stage(self.method, self.mesh, sigma_eff, self.xs.scattering, q_iso, q_ang, inflow)

    def initial_state(self) -> np.ndarray:
        if self.problem.initial is None:
            return np.zeros(self.disc.angular_shape)
        init = self.problem.initial
        if self.problem.isotropic_initial:
            omega = self.disc.quad.directions[0]
            base = self.disc.project(lambda x, y: init(x, y, omega))
            return np.broadcast_to(base, self.disc.angular_shape).copy()
        return self.disc.project_angular(init)


@dataclass
class StepResult:
    f: np.ndarray
    gmres_iterations: list


def step_backward_euler(assembler: StageAssembler, f_n: np.ndarray, t: float, dt: float) -> StepResult:
    sol = assembler.solve(f_n, t + dt, dt)
    return StepResult(sol.f, [sol.gmres.iterations])


def step_dirk2(assembler: StageAssembler, f_n: np.ndarray, t: float, dt: float) -> StepResult:
    """Two stages with ``a11 = a22 = alpha``, ``a21 = 1 - alpha``; ``f^{n+1}`` is stage two."""
    a = DIRK_ALPHA
    s1 = assembler.solve(f_n, t + a * dt, a * dt)
    z = f_n + ((1.0 - a) / a) * (s1.f - f_n)
    s2 = assembler.solve(z, t + dt, a * dt)
    return StepResult(s2.f, [s1.gmres.iterations, s2.gmres.iterations])


_STEPPERS = {"backward_euler": step_backward_euler, "dirk2": step_dirk2}


@dataclass
class StepRecord:
    t: float
    dt: float
    gmres_iterations: list
    balance: float | None = None


@dataclass
class TransientResult:
    f: np.ndarray
    t: float
    mesh: Mesh2D
    disc: object
    snapshots: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    partial_final_step: bool = False

    @property
    def phi(self) -> np.ndarray:
        from .problems import scalar_flux

        return scalar_flux(self.f, self.disc.quad)


def mass_balance_residual(assembler: StageAssembler, f_old, f_new, t_new: float, dt: float) -> float:
    """Relative defect of ``(eps/dt)(int phi_new - int phi_old) + outflow - sources``.

    Exact for backward Euler steps of monolithic solves (and matched-space
    hybrids) up to the GMRES residual.
    """
    disc = assembler.disc
    eps = assembler.problem.eps
    quad = disc.quad
    phi_new = np.tensordot(quad.weights, f_new, axes=1)
    mass_new = disc.integral(phi_new)
    mass_old = disc.integral(np.tensordot(quad.weights, f_old, axes=1))
    outflow = disc.net_outflow(f_new, inflow_data(assembler.problem, disc, t_new))
    absorbed = eps * float(np.sum(assembler.xs.sigma_a * disc.cell_means(phi_new))) * disc.mesh.cell_area
    q_iso, q_ang = assembler._source(t_new)
    emitted = 0.0
    if q_iso is not None:
        emitted = eps * float(quad.weights.sum()) * disc.integral(q_iso)
    elif q_ang is not None:
        emitted = eps * disc.integral(np.tensordot(quad.weights, q_ang, axes=1))
    rate = (eps / dt) * (mass_new - mass_old)
    defect = rate + outflow + absorbed - emitted
    scale = max(abs(rate), abs(outflow), abs(absorbed), abs(emitted), (eps / dt) * abs(mass_old), 1e-300)
    return abs(defect) / scale


def run_transient(
    problem,
    mesh: Mesh2D,
    method,
    grid: TimeGrid,
    integrator: str = "backward_euler",
    snapshot_times=(),
    check_balance: bool = False,
    initial: np.ndarray | None = None,
) -> TransientResult:
    """March from the projected initial condition to ``grid.t_final``.

    Scalar-flux snapshots are recorded at step times within ``1e-12`` of a
    requested time; ``check_balance`` records the per-step mass defect.
    """
    if integrator not in _STEPPERS:
        raise ValueError(f"unknown integrator {integrator!r}; expected one of {INTEGRATORS}")
    from .problems import scalar_flux

    step = _STEPPERS[integrator]
    assembler = StageAssembler(problem, mesh, method)
    f = assembler.initial_state() if initial is None else np.array(initial, dtype=float)
    if f.shape != assembler.disc.angular_shape:
        raise ValueError(f"initial state has shape {f.shape}, expected {assembler.disc.angular_shape}")
    result = TransientResult(f, 0.0, mesh, assembler.disc, partial_final_step=grid.partial_final_step)
    wanted = sorted(float(s) for s in snapshot_times)

    def snap(t, f):
        for s in wanted:
            if abs(s - t) <= 1e-12 * max(1.0, abs(s)) and s not in result.snapshots:
                result.snapshots[s] = scalar_flux(f, assembler.disc.quad)

    snap(0.0, f)
    t = 0.0
    for dt in grid.step_sizes:
        out = step(assembler, f, t, dt)
        balance = None
        if check_balance:
            balance = mass_balance_residual(assembler, f, out.f, t + dt, dt)
        t += dt
        f = out.f
        result.steps.append(StepRecord(t, float(dt), out.gmres_iterations, balance))
        snap(t, f)
    result.f = f
    result.t = t
    return result
