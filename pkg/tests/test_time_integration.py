import math

import numpy as np
import pytest

from hybrid_transport.problems import ProblemSpec, build_line_source, scalar_flux
from hybrid_transport.solver import GMRESOptions, HybridConfig, MonolithicConfig
from hybrid_transport.time_integration import (
    DIRK_ALPHA,
    StageAssembler,
    TimeGrid,
    run_transient,
    step_backward_euler,
    step_dirk2,
)

TIGHT = GMRESOptions(tol=1e-12, restart=60, maxit=400)
METHODS = [
    MonolithicConfig(4, "DG", TIGHT),
    MonolithicConfig(4, "FV", TIGHT),
    HybridConfig(4, 4, "DG", "DG", TIGHT),
    HybridConfig(4, 4, "FV", "FV", TIGHT),
]
IDS = [m.label for m in METHODS]


def const(v):
    return lambda x, y: np.full(np.shape(x), float(v))


def uniform_problem(sigma_t, sigma_a, eps, q, boundary, initial):
    """Uniform medium whose boundary data follow the spatially constant solution."""
    return ProblemSpec(
        name="uniform",
        bounds=(0.0, 1.0, 0.0, 1.0),
        sigma_t=const(sigma_t),
        sigma_a=const(sigma_a),
        eps=eps,
        source=None if q is None else (lambda t, x, y, om: np.full(np.shape(x), q(t))),
        isotropic_source=True,
        time_dependent_source=True,
        boundary=lambda t, x, y, om: np.full(np.shape(x), boundary(t)),
        initial=lambda x, y, om: np.full(np.shape(x), initial),
        isotropic_initial=True,
        steady=False,
    )


def angular_values(f):
    return f if f.ndim == 3 else f[..., 0]


def test_time_grid():
    g = TimeGrid(0.3, 1.0)
    np.testing.assert_allclose(g.step_sizes, [0.3, 0.3, 0.3, 0.1])
    assert g.partial_final_step and g.n_steps == 4
    assert math.isclose(g.times[-1], 1.0, abs_tol=1e-12)
    exact = TimeGrid(0.25, 1.0)
    assert exact.n_steps == 4 and not exact.partial_final_step
    assert TimeGrid(0.5, 0.0).n_steps == 0
    assert TimeGrid.from_cfl(5.0, 0.01, 1.0).dt == pytest.approx(0.05)
    for bad in [(0.0, 1.0), (-1.0, 1.0), (math.inf, 1.0), (0.1, -1.0)]:
        with pytest.raises(ValueError):
            TimeGrid(*bad)


@pytest.mark.parametrize("method", METHODS, ids=IDS)
@pytest.mark.parametrize("integrator", ["backward_euler", "dirk2"])
def test_equilibrium_is_preserved(method, integrator):
    c = 0.35
    p = uniform_problem(2.0, 0.0, 0.5, None, lambda t: c, c)
    res = run_transient(p, p.mesh(4), method, TimeGrid(0.1, 0.3), integrator)
    np.testing.assert_allclose(angular_values(res.f), c, rtol=1e-10)


@pytest.mark.parametrize("integrator", ["backward_euler", "dirk2"])
def test_zero_problem_stays_zero(integrator):
    p = ProblemSpec("zero", (0, 1, 0, 1), const(1.0), const(0.5), steady=False)
    res = run_transient(p, p.mesh(3), HybridConfig(4, 2), TimeGrid(0.1, 0.2), integrator)
    assert not res.f.any()


def scalar_be(u, dt, sa, q):
    return (u / dt + q) / (1.0 / dt + sa)


def scalar_dirk(u, t, dt, sa, q):
    a = DIRK_ALPHA
    y1 = scalar_be(u, a * dt, sa, q(t + a * dt))
    z = u + ((1 - a) / a) * (y1 - u)
    return y1, scalar_be(z, a * dt, sa, q(t + dt))


@pytest.mark.parametrize("method", METHODS, ids=IDS)
def test_backward_euler_matches_scalar_oracle(method):
    sa, u0, dt = 0.8, 1.3, 0.2
    q = lambda t: 0.5 + t  # noqa: E731
    states = {0.0: u0}
    u, t = u0, 0.0
    for _ in range(2):
        u = scalar_be(u, dt, sa, q(t + dt))
        t = round(t + dt, 12)
        states[t] = u
    p = uniform_problem(2.0, sa, 0.5, q, lambda t: states[round(t, 12)], u0)
    res = run_transient(p, p.mesh(3), method, TimeGrid(dt, 0.4))
    np.testing.assert_allclose(angular_values(res.f), states[0.4], rtol=1e-10)


@pytest.mark.parametrize("method", METHODS, ids=IDS)
def test_dirk2_matches_scalar_oracle(method):
    sa, u0, dt = 0.8, 1.3, 0.2
    q = lambda t: 0.5 + math.sin(t)  # noqa: E731
    y1, y2 = scalar_dirk(u0, 0.0, dt, sa, q)
    table = {round(DIRK_ALPHA * dt, 12): y1, round(dt, 12): y2}
    p = uniform_problem(3.0, sa, 0.25, q, lambda t: table[round(t, 12)], u0)
    asm = StageAssembler(p, p.mesh(3), method)
    out = step_dirk2(asm, asm.initial_state(), 0.0, dt)
    np.testing.assert_allclose(angular_values(out.f), y2, rtol=1e-10)
    assert len(out.gmres_iterations) == 2


def test_dirk2_temporal_order():
    # manufactured u(t) = 1 + sin(2t)/2 with q = u' + sigma_a u; boundary follows u
    sa = 1.0
    u = lambda t: 1.0 + 0.5 * math.sin(2 * t)  # noqa: E731
    q = lambda t: math.cos(2 * t) + sa * u(t)  # noqa: E731
    p = uniform_problem(2.0, sa, 1.0, q, u, u(0.0))
    errs = []
    for n in (4, 8, 16):
        res = run_transient(p, p.mesh(2), MonolithicConfig(2, "DG", TIGHT), TimeGrid(1.0 / n, 1.0), "dirk2")
        errs.append(np.max(np.abs(angular_values(res.f) - u(1.0))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8, orders
    res = run_transient(p, p.mesh(2), MonolithicConfig(2, "DG", TIGHT), TimeGrid(1.0 / 16, 1.0))
    assert np.max(np.abs(angular_values(res.f) - u(1.0))) > 10 * errs[-1]


def test_zero_steps_returns_initial_state():
    p = build_line_source()
    mesh = p.mesh(8)
    res = run_transient(p, mesh, HybridConfig(4, 2), TimeGrid(0.1, 0.0), snapshot_times=[0.0])
    init = StageAssembler(p, mesh, HybridConfig(4, 2)).initial_state()
    np.testing.assert_array_equal(res.f, init)
    assert res.steps == [] and res.t == 0.0
    np.testing.assert_array_equal(res.snapshots[0.0], res.phi)


@pytest.mark.parametrize("integrator,stepper", [("backward_euler", step_backward_euler), ("dirk2", step_dirk2)])
def test_one_step_equals_step_operator(integrator, stepper):
    p = build_line_source()
    mesh = p.mesh(8)
    method = HybridConfig(4, 2)
    res = run_transient(p, mesh, method, TimeGrid(0.05, 0.05), integrator)
    asm = StageAssembler(p, mesh, method)
    np.testing.assert_array_equal(res.f, stepper(asm, asm.initial_state(), 0.0, 0.05).f)


def test_snapshots_and_partial_step():
    p = build_line_source()
    res = run_transient(p, p.mesh(6), HybridConfig(4, 2), TimeGrid(0.04, 0.1), snapshot_times=[0.04, 0.1, 0.05])
    assert res.partial_final_step
    assert sorted(res.snapshots) == [0.04, 0.1]
    assert res.steps[-1].dt == pytest.approx(0.02)
    np.testing.assert_array_equal(res.snapshots[0.1], res.phi)


def test_initial_state_shape_checked():
    p = build_line_source()
    with pytest.raises(ValueError):
        run_transient(p, p.mesh(4), HybridConfig(4, 2), TimeGrid(0.1, 0.1), initial=np.zeros((3, 4, 4)))
    with pytest.raises(ValueError):
        run_transient(p, p.mesh(4), HybridConfig(4, 2), TimeGrid(0.1, 0.1), integrator="rk4")


@pytest.mark.parametrize("method", METHODS, ids=IDS)
def test_backward_euler_mass_balance(method):
    p = build_line_source(beta=0.3)
    res = run_transient(p, p.mesh(10), method, TimeGrid(0.15, 0.3), check_balance=True)
    for s in res.steps:
        assert s.balance <= 1e-9


def test_mass_balance_with_absorption_and_source():
    p = ProblemSpec("abs", (0, 1, 0, 1), const(2.0), const(0.7), eps=0.5,
                    source=lambda t, x, y, om: np.where(x < 0.5, 1.0, 0.0), isotropic_source=True,
                    initial=lambda x, y, om: np.exp(-x - y), isotropic_initial=True, steady=False)
    res = run_transient(p, p.mesh(6), MonolithicConfig(4, "DG", TIGHT), TimeGrid(0.1, 0.2), check_balance=True)
    assert max(s.balance for s in res.steps) <= 1e-9


def test_line_source_mass_is_conserved_early():
    # before reaching the boundary, total particle count is constant
    p = build_line_source()
    mesh = p.mesh(24)
    res = run_transient(p, mesh, HybridConfig(4, 2), TimeGrid(0.1, 0.2), snapshot_times=[0.0, 0.2])
    m0 = res.snapshots[0.0].sum() * mesh.cell_area
    m1 = res.snapshots[0.2].sum() * mesh.cell_area
    assert abs(m1 - m0) < 1e-3 * m0
    np.testing.assert_allclose(m0, 1.0, rtol=2e-2)  # integral of psi_0 is 1/(4 pi)
    assert scalar_flux(res.f, res.disc.quad).shape == (24, 24)
