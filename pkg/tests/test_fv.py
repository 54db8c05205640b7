import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import fv_dense_solve
from hybrid_transport import fv
from hybrid_transport.mesh import InflowData, build_mesh
from hybrid_transport.quadrature import build_product_quadrature

Q4 = build_product_quadrature(4)


def _random_inflow(rng, mesh, n):
    return InflowData(
        rng.normal(size=(n, mesh.ny, 3)), rng.normal(size=(n, mesh.ny, 3)),
        rng.normal(size=(n, mesh.nx, 3)), rng.normal(size=(n, mesh.nx, 3)),
    )


@pytest.mark.parametrize("nx", [1, 2, 3, 4])
@pytest.mark.parametrize("ny", [1, 2, 3, 4])
def test_sweep_matches_dense_solve(nx, ny):
    rng = np.random.default_rng(10 * nx + ny)
    mesh = build_mesh((0.0, 1.0, -0.5, 0.25), nx, ny)
    sigma = rng.uniform(0.0, 4.0, (nx, ny))
    iso = rng.normal(size=(nx, ny))
    ang = rng.normal(size=(Q4.count, nx, ny))
    inflow = _random_inflow(rng, mesh, Q4.count)
    out = fv.fv_sweep(Q4.directions, mesh, sigma, iso, ang, inflow)
    for i, omega in enumerate(Q4.directions):
        ref = fv_dense_solve(omega, mesh, sigma, iso + ang[i], inflow, i)
        assert np.linalg.norm(out[i] - ref) <= 1e-12 * np.linalg.norm(ref)


def test_zero_data_gives_zero():
    mesh = build_mesh((0, 1, 0, 1), 3, 3)
    assert not fv.fv_sweep(Q4.directions, mesh, 1.0).any()


def test_linear_solutions_are_reproduced():
    # cell averages of a linear field, its exact source, and exact inflow
    mesh = build_mesh((0.0, 2.0, 0.0, 1.0), 5, 4)
    a, bx, by, sig = 1.5, -0.7, 0.4, 2.0

    def psi(x, y):
        return a + bx * x + by * y

    inflow = InflowData.from_function(mesh, Q4, lambda t, x, y, om: psi(x, y))
    out = fv.fv_sweep(Q4.directions, mesh, sig,
                      ang_source=np.stack([fv.project_cell_average(mesh, lambda x, y, o=o: o[0] * bx + o[1] * by + sig * psi(x, y)) for o in Q4.directions]),
                      inflow=inflow)
    exact = fv.project_cell_average(mesh, psi)
    np.testing.assert_allclose(out, np.broadcast_to(exact, out.shape), atol=1e-13)


def test_balance_residual_vanishes_on_sweep_output():
    rng = np.random.default_rng(3)
    mesh = build_mesh((0, 1, 0, 1), 4, 3)
    sigma = rng.uniform(0.5, 2.0, (4, 3))
    rhs = rng.normal(size=(4, 3))
    inflow = _random_inflow(rng, mesh, Q4.count)
    out = fv.fv_sweep(Q4.directions, mesh, sigma, rhs, None, inflow)
    for i, omega in enumerate(Q4.directions):
        res = fv.cell_balance_residual(out[i], omega, mesh, sigma, rhs, inflow, i)
        assert np.abs(res).max() < 1e-12


def test_slopes_hand_case():
    mesh = build_mesh((0, 3, 0, 1), 3, 1)
    f = np.array([[1.0], [2.0], [4.0]])
    sx, _ = fv.reconstruct_slopes(f, (0.5, 0.5), mesh)
    np.testing.assert_allclose(sx[:, 0], [2.0, 1.0, 2.0])  # boundary: 2(f - 0)/dx
    sx, _ = fv.reconstruct_slopes(f, (-0.5, 0.5), mesh)
    np.testing.assert_allclose(sx[:, 0], [1.0, 2.0, -8.0])


def test_outflow_trace_matches_interior_formula():
    mesh = build_mesh((0, 1, 0, 1), 3, 2)
    f = np.arange(6.0).reshape(3, 2)
    tx, ty = fv.outflow_traces(f, (0.6, -0.3), mesh)
    np.testing.assert_allclose(tx, 1.5 * f[-1] - 0.5 * f[-2])
    np.testing.assert_allclose(ty, 1.5 * f[:, 0] - 0.5 * f[:, 1])


def test_input_validation():
    mesh = build_mesh((0, 1, 0, 1), 2, 2)
    with pytest.raises(ValueError):
        fv.fv_sweep(Q4.directions, mesh, -1.0)
    with pytest.raises(ValueError):
        fv.fv_sweep(np.array([[1.0, 0.0, 0.0]]), mesh, 1.0)
    with pytest.raises(ValueError):
        fv.fv_sweep(Q4.directions, mesh, 1.0, ang_source=np.zeros((3, 2, 2)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_sweep_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    mesh = build_mesh((0, 1, 0, 1), 3, 2)
    s1, s2 = rng.normal(size=(2, 3, 2))
    u1 = fv.fv_sweep(Q4.directions, mesh, 1.3, s1)
    u2 = fv.fv_sweep(Q4.directions, mesh, 1.3, s2)
    u = fv.fv_sweep(Q4.directions, mesh, 1.3, a * s1 + b * s2)
    np.testing.assert_allclose(u, a * u1 + b * u2, atol=1e-12 * (1 + abs(a) + abs(b)))
