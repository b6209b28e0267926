import math

import numpy as np
import pytest

from radcond.heat import (
    BoundarySpec,
    DiffusionOperator,
    HeatSettings,
    NewtonConvergenceError,
    StepInfo,
    conjugate_gradient,
    heat_step,
    solve_heat,
    solve_linear_comparison,
)
from radcond.mesh import TimeGrid, build_mesh


def test_boundary_families_and_validation():
    assert BoundarySpec(0.0, 1.0).family == "dirichlet"
    assert BoundarySpec(1.0, 0.0).family == "neumann"
    assert BoundarySpec(1.0, 2.0).family == "robin"
    for a, b, g in [(0, 0, 0), (-1, 1, 0), (1, -1, 0), (1, 1, -0.1), (1, 1, float("nan"))]:
        with pytest.raises(ValueError):
            BoundarySpec(a, b, g)
    with pytest.raises(ValueError):
        BoundarySpec(1, 1, lambda t, x: -np.ones_like(x[0])).values(0.0, (np.zeros(2),))


def test_dirichlet_compatibility():
    m = build_mesh(1, [1.0], [4])
    BoundarySpec(0.0, 2.0, 1.0).check_compatibility(lambda x: np.full_like(x[0], 0.5), m)
    with pytest.raises(ValueError):
        BoundarySpec(0.0, 1.0, 1.0).check_compatibility(lambda x: np.zeros_like(x[0]), m)


@pytest.mark.parametrize("bc", [BoundarySpec(1, 0), BoundarySpec(1, 2), BoundarySpec(0, 1)])
def test_operator_symmetric_positive(bc):
    m = build_mesh(2, [1, 2], [4, 3])
    op = DiffusionOperator(m, bc)
    n = m.n_cells
    A = np.column_stack([op.apply(np.eye(n)[k].reshape(m.shape)).ravel() for k in range(n)])
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    eig = np.linalg.eigvalsh(A)
    assert eig.min() > -1e-10 if bc.family == "neumann" else eig.min() > 0


def test_conjugate_gradient_solves_spd():
    rng = np.random.default_rng(0)
    B = rng.random((20, 20))
    A = B @ B.T + 20 * np.eye(20)
    b = rng.random(20)
    x, it = conjugate_gradient(lambda v: A @ v, b, rtol=1e-12)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * 1.01
    assert it <= 40


def test_neumann_conserves_energy_without_radiation():
    rng = np.random.default_rng(1)
    m = build_mesh(2, [1, 1], [8, 8])
    tg = TimeGrid(0.5, 10)
    T0 = rng.random(m.shape)
    T = solve_heat(T0, np.zeros((11,) + m.shape), BoundarySpec(1, 0), 0.0, tg, m)
    np.testing.assert_allclose(T.sum(axis=(1, 2)), T0.sum(), rtol=1e-9)


def test_radiative_equilibrium_stationary():
    m = build_mesh(1, [1.0], [16])
    tg = TimeGrid(10.0, 100)
    c = 0.7
    sigma = 2.0
    G = np.full((101,) + m.shape, sigma * c**4)
    T = solve_heat(np.full(m.shape, c), G, BoundarySpec(1, 0), 1.0, tg, m, emission_coeff=sigma)
    assert np.max(np.abs(T - c)) <= 1e-10


def test_cosine_mode_decay_first_order():
    errs = []
    for n, k in [(16, 10), (32, 20), (64, 40)]:
        m = build_mesh(1, [1.0], [n])
        tg = TimeGrid(0.1, k)
        T0 = 1.0 + np.cos(math.pi * m.centers[0])
        T = solve_heat(T0, np.zeros((k + 1,) + m.shape), BoundarySpec(1, 0), 0.0, tg, m)
        exact = 1.0 + math.exp(-math.pi**2 * 0.1) * np.cos(math.pi * m.centers[0])
        errs.append(np.max(np.abs(T[-1] - exact)))
    assert errs[0] > errs[1] > errs[2]
    assert math.log2(errs[1] / errs[2]) > 0.9


def test_positivity_hot_cell_strong_radiation():
    m = build_mesh(2, [1, 1], [16, 16])
    T = np.zeros(m.shape)
    T[8, 8] = 5.0
    info = StepInfo()
    out = heat_step(T, np.zeros(m.shape), BoundarySpec(0, 1), 10.0, 2.5e-4, m, emission_coeff=4 * math.pi, info=info)
    assert out.min() >= 0.0
    assert info.newton_iterations >= 1
    assert info.min_before_clamp >= -HeatSettings().tol_pos


def test_newton_failure_is_reported_with_step():
    m = build_mesh(1, [1.0], [8])
    tg = TimeGrid(1.0, 2)
    G = np.full((3,) + m.shape, 100.0)
    with pytest.raises(NewtonConvergenceError) as exc:
        solve_heat(np.zeros(m.shape), G, BoundarySpec(1, 1), 1.0, tg, m, settings=HeatSettings(max_newton=1))
    assert exc.value.step == 1
    assert exc.value.history


def test_linear_comparison_bounds_nonlinear():
    rng = np.random.default_rng(2)
    m = build_mesh(1, [1.0], [20])
    tg = TimeGrid(0.5, 10)
    G = rng.random((11,) + m.shape)
    T0 = rng.random(m.shape)
    bc = BoundarySpec(1, 1, 0.2)
    T = solve_heat(T0, G, bc, 1.0, tg, m)
    z = solve_linear_comparison(T0, G, bc, 1.0, tg, m)
    assert np.all(T <= z + 1e-12)


def test_rejects_bad_inputs():
    m = build_mesh(1, [1.0], [4])
    with pytest.raises(ValueError):
        heat_step(np.zeros(4), np.zeros(4), BoundarySpec(1, 0), 1.0, 0.0, m)
    with pytest.raises(ValueError):
        heat_step(np.zeros(4), np.zeros(4), BoundarySpec(1, 0), -1.0, 0.1, m)
    with pytest.raises(ValueError):
        solve_heat(-np.ones(4), np.zeros((2, 4)), BoundarySpec(1, 0), 1.0, TimeGrid(1, 1), m)
