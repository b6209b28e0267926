from dataclasses import replace

import numpy as np
import pytest

from radcond.estimates import w21_norm
from radcond.fixedpoint import (
    IdenticalInputsError,
    PicardSettings,
    ScenarioConfig,
    apply_H,
    contraction_ratio,
    initial_guess,
    picard_solve,
)
from radcond.heat import BoundarySpec
from radcond.mesh import TimeGrid, build_mesh
from radcond.quadrature import build_quadrature
from radcond.transport import InflowData


def make(dim=2, T0=None, bc=BoundarySpec(1, 1, 0.1), inflow=InflowData.constant(0.2), mode="global", seed=0):
    m = build_mesh(dim, [1.0] * dim, [6] * dim)
    T0 = 0.3 * np.random.default_rng(seed).random(m.shape) if T0 is None else T0
    return ScenarioConfig(m, TimeGrid(0.2, 5), build_quadrature(dim, {1: 2, 2: 8, 3: 2}[dim]), bc, inflow, 1.0,
                          T0, PicardSettings(mode=mode))


def test_settings_validation():
    for kw in [{"tol": 0}, {"max_iter": 0}, {"mode": "both"}]:
        with pytest.raises(ValueError):
            PicardSettings(**kw)


def test_config_validation():
    with pytest.raises(ValueError):
        make(T0=-np.ones((6, 6)))
    with pytest.raises(ValueError):
        make(T0=np.ones((5, 6)))
    with pytest.raises(ValueError):
        replace(make(), theta=-1.0)


def test_zero_data_is_fixed_point():
    sc = make(T0=np.zeros((6, 6)), bc=BoundarySpec(1, 1, 0), inflow=InflowData.zero())
    assert np.all(apply_H(initial_guess(sc), sc) == 0)
    sol = picard_solve(sc)
    assert sol.converged and sol.trace.iterations == 1 and np.all(sol.T == 0)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_equilibrium_fixed_point(dim):
    m = build_mesh(dim, [1.0] * dim, [4] * dim)
    c = 0.5
    sc = ScenarioConfig(m, TimeGrid(1.0, 10), build_quadrature(dim, {1: 2, 2: 8, 3: 2}[dim]), BoundarySpec(1, 0),
                        InflowData.constant(c**4), 2.0, np.full(m.shape, c))
    T = initial_guess(sc)
    assert np.max(np.abs(apply_H(T, sc) - T)) <= 1e-12


@pytest.mark.parametrize("mode", ["global", "stepwise"])
def test_converged_solution_residuals(mode):
    sc = make(mode=mode)
    sol = picard_solve(sc)
    assert sol.converged
    assert sol.trace.fixed_point_residual <= 10 * sc.picard.tol
    assert sol.trace.coupled_residuals["transport"] < 1e-10
    assert sol.trace.coupled_residuals["heat"] < 1e-8
    assert sol.T.min() >= 0 and sol.I.min() >= 0


def test_trace_ratios_only_from_second_difference():
    sol = picard_solve(make())
    assert len(sol.trace.ratios) == len(sol.trace.residuals) - 1
    assert all(0 <= r < 1 for r in sol.trace.ratios)


def test_modes_agree():
    a = picard_solve(make(mode="global"))
    b = picard_solve(make(mode="stepwise"))
    sc = make()
    rel = w21_norm(a.T - b.T, sc.mesh, sc.timegrid) / w21_norm(a.T, sc.mesh, sc.timegrid)
    assert rel <= 10 * sc.picard.tol


def test_non_convergence_returns_trace():
    sc = replace(make(), picard=PicardSettings(tol=1e-14, max_iter=2))
    sol = picard_solve(sc)
    assert not sol.converged and len(sol.trace.residuals) == 2


def test_contraction_ratio_small_data():
    sc = make()
    rng = np.random.default_rng(1)
    T1 = picard_solve(sc).T
    T2 = T1 * (1 + 0.05 * rng.random(T1.shape))
    m = contraction_ratio(T1, T2, sc)
    assert 0 < m.ratio < 1
    assert m.holder_satisfied and m.holder_factor > 0


def test_contraction_ratio_identical_inputs():
    sc = make()
    T = initial_guess(sc)
    with pytest.raises(IdenticalInputsError):
        contraction_ratio(T, T.copy(), sc)


def test_scaled_scales_all_data():
    sc = make(bc=BoundarySpec(1, 1, lambda t, x: 1.0 + 0 * x[0]))
    s = sc.scaled(0.5)
    np.testing.assert_allclose(s.T0, 0.5 * sc.T0)
    assert s.bc.values(0.0, (np.zeros(2), np.zeros(2)))[0] == 0.5
    assert s.inflow(0.0, (np.zeros(1), np.zeros(1)), np.array([0.6, 0.8]))[0] == pytest.approx(0.1)


def test_threads_do_not_change_result():
    sc = make(dim=3)
    a = picard_solve(sc)
    b = picard_solve(replace(sc, workers=4))
    np.testing.assert_array_equal(a.T, b.T)
    np.testing.assert_array_equal(a.I, b.I)
