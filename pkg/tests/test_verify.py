import math

import numpy as np
import pytest

from radcond.mesh import build_mesh
from radcond.quadrature import build_quadrature
from radcond.transport import InflowData, sweep_ordinate
from radcond.verify import (
    ConvergenceStudy,
    NonMonotoneErrorWarning,
    RayExitError,
    _exit_distance,
    constant_case,
    cosine_case,
    estimate_order,
    exponential_inflow_case,
    fd_check,
    mms_forcing,
    ray_trace_transport,
    transport_study,
)


def test_ray_trace_analytic_exponential():
    m = build_mesh(1, [1.0], [16])
    I = ray_trace_transport(np.zeros(m.shape), InflowData.constant(1.0), [1.0], m)
    assert np.max(np.abs(I - np.exp(-m.centers[0]))) < 1e-10


def test_ray_trace_analytic_emission():
    m = build_mesh(1, [1.0], [16])
    I = ray_trace_transport(np.ones(m.shape), InflowData.zero(), [1.0], m)
    assert np.max(np.abs(I - (1 - np.exp(-m.centers[0])))) < 1e-10
    I = ray_trace_transport(np.ones(m.shape), InflowData.zero(), [-1.0], m)
    assert np.max(np.abs(I - (1 - np.exp(-(1 - m.centers[0]))))) < 1e-10


def test_ray_trace_requires_substeps():
    m = build_mesh(1, [1.0], [4])
    with pytest.raises(ValueError):
        ray_trace_transport(np.zeros(4), InflowData.zero(), [1.0], m, substeps=50)


def test_exit_distance_geometry():
    m = build_mesh(2, [1.0, 2.0], [2, 2])
    beta = np.array([0.6, 0.8])
    d = _exit_distance(np.array([[0.3, 1.0]]), beta, m)
    assert d[0] == pytest.approx(0.5)


def test_ray_trace_detects_bad_geometry(monkeypatch):
    import radcond.verify as v

    monkeypatch.setattr(v, "_exit_distance", lambda pts, beta, mesh: np.full(len(pts), 0.01))
    m = build_mesh(1, [1.0], [4])
    with pytest.raises(RayExitError):
        v.ray_trace_transport(np.zeros(4), InflowData.zero(), [1.0], m)


def test_sweep_agrees_with_oracle_3d():
    m = build_mesh(3, [1.0] * 3, [8] * 3)
    q = build_quadrature(3, 2)
    T = lambda x: 0.5 + 0.3 * x[0] * x[1] + 0.1 * x[2]
    for beta in q.directions[:3]:
        faces = [np.full(m.patch(a, 1).face_shape, 0.2) for a in range(3)]
        I = sweep_ordinate(T(m.centers) ** 4, beta, m, faces)
        ref = ray_trace_transport(T, InflowData.constant(0.2), beta, m)
        assert math.sqrt(np.sum((I - ref) ** 2) / np.sum(ref**2)) < m.cell_size[0]


def test_fd_check_cosine_case():
    rng = np.random.default_rng(0)
    errs = fd_check(cosine_case(), rng.random((10, 3)), rng.random(10), np.array([0.48, 0.6, 0.64]))
    assert max(errs.values()) < 1e-6


def test_constant_case_forcings_vanish():
    q = build_quadrature(2, 8)
    data = mms_forcing(constant_case(0.8), q, 1.5, 1.0, 0.0, [1.0, 1.0])
    x = (np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    assert np.max(np.abs(data.heat_source(0.2, x))) < 1e-13
    assert np.max(np.abs(data.rte_source(0.2, x, q.directions[0]))) < 1e-15


def test_exponential_inflow_source_free():
    q = build_quadrature(2, 8)
    data = mms_forcing(exponential_inflow_case(), q, 1.0, 1.0, 1.0, [1.0, 1.0])
    x = (np.random.default_rng(1).random(7), np.random.default_rng(2).random(7))
    for beta in q.directions:
        assert np.max(np.abs(data.rte_source(0.0, x, beta))) < 1e-14


def test_neumann_boundary_datum_zero_for_cosine():
    q = build_quadrature(1, 2)
    data = mms_forcing(cosine_case(), q, 1.0, 1.0, 0.0, [1.0])
    assert data.bc.values(0.3, (np.array([0.0, 1.0]),)).tolist() == [0.0, 0.0]


def test_estimate_order_exact_sequences():
    assert estimate_order(ConvergenceStudy("a", [1, 0.5, 0.25], [1e-1, 5e-2, 2.5e-2])) == pytest.approx(1.0)
    assert estimate_order(ConvergenceStudy("b", [1, 0.5, 0.25], [1e-2, 2.5e-3, 6.25e-4])) == pytest.approx(2.0)


def test_estimate_order_warns_on_non_monotone():
    st = ConvergenceStudy("c", [1, 0.5, 0.25], [1e-2, 2e-2, 1e-3])
    with pytest.warns(NonMonotoneErrorWarning):
        estimate_order(st)
    assert st.monotone is False


def test_estimate_order_needs_three_levels():
    with pytest.raises(ValueError):
        estimate_order(ConvergenceStudy("d", [1, 0.5], [1, 0.5]))


def test_transport_mms_order():
    st = transport_study(exponential_inflow_case(), np.array([0.6, 0.8]), lambda x: 0 * x[0], 2, [8, 16, 32])
    assert st.order > 0.85 and st.monotone
