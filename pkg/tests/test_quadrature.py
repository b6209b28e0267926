import math

import numpy as np
import pytest

from radcond.quadrature import angular_integrate, build_quadrature, direction_space_measure


@pytest.mark.parametrize("dim, order, size", [(1, 2, 2), (2, 4, 4), (2, 8, 8), (3, 2, 8), (3, 4, 32)])
def test_sizes_unit_directions_and_measure(dim, order, size):
    q = build_quadrature(dim, order)
    assert q.size == size
    np.testing.assert_allclose(np.linalg.norm(q.directions, axis=1), 1.0, rtol=0, atol=1e-15)
    assert np.all(q.weights > 0)
    assert q.measure == pytest.approx(direction_space_measure(dim), rel=1e-14)
    assert np.all(q.directions != 0.0)


def test_3d_weights_sum_to_four_pi():
    assert build_quadrature(3, 6).measure == pytest.approx(4 * math.pi, rel=1e-14)


@pytest.mark.parametrize("dim, order", [(3, 2), (3, 4), (2, 8)])
def test_first_and_second_moments(dim, order):
    q = build_quadrature(dim, order)
    np.testing.assert_allclose(q.weights @ q.directions, 0.0, atol=1e-14)
    second = np.einsum("m,mi,mj->ij", q.weights, q.directions, q.directions)
    np.testing.assert_allclose(second, q.measure / dim * np.eye(dim), atol=1e-13)


@pytest.mark.parametrize("dim, order", [(1, 4), (2, 6), (2, 2), (3, 3), (3, 0), (4, 2)])
def test_rejects_bad_orders(dim, order):
    with pytest.raises(ValueError):
        build_quadrature(dim, order)


def test_constant_integrates_to_measure():
    q = build_quadrature(3, 2)
    field = np.full((q.size, 3, 3), 2.0)
    np.testing.assert_allclose(angular_integrate(field, q), 2.0 * 4 * math.pi, rtol=1e-14)


def test_mismatched_ordinates_rejected():
    q = build_quadrature(2, 8)
    with pytest.raises(ValueError):
        angular_integrate(np.zeros((4, 3)), q)
