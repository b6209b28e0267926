"""Discrete-ordinates direction sets.

* 1-D: two-beam model, directions +1 and -1 with unit weights.
* 2-D: ``order`` equally spaced directions on the unit circle, offset by half
  a panel, weights ``2*pi/order``. ``order`` must be a multiple of 4 so that
  no direction is parallel to an axis.
* 3-D: product rule, ``order`` Gauss-Legendre nodes in the polar cosine times
  ``2*order`` azimuths offset by half a panel (``2*order**2`` directions).
  ``order`` must be even so that no polar node sits on the equator.

No direction ever has a zero component, so every ordinate has a well-defined
upwind corner for the sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AngularQuadrature:
    dim: int
    order: int
    directions: np.ndarray  # (M, dim)
    weights: np.ndarray  # (M,)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def measure(self) -> float:
        """Total weight, i.e. the discrete measure of the direction space."""
        return float(np.sum(self.weights))


def direction_space_measure(dim: int) -> float:
    return {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[dim]


def build_quadrature(dim: int, order: int) -> AngularQuadrature:
    if dim == 1:
        if order != 2:
            raise ValueError("1-D quadrature is the two-beam model, order must be 2")
        dirs = np.array([[1.0], [-1.0]])
        w = np.array([1.0, 1.0])
    elif dim == 2:
        if order < 4 or order % 4:
            raise ValueError(f"2-D order must be a positive multiple of 4, got {order}")
        phi = (np.arange(order) + 0.5) * (2.0 * np.pi / order)
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        w = np.full(order, 2.0 * np.pi / order)
    elif dim == 3:
        if order < 2 or order % 2:
            raise ValueError(f"3-D order must be a positive even integer, got {order}")
        mu, wmu = np.polynomial.legendre.leggauss(order)
        n_az = 2 * order
        phi = (np.arange(n_az) + 0.5) * (2.0 * np.pi / n_az)
        sin_t = np.sqrt(1.0 - mu**2)
        dirs = np.empty((order * n_az, 3))
        w = np.empty(order * n_az)
        for i in range(order):
            rows = slice(i * n_az, (i + 1) * n_az)
            dirs[rows, 0] = sin_t[i] * np.cos(phi)
            dirs[rows, 1] = sin_t[i] * np.sin(phi)
            dirs[rows, 2] = mu[i]
            w[rows] = wmu[i] * (2.0 * np.pi / n_az)
    else:
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs.flags.writeable = False
    w.flags.writeable = False
    return AngularQuadrature(dim, order, dirs, w)


def angular_integrate(field: np.ndarray, quadrature: AngularQuadrature) -> np.ndarray:
    """Weighted sum over the leading (ordinate) axis of ``field``.

    Ordinates are accumulated in ascending index order so that the result is
    bit-reproducible regardless of how the per-ordinate data was produced.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 0 or field.shape[0] != quadrature.size:
        raise ValueError(
            f"field has {field.shape[0] if field.ndim else 0} ordinates, quadrature has {quadrature.size}"
        )
    out = quadrature.weights[0] * field[0]
    for m in range(1, quadrature.size):
        out = out + quadrature.weights[m] * field[m]
    return out
