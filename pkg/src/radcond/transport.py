"""Emission and steady grey transport without scattering.

For every ordinate ``beta`` the transport problem ``beta . grad I + I = q`` with
inflow data on the faces where ``beta . n < 0`` is discretized by the
cell-centred upwind (step) scheme

    (1 + sum_a c_a) I_i = q_i + sum_a c_a I_up(i, a),   c_a = |beta_a| / h_a,

which is solved exactly by one sweep in the downwind order. Cells on the same
anti-diagonal of the (sign-flipped) index space are independent, so each
sweep is vectorized front by front.

Radiation arrays put the ordinate on the leading axis: ``I[m]`` is the field
of ordinate ``m`` with shape ``mesh.shape``. Histories add a leading time
axis, ``(levels, M, *mesh.shape)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .mesh import BoxMesh
from .quadrature import AngularQuadrature, angular_integrate


class NegativeTemperatureError(ValueError):
    """Raised when emission is requested for a temperature with negative values."""


class InvalidInflowError(ValueError):
    pass


def emission(T: np.ndarray) -> np.ndarray:
    """Pointwise fourth power of a non-negative temperature field."""
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        raise NegativeTemperatureError("temperature contains non-finite values")
    if np.any(T < 0.0):
        raise NegativeTemperatureError(
            f"negative temperature (min {T.min():.3e}) reached the emission stage"
        )
    return T**4


class InflowData:
    """Boundary intensity ``I_b(t, x, beta)`` on the inflow part of the boundary.

    ``func(t, coords, beta)`` receives face-center coordinates (tuple of arrays,
    one per axis) and a direction; it must return non-negative values
    broadcastable to the coordinate arrays.
    """

    def __init__(self, func: Optional[Callable] = None, value: float = 0.0, scale: float = 1.0):
        if func is None and (not np.isfinite(value) or value < 0):
            raise InvalidInflowError(f"inflow value must be non-negative, got {value}")
        self._func = func
        self._value = float(value)
        self._scale = float(scale)

    @classmethod
    def zero(cls) -> "InflowData":
        return cls(value=0.0)

    @classmethod
    def constant(cls, value: float) -> "InflowData":
        return cls(value=value)

    @property
    def is_zero(self) -> bool:
        return self._func is None and (self._value == 0.0 or self._scale == 0.0)

    def scaled(self, s: float) -> "InflowData":
        return InflowData(self._func, self._value, self._scale * s)

    def __call__(self, t: float, coords: tuple, beta: np.ndarray) -> np.ndarray:
        shape = np.shape(coords[0])
        if self._func is None:
            vals = np.full(shape, self._value * self._scale)
        else:
            vals = np.broadcast_to(np.asarray(self._func(t, coords, beta), dtype=float), shape)
            vals = vals * self._scale
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise InvalidInflowError("inflow intensity must be finite and non-negative")
        return np.array(vals, dtype=float)


@dataclass(frozen=True)
class RadiationField:
    values: np.ndarray  # (M, *mesh.shape)
    quadrature: AngularQuadrature
    mesh: BoxMesh


def inflow_faces(inflow: InflowData, beta: np.ndarray, mesh: BoxMesh, t: float) -> list:
    """Inflow values for one ordinate, one array of shape ``face_shape`` per axis."""
    faces = []
    for a in range(mesh.dim):
        patch = mesh.patch(a, -1 if beta[a] > 0 else 1)
        faces.append(inflow(t, patch.centers, beta))
    return faces


@lru_cache(maxsize=32)
def _wavefronts(shape: tuple):
    d = len(shape)
    padded = tuple(n + 1 for n in shape)
    idx = np.indices(shape).reshape(d, -1)
    level = idx.sum(axis=0)
    pad_flat = np.ravel_multi_index(tuple(idx + 1), padded)
    cell_flat = np.arange(idx.shape[1])
    order = np.argsort(level, kind="stable")
    bounds = np.searchsorted(level[order], np.arange(level.max() + 2))
    fronts = []
    for k in range(level.max() + 1):
        sel = order[bounds[k] : bounds[k + 1]]
        fronts.append((pad_flat[sel], cell_flat[sel]))
    strides = tuple(int(np.prod(padded[a + 1 :], dtype=int)) for a in range(d))
    return fronts, strides


def _sweep_batch(src: np.ndarray, beta: np.ndarray, mesh: BoxMesh, faces: list) -> np.ndarray:
    # src: (B, *shape); faces[a]: (B, *face_shape)
    d = mesh.dim
    B = src.shape[0]
    q = src
    for a in range(d):
        if beta[a] < 0:
            q = np.flip(q, axis=a + 1)
    padded = tuple(n + 1 for n in mesh.shape)
    P = np.zeros(padded + (B,))
    for a in range(d):
        f = faces[a]
        others = [b for b in range(d) if b != a]
        for j, b in enumerate(others):
            if beta[b] < 0:
                f = np.flip(f, axis=j + 1)
        sl = [slice(1, None)] * d
        sl[a] = 0
        P[tuple(sl)] = np.moveaxis(f, 0, -1)
    qf = np.moveaxis(q, 0, -1).reshape(mesh.n_cells, B)
    Pf = P.reshape(-1, B)
    coef = [abs(float(beta[a])) / mesh.cell_size[a] for a in range(d)]
    denom = 1.0
    for c in coef:
        denom += c
    fronts, strides = _wavefronts(mesh.shape)
    for pad_idx, cell_idx in fronts:
        acc = qf[cell_idx]
        for a in range(d):
            acc = acc + coef[a] * Pf[pad_idx - strides[a]]
        Pf[pad_idx] = acc / denom
    out = np.moveaxis(P[(slice(1, None),) * d], -1, 0)
    for a in range(d):
        if beta[a] < 0:
            out = np.flip(out, axis=a + 1)
    return np.ascontiguousarray(out)


def sweep_ordinate(
    source: np.ndarray,
    beta: np.ndarray,
    mesh: BoxMesh,
    faces: Optional[list] = None,
) -> np.ndarray:
    """Solve the upwind transport system for a single ordinate.

    Parameters
    ----------
    source : ndarray
        Right-hand side ``q``, shape ``mesh.shape`` or ``(B, *mesh.shape)`` for a
        batch of independent problems sharing the ordinate.
    beta : ndarray (dim,)
        Direction; no component may be zero.
    faces : list of ndarray, optional
        Inflow values per axis (shape ``face_shape`` or ``(B, *face_shape)``).
        Zero inflow when omitted.
    """
    beta = np.asarray(beta, dtype=float)
    source = np.asarray(source, dtype=float)
    if beta.shape != (mesh.dim,):
        raise ValueError(f"direction has shape {beta.shape}, mesh is {mesh.dim}-D")
    if np.any(beta == 0.0):
        raise ValueError("ordinate has a zero component; upwind order is ambiguous")
    batched = source.ndim == mesh.dim + 1
    if source.shape[-mesh.dim :] != mesh.shape or source.ndim not in (mesh.dim, mesh.dim + 1):
        raise ValueError(f"source shape {source.shape} does not match mesh {mesh.shape}")
    src = source if batched else source[None]
    B = src.shape[0]
    fb = []
    for a in range(mesh.dim):
        face_shape = mesh.patch(a, -1).face_shape
        f = np.zeros(face_shape) if faces is None else np.asarray(faces[a], dtype=float)
        fb.append(np.broadcast_to(f, (B,) + face_shape))
    out = _sweep_batch(src, beta, mesh, fb)
    return out if batched else out[0]


def directional_derivative(I_m: np.ndarray, beta: np.ndarray, mesh: BoxMesh, faces: Optional[list] = None) -> np.ndarray:
    """Upwind reconstruction of ``beta . grad I`` using the sweep's own stencil."""
    out = np.zeros_like(I_m)
    for a in range(mesh.dim):
        c = abs(float(beta[a])) / mesh.cell_size[a]
        face = np.zeros(mesh.patch(a, -1).face_shape) if faces is None else np.asarray(faces[a], dtype=float)
        face = np.expand_dims(face, a)
        if beta[a] > 0:
            up = np.concatenate([face, np.take(I_m, range(0, I_m.shape[a] - 1), axis=a)], axis=a)
        else:
            up = np.concatenate([np.take(I_m, range(1, I_m.shape[a]), axis=a), face], axis=a)
        out = out + c * (I_m - up)
    return out


def _ordinate_sources(emission_field, extra_source, quadrature, mesh, times):
    """Per-ordinate right-hand sides, shape (B, *shape) for each ordinate."""
    if extra_source is None:
        return [emission_field] * quadrature.size
    out = []
    for m in range(quadrature.size):
        beta = quadrature.directions[m]
        extra = np.stack([np.broadcast_to(extra_source(t, mesh.centers, beta), mesh.shape) for t in times])
        out.append(emission_field + extra)
    return out


def _solve_levels(E, inflow, quadrature, mesh, times, extra_source=None, workers=1):
    # E: (B, *shape) emission per level; returns (B, M, *shape)
    sources = _ordinate_sources(E, extra_source, quadrature, mesh, times)

    def one(m):
        beta = quadrature.directions[m]
        if inflow is None or inflow.is_zero:
            faces = None
        else:
            per_t = [inflow_faces(inflow, beta, mesh, t) for t in times]
            faces = [np.stack([f[a] for f in per_t]) for a in range(mesh.dim)]
        return sweep_ordinate(sources[m], beta, mesh, faces)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(quadrature.size)))
    else:
        results = [one(m) for m in range(quadrature.size)]
    return np.stack(results, axis=1)


def solve_rte(
    T: np.ndarray,
    inflow: InflowData,
    quadrature: AngularQuadrature,
    mesh: BoxMesh,
    t: float = 0.0,
    extra_source: Optional[Callable] = None,
    workers: int = 1,
) -> RadiationField:
    """Intensity for one time level, emission ``T**4`` and inflow ``I_b(t)``."""
    E = emission(T)
    if E.shape != mesh.shape:
        raise ValueError(f"temperature shape {E.shape} does not match mesh {mesh.shape}")
    vals = _solve_levels(E[None], inflow, quadrature, mesh, [t], extra_source, workers)[0]
    return RadiationField(vals, quadrature, mesh)


def solve_rte_split(T, inflow, quadrature, mesh, t=0.0, workers=1):
    """Return ``(I0, w)``: the zero-inflow part and the zero-emission part."""
    E = emission(T)
    I0 = _solve_levels(E[None], None, quadrature, mesh, [t], None, workers)[0]
    w = _solve_levels(np.zeros((1,) + mesh.shape), inflow, quadrature, mesh, [t], None, workers)[0]
    return RadiationField(I0, quadrature, mesh), RadiationField(w, quadrature, mesh)


def solve_rte_history(T_hist, inflow, quadrature, mesh, times, extra_source=None, workers=1, part="full"):
    """Intensity at every time level, shape ``(levels, M, *mesh.shape)``.

    ``part`` selects ``"full"``, ``"homogeneous"`` (inflow zeroed) or
    ``"boundary"`` (emission zeroed).
    """
    T_hist = np.asarray(T_hist, dtype=float)
    if part == "boundary":
        E = np.zeros_like(T_hist)
    else:
        E = emission(T_hist)
    if part == "homogeneous":
        inflow = None
    return _solve_levels(E, inflow, quadrature, mesh, list(times), extra_source, workers)


def incident_radiation(I, quadrature: AngularQuadrature) -> np.ndarray:
    """``G = sum_m w_m I_m``; accepts a RadiationField or an ``(M, ...)`` array."""
    values = I.values if isinstance(I, RadiationField) else np.asarray(I)
    return angular_integrate(values, quadrature)


def outflow_trace(I_m: np.ndarray, beta: np.ndarray, mesh: BoxMesh) -> list:
    """Boundary-cell values on the outflow face of each axis (upwind trace)."""
    traces = []
    for a in range(mesh.dim):
        patch = mesh.patch(a, 1 if beta[a] > 0 else -1)
        traces.append(I_m[patch.cell_slice(mesh.dim)])
    return traces
