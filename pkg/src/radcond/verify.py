"""Independent oracles for the solvers.

* ``ray_trace_transport`` integrates the characteristic form of the transport
  equation along back-traced rays with composite Gauss-Legendre quadrature.
  It shares no stencil code with the sweep.
* ``ManufacturedCase`` carries closed-form temperature and intensity fields
  together with their derivatives; ``mms_forcing`` turns them into the extra
  sources and boundary data that make them exact solutions.
* ``ConvergenceStudy`` and ``estimate_order`` fit observed orders.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .heat import BoundarySpec, HeatSettings, solve_heat
from .mesh import BoxMesh, TimeGrid
from .quadrature import AngularQuadrature
from .transport import InflowData, sweep_ordinate

GAUSS_POINTS = 4


class RayExitError(RuntimeError):
    """A back-traced ray did not land on the boundary (geometry bookkeeping bug)."""


class NonMonotoneErrorWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# characteristic ray tracing
# ---------------------------------------------------------------------------

def _exit_distance(points: np.ndarray, beta: np.ndarray, mesh: BoxMesh) -> np.ndarray:
    """Distance travelled backwards along ``beta`` before leaving the box."""
    dist = np.full(points.shape[0], np.inf)
    for a in range(mesh.dim):
        if beta[a] > 0:
            d = points[:, a] / beta[a]
        else:
            d = (points[:, a] - mesh.extents[a]) / beta[a]
        dist = np.minimum(dist, d)
    return dist


def _cell_lookup(values: np.ndarray, mesh: BoxMesh) -> Callable:
    """Piecewise-constant evaluator of a cell array at arbitrary points ``(..., dim)``."""
    def f(pts):
        idx = []
        for a in range(mesh.dim):
            i = np.floor(pts[..., a] / mesh.cell_size[a]).astype(int)
            idx.append(np.clip(i, 0, mesh.shape[a] - 1))
        return values[tuple(idx)]
    return f


def ray_trace_transport(
    T,
    inflow: InflowData,
    beta,
    mesh: BoxMesh,
    substeps: int = 200,
    t: float = 0.0,
    source: Optional[Callable] = None,
    chunk: int = 4096,
) -> np.ndarray:
    """Intensity of one ordinate at every cell center from the characteristic integral

        I(x) = I_b(x_exit) exp(-s) + int_0^s exp(-u) q(x - u beta) du,

    where ``s`` is the back-traced distance to the boundary and ``q = T**4``
    (plus ``source(coords)`` if given). ``T`` is a cell array (piecewise
    constant) or a callable of the point coordinates tuple.
    """
    if substeps < 100:
        raise ValueError("ray tracing needs at least 100 substeps")
    beta = np.asarray(beta, dtype=float)
    if np.any(beta == 0):
        raise ValueError("direction has a zero component")
    if callable(T):
        temp = lambda pts: np.asarray(T(tuple(pts[..., a] for a in range(mesh.dim))), dtype=float)
    else:
        temp = _cell_lookup(np.asarray(T, dtype=float), mesh)

    def q(pts):
        val = temp(pts) ** 4
        if source is not None:
            val = val + source(tuple(pts[..., a] for a in range(mesh.dim)))
        return val

    nodes, wts = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    centers = np.stack([c.ravel() for c in mesh.centers], axis=1)
    out = np.empty(centers.shape[0])
    extents = np.asarray(mesh.extents)
    scale = float(np.max(extents))
    for start in range(0, centers.shape[0], chunk):
        x0 = centers[start : start + chunk]
        s = _exit_distance(x0, beta, mesh)
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise RayExitError("non-positive or infinite exit distance")
        x_exit = x0 - s[:, None] * beta
        on_face = np.zeros(len(s), dtype=bool)
        for a in range(mesh.dim):
            on_face |= np.isclose(x_exit[:, a], 0.0, atol=1e-12 * scale)
            on_face |= np.isclose(x_exit[:, a], extents[a], atol=1e-12 * scale)
        inside = np.all((x_exit >= -1e-12 * scale) & (x_exit <= extents + 1e-12 * scale), axis=1)
        if not np.all(on_face & inside):
            raise RayExitError("back-traced ray exit point is not on the boundary")
        x_exit = np.clip(x_exit, 0.0, extents)

        # panels [k, k+1] * s/substeps, Gauss nodes mapped into each panel
        panel = s / substeps
        k = np.arange(substeps)[:, None]
        u = (k + 0.5 + 0.5 * nodes[None, :]).reshape(-1)  # in units of panel
        u = u[None, :] * panel[:, None]  # (P, substeps*G)
        w = np.tile(wts, substeps)[None, :] * 0.5 * panel[:, None]
        pts = x0[:, None, :] - u[..., None] * beta
        integral = np.sum(w * np.exp(-u) * q(pts), axis=1)
        boundary = inflow(t, tuple(x_exit[:, a] for a in range(mesh.dim)), beta)
        out[start : start + chunk] = boundary * np.exp(-s) + integral
    return out.reshape(mesh.shape)


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

@dataclass
class ManufacturedCase:
    """Closed-form fields with hand-derived derivatives.

    All callables take ``t`` and a coordinate tuple ``x``; the intensity ones
    also take a direction ``beta``.
    """

    name: str
    T: Callable
    dT_dt: Callable
    grad_T: Callable  # -> tuple of arrays
    lap_T: Callable
    I: Callable
    beta_grad_I: Callable


@dataclass
class ManufacturedData:
    heat_source: Callable  # f(t, centers)
    rte_source: Callable  # q(t, centers, beta)
    bc: BoundarySpec
    inflow: InflowData
    G_exact: Callable  # G*(t, centers) at quadrature level


def _broadcast(val, x):
    return np.broadcast_to(np.asarray(val, dtype=float), np.shape(x[0]))


def _G_star(case, quadrature):
    def G(t, x):
        out = 0.0
        for m in range(quadrature.size):
            out = out + quadrature.weights[m] * _broadcast(case.I(t, x, quadrature.directions[m]), x)
        return _broadcast(out, x)
    return G


def mms_forcing(
    case: ManufacturedCase, quadrature: AngularQuadrature, theta: float, a: float, b: float, extents: Sequence[float],
) -> ManufacturedData:
    """Sources and boundary data making ``(case.T, case.I)`` exact for the coupled system.

    ``extents`` locates the high faces of the box so that ``g`` picks the
    right outward normal.

    The emission coefficient is the quadrature measure, matching the solver;
    ``G*`` is the discrete angular sum of ``I*``.
    """
    sigma = quadrature.measure
    G = _G_star(case, quadrature)

    def heat_source(t, x):
        T = _broadcast(case.T(t, x), x)
        return _broadcast(case.dT_dt(t, x), x) - _broadcast(case.lap_T(t, x), x) + sigma * theta * T**4 - theta * G(t, x)

    def rte_source(t, x, beta):
        T = _broadcast(case.T(t, x), x)
        return _broadcast(case.beta_grad_I(t, x, beta), x) + _broadcast(case.I(t, x, beta), x) - T**4

    dim = len(extents)

    def g(t, x):
        # value on whichever face the coordinates lie on, with that face's outward normal
        grad = case.grad_T(t, x)
        Tv = _broadcast(case.T(t, x), x)
        out = b * Tv
        normal_deriv = np.zeros(np.shape(x[0]))
        for ax in range(dim):
            gx = _broadcast(grad[ax], x)
            lo = np.isclose(x[ax], 0.0)
            hi = np.isclose(x[ax], extents[ax])
            normal_deriv = np.where(lo, -gx, normal_deriv)
            normal_deriv = np.where(hi, gx, normal_deriv)
        val = out + a * normal_deriv
        # sin(pi) and friends leave -1e-16 residue where the datum is exactly zero
        return np.where(np.abs(val) < 1e-13, 0.0, val)

    bc = BoundarySpec(a, b, g)
    inflow = InflowData(func=lambda t, x, beta: case.I(t, x, beta))
    return ManufacturedData(heat_source, rte_source, bc, inflow, G)


def cosine_case(offset: float = 1.0, time_factor: str = "linear") -> ManufacturedCase:
    """``T* = phi(t) (offset + cos(pi x1)) / 2`` with zero normal flux on every face.

    ``phi(t) = 1 + t`` ("linear", exact under implicit Euler in time) or
    ``phi(t) = exp(-t)`` ("exp").  The intensity is the equilibrium value
    ``I* = T*^4`` in every direction.
    """
    if time_factor == "linear":
        phi, dphi = (lambda t: 1.0 + t), (lambda t: 1.0)
    elif time_factor == "exp":
        phi, dphi = (lambda t: math.exp(-t)), (lambda t: -math.exp(-t))
    else:
        raise ValueError(time_factor)
    pi = math.pi

    def T(t, x):
        return phi(t) * (offset + np.cos(pi * x[0])) / 2.0

    def dT_dt(t, x):
        return dphi(t) * (offset + np.cos(pi * x[0])) / 2.0

    def grad_T(t, x):
        g0 = -phi(t) * pi * np.sin(pi * x[0]) / 2.0
        return (g0,) + tuple(np.zeros_like(x[0]) for _ in x[1:])

    def lap_T(t, x):
        return -phi(t) * pi**2 * np.cos(pi * x[0]) / 2.0

    def I(t, x, beta):
        return T(t, x) ** 4

    def beta_grad_I(t, x, beta):
        return 4.0 * T(t, x) ** 3 * beta[0] * grad_T(t, x)[0]

    return ManufacturedCase(f"cosine-{time_factor}", T, dT_dt, grad_T, lap_T, I, beta_grad_I)


def constant_case(value: float) -> ManufacturedCase:
    """Radiative equilibrium: ``T* = c``, ``I* = c^4``; every forcing vanishes."""
    zero = lambda t, x: np.zeros(np.shape(x[0]))
    return ManufacturedCase(
        "constant",
        lambda t, x: np.full(np.shape(x[0]), value),
        zero,
        lambda t, x: tuple(np.zeros(np.shape(x[0])) for _ in x),
        zero,
        lambda t, x, beta: np.full(np.shape(x[0]), value**4),
        lambda t, x, beta: np.zeros(np.shape(x[0])),
    )


def exponential_inflow_case() -> ManufacturedCase:
    """``T* = 0`` and ``I* = exp(-beta . x)``, which solves the source-free transport equation."""
    zero = lambda t, x: np.zeros(np.shape(x[0]))

    def I(t, x, beta):
        return np.exp(-sum(beta[a] * x[a] for a in range(len(x))))

    def beta_grad_I(t, x, beta):
        return -float(np.dot(beta, beta)) * I(t, x, beta)

    return ManufacturedCase(
        "exp-inflow", zero, zero, lambda t, x: tuple(np.zeros(np.shape(x[0])) for _ in x), zero, I, beta_grad_I,
    )


def fd_check(case: ManufacturedCase, points: np.ndarray, times: np.ndarray, beta: np.ndarray, step: float = 1e-5) -> dict:
    """Max relative error of the hand-derived derivatives against central differences.

    The Laplacian is differenced from the analytic gradient so one differencing
    level suffices.
    """
    points = np.asarray(points, dtype=float)
    dim = points.shape[1]
    errs = {"dT_dt": 0.0, "grad_T": 0.0, "lap_T": 0.0, "beta_grad_I": 0.0}

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300) if abs(b) > 1e-8 else abs(a - b)

    for p, t in zip(points, times):
        x = tuple(np.array(p[a]) for a in range(dim))
        ht = step * max(1.0, abs(t))
        fd = (case.T(t + ht, x) - case.T(t - ht, x)) / (2 * ht)
        errs["dT_dt"] = max(errs["dT_dt"], rel(float(fd), float(case.dT_dt(t, x))))
        lap = 0.0
        for a in range(dim):
            h = step * max(1.0, abs(p[a]))
            xp = tuple(np.array(p[c] + (h if c == a else 0.0)) for c in range(dim))
            xm = tuple(np.array(p[c] - (h if c == a else 0.0)) for c in range(dim))
            fd = (case.T(t, xp) - case.T(t, xm)) / (2 * h)
            errs["grad_T"] = max(errs["grad_T"], rel(float(fd), float(case.grad_T(t, x)[a])))
            lap += float(case.grad_T(t, xp)[a] - case.grad_T(t, xm)[a]) / (2 * h)
        errs["lap_T"] = max(errs["lap_T"], rel(lap, float(case.lap_T(t, x))))
        h = step
        xp = tuple(np.array(p[a] + h * beta[a]) for a in range(dim))
        xm = tuple(np.array(p[a] - h * beta[a]) for a in range(dim))
        fd = (case.I(t, xp, beta) - case.I(t, xm, beta)) / (2 * h)
        errs["beta_grad_I"] = max(errs["beta_grad_I"], rel(float(fd), float(case.beta_grad_I(t, x, beta))))
    return errs


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceStudy:
    name: str
    resolutions: list = field(default_factory=list)  # h or dt
    errors: list = field(default_factory=list)
    order: Optional[float] = None
    monotone: Optional[bool] = None

    def __post_init__(self):
        if len(self.resolutions) != len(self.errors):
            raise ValueError("resolutions and errors differ in length")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "resolutions": list(map(float, self.resolutions)),
            "errors": list(map(float, self.errors)),
            "order": self.order,
            "monotone": self.monotone,
        }


def estimate_order(study: ConvergenceStudy) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Non-monotone error sequences still get a slope but emit a
    ``NonMonotoneErrorWarning`` and set ``study.monotone = False``.
    """
    h = np.asarray(study.resolutions, dtype=float)
    e = np.asarray(study.errors, dtype=float)
    if len(h) < 3:
        raise ValueError("an order estimate needs at least three resolutions")
    if not np.all(np.isfinite(e)) or np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and resolutions must be positive and finite")
    order_idx = np.argsort(h)[::-1]
    e_sorted = e[order_idx]
    study.monotone = bool(np.all(np.diff(e_sorted) < 0))
    if not study.monotone:
        warnings.warn(f"{study.name}: errors do not decrease monotonically", NonMonotoneErrorWarning, stacklevel=2)
    slope = float(np.polyfit(np.log(h), np.log(e), 1)[0])
    study.order = slope
    return slope


def _l2_error(u, v, mesh):
    d = u - v
    return math.sqrt(float(np.sum(d * d)) * mesh.cell_volume)


def transport_study(case: ManufacturedCase, beta: np.ndarray, temperature: Callable, dim: int, cells: Sequence[int]) -> ConvergenceStudy:
    """Sweep error against ``case.I`` for one ordinate under mesh refinement.

    ``temperature(x)`` gives the emitting field (evaluated at cell centers);
    the manufactured transport source makes ``case.I`` exact.
    """
    from .mesh import build_mesh

    beta = np.asarray(beta, dtype=float)
    study = ConvergenceStudy(f"transport-{case.name}")
    for n in cells:
        mesh = build_mesh(dim, [1.0] * dim, [n] * dim)
        x = mesh.centers
        T = np.broadcast_to(temperature(x), mesh.shape)
        exact = np.broadcast_to(case.I(0.0, x, beta), mesh.shape)
        q = T**4 + (case.beta_grad_I(0.0, x, beta) + exact - T**4)
        faces = []
        for a in range(dim):
            patch = mesh.patch(a, -1 if beta[a] > 0 else 1)
            faces.append(np.broadcast_to(case.I(0.0, patch.centers, beta), patch.face_shape))
        I = sweep_ordinate(q, beta, mesh, faces)
        study.resolutions.append(mesh.cell_size[0])
        study.errors.append(_l2_error(I, exact, mesh) / math.sqrt(float(np.sum(exact * exact)) * mesh.cell_volume))
    estimate_order(study)
    return study


def heat_study(
    case: ManufacturedCase,
    quadrature: AngularQuadrature,
    theta: float,
    bc_ab: tuple,
    dim: int,
    cells: Sequence[int],
    steps: Sequence[int],
    horizon: float = 1.0,
    vary: str = "space",
    settings: HeatSettings = HeatSettings(),
) -> ConvergenceStudy:
    """Conduction error against ``case.T`` with the exact ``G*`` supplied.

    ``cells`` and ``steps`` are paired resolution lists; ``vary`` says which
    one defines the recorded resolution (``h`` or ``dt``). The error is the
    largest relative ``L2`` error over the time levels.
    """
    from .mesh import build_mesh

    study = ConvergenceStudy(f"heat-{case.name}-{vary}")
    a, b = bc_ab
    for n, k in zip(cells, steps):
        mesh = build_mesh(dim, [1.0] * dim, [n] * dim)
        tg = TimeGrid(horizon, k)
        data = mms_forcing(case, quadrature, theta, a, b, mesh.extents)
        x = mesh.centers
        G = np.stack([data.G_exact(t, x) for t in tg.times])
        T0 = np.broadcast_to(case.T(0.0, x), mesh.shape)
        T = solve_heat(
            T0, G, data.bc, theta, tg, mesh,
            emission_coeff=quadrature.measure, source=data.heat_source, settings=settings,
        )
        err = 0.0
        for lvl, t in enumerate(tg.times):
            exact = np.broadcast_to(case.T(t, x), mesh.shape)
            err = max(err, _l2_error(T[lvl], exact, mesh) / math.sqrt(float(np.sum(exact * exact)) * mesh.cell_volume))
        study.resolutions.append(mesh.cell_size[0] if vary == "space" else tg.dt)
        study.errors.append(err)
    estimate_order(study)
    return study
