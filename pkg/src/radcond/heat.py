"""Implicit-Euler conduction step with radiative source and general boundary data.

One step solves, for the new temperature ``T``,

    (T - T_prev)/dt - lap_h T + sigma*theta*max(T, 0)**4 = theta*G + f

with Newton's method; ``sigma`` is the measure of the direction space (4*pi in
3-D). Evaluating the emission on ``max(T, 0)`` is the truncated nonlinearity
that makes non-negativity of the continuous solution provable; here it keeps
Newton iterates well defined if they undershoot.

The Laplacian is the centred finite-volume stencil. On a boundary face the
condition ``a dT/dn + b T = g`` is imposed through a ghost value placed by the
half-cell difference, giving the outward flux

    dT/dn = 2 (g - b T_c) / (b h + 2 a).

With ``a, b >= 0`` the system matrix is a symmetric M-matrix, so each Newton
correction is solved with unpreconditioned conjugate gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .mesh import BoxMesh, TimeGrid

FOUR_PI = 4.0 * math.pi


class HeatSolverError(RuntimeError):
    def __init__(self, message: str, step: Optional[int] = None, history: Optional[list] = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.history = history or []


class NewtonConvergenceError(HeatSolverError):
    pass


class PositivityError(HeatSolverError):
    pass


class CGConvergenceError(HeatSolverError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition ``a dT/dn + b T = g`` on every face of the box.

    ``g`` is a non-negative number or a callable ``g(t, coords)`` evaluated at
    face centers.
    """

    a: float
    b: float
    g: Union[float, Callable] = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("boundary coefficients must be finite")
        if abs(self.a) + abs(self.b) <= 0.0:
            raise ValueError("boundary condition needs |a| + |b| > 0")
        if self.a < 0 or self.b < 0:
            raise ValueError("boundary coefficients must satisfy a >= 0 and b >= 0")
        if not callable(self.g) and (not np.isfinite(self.g) or self.g < 0):
            raise ValueError(f"boundary datum g must be non-negative, got {self.g}")

    @property
    def family(self) -> str:
        if self.a == 0:
            return "dirichlet"
        if self.b == 0:
            return "neumann"
        return "robin"

    @property
    def g_is_zero(self) -> bool:
        return not callable(self.g) and self.g == 0.0

    def values(self, t: float, coords: tuple) -> np.ndarray:
        shape = np.shape(coords[0])
        if callable(self.g):
            vals = np.array(np.broadcast_to(np.asarray(self.g(t, coords), dtype=float), shape))
        else:
            vals = np.full(shape, float(self.g))
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("boundary datum g must be finite and non-negative")
        return vals

    def check_compatibility(self, T0: Callable, mesh: BoxMesh, tol: float = 1e-8) -> float:
        """Dirichlet only: max mismatch of ``T0`` against ``g(0)/b`` on the faces."""
        if self.family != "dirichlet":
            return 0.0
        worst = 0.0
        for patch in mesh.boundary_patches:
            target = self.values(0.0, patch.centers) / self.b
            got = np.broadcast_to(np.asarray(T0(patch.centers), dtype=float), target.shape)
            worst = max(worst, float(np.max(np.abs(got - target))))
        if worst > tol * max(1.0, float(np.max(np.abs(target)))):
            raise ValueError(f"Dirichlet data incompatible with T0 on the boundary (mismatch {worst:.3e})")
        return worst


@dataclass(frozen=True)
class HeatSettings:
    tol_newton: float = 1e-10
    max_newton: int = 50
    tol_pos: float = 1e-12
    cg_rtol: float = 1e-10
    cg_maxiter: int = 20000


def dot(u: np.ndarray, v: np.ndarray) -> float:
    # np.sum uses fixed pairwise summation, independent of BLAS threading
    return float(np.sum(u * v))


def conjugate_gradient(apply, b, rtol=1e-10, maxiter=20000):
    """Unpreconditioned CG for an SPD operator given as a callable."""
    x = np.zeros_like(b)
    bnorm = math.sqrt(dot(b, b))
    if bnorm == 0.0:
        return x, 0
    r = b.copy()
    p = r.copy()
    rr = dot(r, r)
    for k in range(maxiter):
        if math.sqrt(rr) <= rtol * bnorm:
            return x, k
        Ap = apply(p)
        alpha = rr / dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = dot(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    if math.sqrt(rr) <= rtol * bnorm:
        return x, maxiter
    raise CGConvergenceError(f"CG did not reach rtol={rtol} in {maxiter} iterations")


class DiffusionOperator:
    """Matrix-free ``-lap_h`` with the boundary condition folded in."""

    def __init__(self, mesh: BoxMesh, bc: BoundarySpec):
        self.mesh = mesh
        self.bc = bc
        dim = mesh.dim
        self.boundary_coef = []
        self.boundary_diag = np.zeros(mesh.shape)
        for patch in mesh.boundary_patches:
            h = mesh.cell_size[patch.axis]
            k = 2.0 / (h * (bc.b * h + 2.0 * bc.a))
            self.boundary_coef.append(k)
            sl = patch.cell_slice(dim)
            self.boundary_diag[sl] += k * bc.b

    def apply(self, T: np.ndarray) -> np.ndarray:
        out = self.boundary_diag * T
        for a, h in enumerate(self.mesh.cell_size):
            flux = np.diff(T, axis=a) / (h * h)
            lo = [slice(None)] * T.ndim
            hi = [slice(None)] * T.ndim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            out[tuple(lo)] -= flux
            out[tuple(hi)] += flux
        return out

    def boundary_rhs(self, t: float) -> np.ndarray:
        rhs = np.zeros(self.mesh.shape)
        if self.bc.g_is_zero:
            return rhs
        for patch, k in zip(self.mesh.boundary_patches, self.boundary_coef):
            g = self.bc.values(t, patch.centers)
            rhs[patch.cell_slice(self.mesh.dim)] += k * g
        return rhs


@dataclass
class StepInfo:
    newton_iterations: int = 0
    residual_history: list = field(default_factory=list)
    cg_iterations: int = 0
    min_before_clamp: float = 0.0


def heat_step(
    T_prev: np.ndarray,
    G: np.ndarray,
    bc: BoundarySpec,
    theta: float,
    dt: float,
    mesh: BoxMesh,
    *,
    t_new: float = 0.0,
    emission_coeff: float = FOUR_PI,
    source: Optional[np.ndarray] = None,
    settings: HeatSettings = HeatSettings(),
    operator: Optional[DiffusionOperator] = None,
    info: Optional[StepInfo] = None,
) -> np.ndarray:
    """Advance the temperature by one implicit-Euler step of length ``dt``.

    Raises
    ------
    NewtonConvergenceError
        If the relative residual does not drop below ``settings.tol_newton``.
    PositivityError
        If the converged field undershoots zero by more than ``settings.tol_pos``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    T_prev = np.asarray(T_prev, dtype=float)
    G = np.asarray(G, dtype=float)
    if T_prev.shape != mesh.shape or G.shape != mesh.shape:
        raise ValueError("T_prev and G must have the mesh shape")
    op = operator or DiffusionOperator(mesh, bc)
    info = info if info is not None else StepInfo()

    fixed = T_prev / dt + op.boundary_rhs(t_new) + theta * G
    if source is not None:
        fixed = fixed + source
    scale = math.sqrt(dot(fixed, fixed))
    k_rad = emission_coeff * theta

    T = T_prev.copy()
    history = []
    for it in range(settings.max_newton + 1):
        Tp = np.maximum(T, 0.0)
        R = T / dt + op.apply(T) + k_rad * Tp**4 - fixed
        rnorm = math.sqrt(dot(R, R))
        rel = rnorm / scale if scale > 0 else rnorm
        history.append(rel)
        if rel <= settings.tol_newton:
            break
        if it == settings.max_newton:
            raise NewtonConvergenceError(
                f"Newton did not converge in {settings.max_newton} iterations (residual {rel:.3e})",
                history=history,
            )
        jdiag = 1.0 / dt + 4.0 * k_rad * Tp**3
        delta, n_cg = conjugate_gradient(
            lambda v: op.apply(v) + jdiag * v, -R, settings.cg_rtol, settings.cg_maxiter
        )
        info.cg_iterations += n_cg
        T = T + delta
    info.newton_iterations = len(history) - 1
    info.residual_history = history

    tmin = float(T.min())
    info.min_before_clamp = tmin
    if tmin < -settings.tol_pos:
        raise PositivityError(f"temperature undershoot {tmin:.3e} exceeds tol_pos", history=history)
    return np.maximum(T, 0.0)


def solve_heat(
    T0: np.ndarray,
    G_history: np.ndarray,
    bc: BoundarySpec,
    theta: float,
    timegrid: TimeGrid,
    mesh: BoxMesh,
    *,
    emission_coeff: float = FOUR_PI,
    source: Optional[Callable] = None,
    settings: HeatSettings = HeatSettings(),
    infos: Optional[list] = None,
) -> np.ndarray:
    """Temperature history ``(levels, *mesh.shape)``; step ``n`` uses ``G_history[n+1]``.

    ``source``, if given, is a callable ``f(t, centers)`` added to the right-hand side.
    """
    G_history = np.asarray(G_history, dtype=float)
    if G_history.shape != (timegrid.n_levels,) + mesh.shape:
        raise ValueError(f"G_history must have shape {(timegrid.n_levels,) + mesh.shape}")
    T0 = np.asarray(T0, dtype=float)
    if np.any(T0 < 0) or not np.all(np.isfinite(T0)):
        raise ValueError("initial temperature must be finite and non-negative")
    op = DiffusionOperator(mesh, bc)
    out = np.empty((timegrid.n_levels,) + mesh.shape)
    out[0] = T0
    times = timegrid.times
    for n in range(timegrid.steps):
        f = None if source is None else np.broadcast_to(source(times[n + 1], mesh.centers), mesh.shape)
        info = StepInfo()
        try:
            out[n + 1] = heat_step(
                out[n], G_history[n + 1], bc, theta, timegrid.dt, mesh,
                t_new=times[n + 1], emission_coeff=emission_coeff, source=f,
                settings=settings, operator=op, info=info,
            )
        except HeatSolverError as exc:
            raise type(exc)(str(exc), step=n + 1, history=exc.history) from exc
        if infos is not None:
            infos.append(info)
    return out


def solve_linear_comparison(T0, G_history, bc, theta, timegrid, mesh, settings=HeatSettings()):
    """The linear problem ``dz/dt - lap z = theta G`` with the same data; bounds T from above."""
    return solve_heat(T0, G_history, bc, theta, timegrid, mesh, emission_coeff=0.0, settings=settings)
