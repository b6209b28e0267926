"""The coupled map ``T -> T**4 -> G -> heat solve`` and its Picard iteration.

``apply_H`` composes the three stages over a whole temperature history:
emission at every level, one transport solve per level (all levels are
swept together), angular reduction to ``G``, then one conduction solve over
the horizon driven by that ``G``. ``picard_solve`` iterates it, either over
the full space-time history (``mode="global"``) or converging the coupling
inside each time step before advancing (``mode="stepwise"``).

Residuals and contraction ratios are measured in the discrete
``W_2^{2,1}(Q_tau)`` surrogate norm ``estimates.w21_norm``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .estimates import check_holder_split, history_lp, w21_norm
from .heat import BoundarySpec, DiffusionOperator, HeatSettings, heat_step, solve_heat
from .mesh import BoxMesh, TimeGrid
from .quadrature import AngularQuadrature
from .transport import InflowData, directional_derivative, emission, incident_radiation, inflow_faces, solve_rte, solve_rte_history

logger = logging.getLogger(__name__)


class IdenticalInputsError(ValueError):
    """Contraction ratio requested for two identical histories."""


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-8
    max_iter: int = 200
    mode: str = "global"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("Picard tol must be positive")
        if self.max_iter < 1:
            raise ValueError("Picard max_iter must be >= 1")
        if self.mode not in ("global", "stepwise"):
            raise ValueError(f"unknown Picard mode {self.mode!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    mesh: BoxMesh
    timegrid: TimeGrid
    quadrature: AngularQuadrature
    bc: BoundarySpec
    inflow: InflowData
    theta: float
    T0: np.ndarray
    picard: PicardSettings = PicardSettings()
    heat: HeatSettings = HeatSettings()
    heat_source: Optional[Callable] = None  # f(t, centers), manufactured solutions only
    rte_source: Optional[Callable] = None  # f(t, centers, beta), manufactured solutions only
    workers: int = 1

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.quadrature.dim != self.mesh.dim:
            raise ValueError("quadrature and mesh dimensions differ")
        T0 = np.asarray(self.T0, dtype=float)
        if T0.shape != self.mesh.shape:
            raise ValueError(f"T0 shape {T0.shape} does not match mesh {self.mesh.shape}")
        if not np.all(np.isfinite(T0)) or np.any(T0 < 0):
            raise ValueError("T0 must be finite and non-negative")

    @property
    def emission_coeff(self) -> float:
        return self.quadrature.measure

    def scaled(self, s: float) -> "ScenarioConfig":
        """Same scenario with ``T0``, ``g`` and ``I_b`` multiplied by ``s``."""
        g = self.bc.g
        if callable(g):
            g = _Scaled(g, s)
        else:
            g = g * s
        return replace(
            self,
            T0=np.asarray(self.T0) * s,
            bc=BoundarySpec(self.bc.a, self.bc.b, g),
            inflow=self.inflow.scaled(s),
        )


class _Scaled:
    def __init__(self, f, s):
        self.f, self.s = f, s

    def __call__(self, *args):
        return self.s * np.asarray(self.f(*args))


@dataclass
class PicardTrace:
    mode: str = "global"
    residuals: list = field(default_factory=list)  # relative
    differences: list = field(default_factory=list)  # absolute ||T_{k+1} - T_k||
    ratios: list = field(default_factory=list)  # rho_k, k >= 2
    step_iterations: list = field(default_factory=list)  # stepwise mode only
    fixed_point_residual: Optional[float] = None
    coupled_residuals: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.residuals) if self.mode == "global" else max(self.step_iterations, default=0)

    def record(self, diff: float, scale: float):
        if self.differences and self.differences[-1] > 0:
            self.ratios.append(diff / self.differences[-1])
        self.differences.append(diff)
        self.residuals.append(diff / scale if scale > 0 else diff)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "iterations": self.iterations,
            "residuals": list(self.residuals),
            "differences": list(self.differences),
            "ratios": list(self.ratios),
            "step_iterations": list(self.step_iterations),
            "fixed_point_residual": self.fixed_point_residual,
            "coupled_residuals": dict(self.coupled_residuals),
        }


@dataclass
class CoupledSolution:
    T: np.ndarray  # (levels, *shape)
    I: np.ndarray  # (levels, M, *shape)
    G: np.ndarray  # (levels, *shape)
    trace: PicardTrace
    converged: bool


def _radiation(T_hist, config):
    I = solve_rte_history(
        T_hist, config.inflow, config.quadrature, config.mesh, config.timegrid.times,
        config.rte_source, config.workers,
    )
    I = np.moveaxis(I, 1, 0)  # (M, levels, ...) for the reduction
    G = incident_radiation(I, config.quadrature)
    return np.moveaxis(I, 0, 1), G


def _heat(G, config):
    return solve_heat(
        config.T0, G, config.bc, config.theta, config.timegrid, config.mesh,
        emission_coeff=config.emission_coeff, source=config.heat_source, settings=config.heat,
    )


def apply_H(T_history: np.ndarray, config: ScenarioConfig, return_radiation: bool = False):
    """One application of the coupled map to a full temperature history."""
    T_history = np.asarray(T_history, dtype=float)
    if T_history.shape != (config.timegrid.n_levels,) + config.mesh.shape:
        raise ValueError("temperature history does not match the time grid and mesh")
    I, G = _radiation(T_history, config)
    T_new = _heat(G, config)
    if return_radiation:
        return T_new, I, G
    return T_new


def initial_guess(config: ScenarioConfig) -> np.ndarray:
    """Constant-in-time extension of ``T0``."""
    return np.broadcast_to(np.asarray(config.T0, dtype=float), (config.timegrid.n_levels,) + config.mesh.shape).copy()


def _coupled_residuals(T, I, G, config) -> dict:
    """Relative discrete residuals of the transport and conduction equations."""
    mesh, tg, quad = config.mesh, config.timegrid, config.quadrature
    t_num = t_den = 0.0
    for n, t in enumerate(tg.times):
        E = emission(T[n])
        for m in range(quad.size):
            beta = quad.directions[m]
            faces = None if config.inflow.is_zero else inflow_faces(config.inflow, beta, mesh, t)
            rhs = E if config.rte_source is None else E + config.rte_source(t, mesh.centers, beta)
            r = directional_derivative(I[n, m], beta, mesh, faces) + I[n, m] - rhs
            t_num += float(np.sum(r * r))
            t_den += float(np.sum(rhs * rhs))
    op = DiffusionOperator(mesh, config.bc)
    h_num = h_den = 0.0
    k = config.emission_coeff * config.theta
    for n in range(tg.steps):
        t1 = tg.times[n + 1]
        fixed = T[n] / tg.dt + op.boundary_rhs(t1) + config.theta * G[n + 1]
        if config.heat_source is not None:
            fixed = fixed + config.heat_source(t1, mesh.centers)
        r = T[n + 1] / tg.dt + op.apply(T[n + 1]) + k * T[n + 1] ** 4 - fixed
        h_num += float(np.sum(r * r))
        h_den += float(np.sum(fixed * fixed))
    return {
        "transport": math.sqrt(t_num / t_den) if t_den > 0 else math.sqrt(t_num),
        "heat": math.sqrt(h_num / h_den) if h_den > 0 else math.sqrt(h_num),
    }


def _finish(T, config, trace, converged) -> CoupledSolution:
    I, G = _radiation(T, config)
    T_next = _heat(G, config)
    scale = w21_norm(T_next, config.mesh, config.timegrid)
    diff = w21_norm(T_next - T, config.mesh, config.timegrid)
    trace.fixed_point_residual = diff / scale if scale > 0 else diff
    trace.coupled_residuals = _coupled_residuals(T, I, G, config)
    return CoupledSolution(T, I, G, trace, converged)


def _picard_global(config, T):
    mesh, tg = config.mesh, config.timegrid
    s = config.picard
    trace = PicardTrace(mode="global")
    converged = False
    for k in range(s.max_iter):
        T_new = apply_H(T, config)
        diff = w21_norm(T_new - T, mesh, tg)
        trace.record(diff, w21_norm(T_new, mesh, tg))
        T = T_new
        logger.debug("picard %d: residual %.3e", k + 1, trace.residuals[-1])
        if trace.residuals[-1] < s.tol:
            converged = True
            break
    return T, trace, converged


def _picard_stepwise(config, T_init):
    mesh, tg, quad = config.mesh, config.timegrid, config.quadrature
    s = config.picard
    # per-step coupling converged one decade tighter than the global tolerance
    tol = 0.1 * s.tol
    trace = PicardTrace(mode="stepwise")
    op = DiffusionOperator(mesh, config.bc)
    T = np.empty_like(T_init)
    T[0] = config.T0
    converged = True
    for n in range(tg.steps):
        t1 = tg.times[n + 1]
        guess = T_init[n + 1].copy()
        f = None if config.heat_source is None else np.broadcast_to(config.heat_source(t1, mesh.centers), mesh.shape)
        ok = False
        prev_diff = None
        for k in range(s.max_iter):
            I = solve_rte(guess, config.inflow, quad, mesh, t1, config.rte_source, config.workers)
            G = incident_radiation(I, quad)
            new = heat_step(
                T[n], G, config.bc, config.theta, tg.dt, mesh, t_new=t1,
                emission_coeff=config.emission_coeff, source=f, settings=config.heat, operator=op,
            )
            d = new - guess
            diff = math.sqrt(float(np.sum(d * d)))
            scale = math.sqrt(float(np.sum(new * new)))
            guess = new
            if prev_diff:
                trace.ratios.append(diff / prev_diff)
            prev_diff = diff
            if (diff / scale if scale > 0 else diff) < tol:
                ok = True
                break
        trace.step_iterations.append(k + 1)
        trace.residuals.append(diff / scale if scale > 0 else diff)
        trace.differences.append(diff)
        T[n + 1] = guess
        if not ok:
            converged = False
            T[n + 2 :] = guess
            break
    return T, trace, converged


def picard_solve(config: ScenarioConfig, initial: Optional[np.ndarray] = None) -> CoupledSolution:
    """Iterate the coupled map to its fixed point.

    Non-convergence is not an error: the returned solution has
    ``converged=False`` and a trace that shows why.
    """
    T = initial_guess(config) if initial is None else np.array(initial, dtype=float)
    if T.shape != (config.timegrid.n_levels,) + config.mesh.shape or np.any(T < 0):
        raise ValueError("initial guess must be a non-negative history on the time grid")
    if config.picard.mode == "global":
        T, trace, converged = _picard_global(config, T)
    else:
        T, trace, converged = _picard_stepwise(config, T)
    return _finish(T, config, trace, converged)


@dataclass
class ContractionMeasurement:
    ratio: float
    holder_factor: float
    lipschitz_bound_lhs: float  # ||T1^4 - T2^4||_L2(Q)
    holder_satisfied: bool
    input_distance: float
    output_distance: float


def contraction_ratio(T1: np.ndarray, T2: np.ndarray, config: ScenarioConfig) -> ContractionMeasurement:
    """``||H(T1) - H(T2)|| / ||T1 - T2||`` and the Holder-split factor for the ledger."""
    mesh, tg = config.mesh, config.timegrid
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    din = w21_norm(T1 - T2, mesh, tg)
    if din == 0.0:
        raise IdenticalInputsError("contraction ratio undefined for identical inputs")
    dout = w21_norm(apply_H(T1, config) - apply_H(T2, config), mesh, tg)
    factor = (history_lp(T1 - T2, 8, mesh, tg) * history_lp(T1 + T2, 8, mesh, tg)
              * history_lp(T1**2 + T2**2, 4, mesh, tg)) / din
    row = check_holder_split(T1, T2, mesh, tg)
    return ContractionMeasurement(dout / din, factor, row.lhs, row.status == "pass", din, dout)
