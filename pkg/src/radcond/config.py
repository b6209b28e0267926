"""YAML run configurations: schema validation, semantic checks, normalization.

``load_config`` returns a ``RunConfig`` whose ``normalized()`` form has every
default filled in and every expression printed canonically; writing that form
back and loading it again gives an equal ``RunConfig``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from .expr import Expression, ExpressionError
from .fixedpoint import PicardSettings, ScenarioConfig
from .heat import BoundarySpec, HeatSettings
from .mesh import TimeGrid, build_mesh
from .quadrature import build_quadrature
from .transport import InflowData

DEFAULT_ORDER = {1: 2, 2: 8, 3: 2}
DEFAULT_CHECKS = {"transport": True, "l8": True, "radiation": True, "constants": True, "tol_est": 0.05}
DEFAULT_OUTPUT = {"directory": None, "formats": ["csv"], "cadence": 1}


class ConfigError(ValueError):
    """Configuration could not be parsed or violates a model assumption."""


def load_schema() -> dict:
    text = resources.files("radcond").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def _expr(value, what: str, dim: int, allow_direction: bool = False) -> Expression:
    try:
        e = Expression(value)
        e.check_dimension(dim, allow_direction)
    except ExpressionError as exc:
        raise ConfigError(f"{what}: {exc}") from None
    return e


@dataclass(frozen=True)
class RunConfig:
    name: str
    seed: int
    dim: int
    extents: tuple
    cells: tuple
    horizon: float
    steps: int
    order: int
    theta: float
    a: float
    b: float
    g: Expression
    inflow: Expression
    T0: Expression
    T0_noise: float
    picard: PicardSettings
    heat: HeatSettings
    output: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUT))
    checks: dict = field(default_factory=lambda: dict(DEFAULT_CHECKS))

    def normalized(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "scenario": {
                "dim": self.dim,
                "extents": [float(v) for v in self.extents],
                "cells": [int(v) for v in self.cells],
                "time": {"horizon": float(self.horizon), "steps": self.steps},
                "quadrature": {"order": self.order},
                "theta": float(self.theta),
                "boundary": {"a": float(self.a), "b": float(self.b), "g": self.g.to_source()},
                "inflow": self.inflow.to_source(),
                "T0": self.T0.to_source(),
                "T0_noise": float(self.T0_noise),
            },
            "picard": {"tol": self.picard.tol, "max_iter": self.picard.max_iter, "mode": self.picard.mode},
            "heat": {
                "tol_newton": self.heat.tol_newton,
                "max_newton": self.heat.max_newton,
                "tol_pos": self.heat.tol_pos,
                "cg_rtol": self.heat.cg_rtol,
                "cg_maxiter": self.heat.cg_maxiter,
            },
            "output": {k: v for k, v in self.output.items() if v is not None},
            "checks": dict(self.checks),
        }

    def boundary_spec(self) -> BoundarySpec:
        g = self.g.constant_value() if self.g.is_constant else self.g
        return BoundarySpec(self.a, self.b, g)

    def inflow_data(self) -> InflowData:
        if self.inflow.is_constant:
            return InflowData.constant(self.inflow.constant_value())
        return InflowData(func=self.inflow)

    def initial_temperature(self, mesh, seed: Optional[int] = None) -> np.ndarray:
        T0 = np.array(self.T0(0.0, mesh.centers), dtype=float)
        if self.T0_noise > 0:
            rng = np.random.default_rng(self.seed if seed is None else seed)
            T0 = T0 + self.T0_noise * rng.random(mesh.shape)
        return T0

    def build_scenario(self, workers: int = 1, seed: Optional[int] = None) -> ScenarioConfig:
        mesh = build_mesh(self.dim, self.extents, self.cells)
        return ScenarioConfig(
            mesh=mesh,
            timegrid=TimeGrid(self.horizon, self.steps),
            quadrature=build_quadrature(self.dim, self.order),
            bc=self.boundary_spec(),
            inflow=self.inflow_data(),
            theta=self.theta,
            T0=self.initial_temperature(mesh, seed),
            picard=self.picard,
            heat=self.heat,
            workers=workers,
        )


def parse_config(doc) -> RunConfig:
    """Validate a configuration mapping and return the typed form."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None

    sc = doc["scenario"]
    dim = sc["dim"]
    if len(sc["extents"]) != dim or len(sc["cells"]) != dim:
        raise ConfigError(f"extents and cells need {dim} entries for a {dim}-D scenario")
    order = sc.get("quadrature", {}).get("order", DEFAULT_ORDER[dim])
    try:
        build_quadrature(dim, order)
    except ValueError as exc:
        raise ConfigError(f"scenario.quadrature.order: {exc}") from None
    bnd = sc["boundary"]
    if bnd["a"] + bnd["b"] <= 0:
        raise ConfigError("scenario.boundary: need a + b > 0")
    try:
        picard = PicardSettings(**doc.get("picard", {}))
        heat = HeatSettings(**doc.get("heat", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    run = RunConfig(
        name=doc.get("name", "scenario"),
        seed=doc.get("seed", 0),
        dim=dim,
        extents=tuple(float(v) for v in sc["extents"]),
        cells=tuple(int(v) for v in sc["cells"]),
        horizon=float(sc["time"]["horizon"]),
        steps=int(sc["time"]["steps"]),
        order=order,
        theta=float(sc["theta"]),
        a=float(bnd["a"]),
        b=float(bnd["b"]),
        g=_expr(bnd.get("g", 0.0), "scenario.boundary.g", dim),
        inflow=_expr(sc.get("inflow", 0.0), "scenario.inflow", dim, allow_direction=True),
        T0=_expr(sc["T0"], "scenario.T0", dim),
        T0_noise=float(sc.get("T0_noise", 0.0)),
        picard=picard,
        heat=heat,
        output={**DEFAULT_OUTPUT, **doc.get("output", {})},
        checks={**DEFAULT_CHECKS, **doc.get("checks", {})},
    )
    if "t" in run.T0.variables:
        raise ConfigError("scenario.T0 may not depend on t")
    _semantic_checks(run)
    return run


def _semantic_checks(run: RunConfig):
    """Non-negativity of the data and Dirichlet compatibility, sampled on the grid."""
    mesh = build_mesh(run.dim, run.extents, run.cells)
    tg = TimeGrid(run.horizon, run.steps)
    quad = build_quadrature(run.dim, run.order)
    T0 = run.T0(0.0, mesh.centers)
    if not np.all(np.isfinite(T0)) or np.any(T0 < 0):
        raise ConfigError("scenario.T0 must be finite and non-negative on the grid")
    for t in tg.times:
        for patch in mesh.boundary_patches:
            g = run.g(t, patch.centers)
            if not np.all(np.isfinite(g)) or np.any(g < 0):
                raise ConfigError(f"scenario.boundary.g must be non-negative (fails at t={t:g})")
            for beta in quad.directions:
                if float(np.dot(beta, patch.normal)) >= 0:
                    continue
                ib = run.inflow(t, patch.centers, beta)
                if not np.all(np.isfinite(ib)) or np.any(ib < 0):
                    raise ConfigError(f"scenario.inflow must be non-negative (fails at t={t:g})")
    try:
        run.boundary_spec().check_compatibility(lambda x: run.T0(0.0, x), mesh)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(doc)


def dump_config(run: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(run.normalized(), sort_keys=True))
