"""Field snapshots (CSV, legacy binary VTK) and the diagnostics document."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .estimates import (
    EstimateReport,
    check_constant_ratios,
    check_G_estimate,
    check_L8_bounds,
    check_transport_estimates,
    compute_norms,
    transport_split,
)
from .mesh import BoxMesh


def write_csv(path, mesh: BoxMesh, fields: dict) -> None:
    """One row per cell: center coordinates then one column per field."""
    coords = [c.ravel() for c in mesh.centers]
    names = [f"x{a + 1}" for a in range(mesh.dim)] + list(fields)
    cols = coords + [np.asarray(v).ravel() for v in fields.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def write_vtk(path, mesh: BoxMesh, fields: dict) -> None:
    """Legacy VTK ``STRUCTURED_POINTS`` with cell data, big-endian binary doubles."""
    dims = list(mesh.shape) + [1] * (3 - mesh.dim)
    spacing = list(mesh.cell_size) + [1.0] * (3 - mesh.dim)
    header = (
        "# vtk DataFile Version 3.0\nradcond snapshot\nBINARY\nDATASET STRUCTURED_POINTS\n"
        f"DIMENSIONS {dims[0] + 1} {dims[1] + 1} {dims[2] + 1}\n"
        "ORIGIN 0 0 0\n"
        f"SPACING {spacing[0]!r} {spacing[1]!r} {spacing[2]!r}\n"
        f"CELL_DATA {mesh.n_cells}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode())
        for name, values in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n".encode())
            # VTK orders points x-fastest, the reverse of the C layout
            data = np.asarray(values, dtype=">f8").transpose().ravel()
            fh.write(data.tobytes())
            fh.write(b"\n")


def write_snapshots(directory, mesh, T, G, times, formats=("csv",), cadence: int = 1) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    levels = sorted(set(range(0, len(times), cadence)) | {len(times) - 1})
    for n in levels:
        fields = {"T": T[n], "G": G[n]}
        if "csv" in formats:
            p = directory / f"fields_{n:05d}.csv"
            write_csv(p, mesh, fields)
            written.append(p.name)
        if "vtk" in formats:
            p = directory / f"fields_{n:05d}.vtk"
            write_vtk(p, mesh, fields)
            written.append(p.name)
    return written


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run_checks(solution, scenario, checks: dict) -> list:
    """``(ledger, reports)`` for every enabled estimate suite."""
    tol = checks.get("tol_est", 0.05)
    ledger = compute_norms(solution, scenario)
    reports = []
    if checks.get("transport", True):
        I0, w = transport_split(solution.T, scenario, scenario.workers)
        reports.append(check_transport_estimates(I0, w, solution.T, scenario, tol))
    if checks.get("l8", True):
        reports.append(check_L8_bounds(solution, scenario, ledger, tol))
    if checks.get("radiation", True):
        reports.append(check_G_estimate(ledger))
    if checks.get("constants", True):
        reports.append(check_constant_ratios(ledger))
    return ledger, reports


def diagnostics_document(run_config, scenario, solution, ledger, reports: list, status: str, artifacts=()) -> dict:
    """Structured summary of a run; contains nothing that depends on threads or wall time."""
    estimates = {}
    for rep in reports:
        estimates.update(rep.to_dict()["rows"])
    T, I = solution.T, solution.I
    return {
        "metadata": {
            "tool": "radcond",
            "version": __version__,
            "name": run_config.name,
            "seed": run_config.seed,
            "status": status,
            "converged": solution.converged,
            "config": {k: v for k, v in run_config.normalized().items() if k != "output"},
            "ordinates": scenario.quadrature.size,
            "emission_coefficient": scenario.emission_coeff,
        },
        "fields": {
            "T_min": float(T.min()),
            "T_max": float(T.max()),
            "I_min": float(I.min()),
            "I_max": float(I.max()),
            "G_final_mean": float(np.mean(solution.G[-1])),
        },
        "ledger": ledger.to_dict(),
        "estimates": estimates,
        "all_asserted_pass": all(r.passed for r in reports),
        "picard": solution.trace.to_dict(),
        "artifacts": sorted(artifacts),
    }


def report_pass(reports: list) -> bool:
    return all(isinstance(r, EstimateReport) and r.passed for r in reports)
