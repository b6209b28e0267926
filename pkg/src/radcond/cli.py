"""Command-line front end.

    radcond run <config> [--output DIR] [--threads N] [--seed S]
    radcond suite <name> [--output DIR] [--seed S]
    radcond check <config>

Exit codes: 0 success, 2 configuration error, 3 solver did not converge,
4 an asserted estimate check failed. ``RADCOND_OUTPUT_DIR`` sets the default
output directory.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, dump_config, load_config
from .estimates import compute_norms
from .fixedpoint import picard_solve
from .heat import HeatSolverError
from .output import diagnostics_document, dumps, run_checks, write_snapshots
from .suites import SUITES, run_suite
from .transport import InvalidInflowError, NegativeTemperatureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_CHECK = 4

DEFAULT_OUTPUT_DIR = "radcond-output"
log = logging.getLogger("radcond")


def _output_dir(cli_value, config_value) -> Path:
    return Path(cli_value or config_value or os.environ.get("RADCOND_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR)


def cmd_run(args) -> int:
    try:
        run = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    out = _output_dir(args.output, run.output.get("directory"))
    out.mkdir(parents=True, exist_ok=True)
    scenario = run.build_scenario(workers=max(1, args.threads))
    dump_config(run, out / "config.normalized.yaml")

    try:
        solution = picard_solve(scenario)
    except (HeatSolverError, NegativeTemperatureError, InvalidInflowError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        doc = {"metadata": {"name": run.name, "seed": run.seed, "status": "solver-failure"}, "error": str(exc)}
        (out / "diagnostics.json").write_text(dumps(doc))
        return EXIT_NONCONVERGED

    artifacts = write_snapshots(
        out, scenario.mesh, solution.T, solution.G, scenario.timegrid.times,
        run.output.get("formats", ["csv"]), run.output.get("cadence", 1),
    )
    if solution.converged:
        ledger, reports = run_checks(solution, scenario, run.checks)
        passed = all(r.passed for r in reports)
        status = "ok" if passed else "check-failure"
    else:
        ledger, reports, passed = compute_norms(solution, scenario), [], False
        status = "not-converged"
    doc = diagnostics_document(run, scenario, solution, ledger, reports, status,
                               artifacts + ["config.normalized.yaml"])
    (out / "diagnostics.json").write_text(dumps(doc))

    trace = solution.trace
    print(f"{run.name}: {status}; picard iterations {trace.iterations}, "
          f"last residual {trace.residuals[-1]:.3e}; output in {out}")
    if not solution.converged:
        late = trace.ratios[-5:]
        if late:
            print(f"  last ratios: {', '.join(f'{r:.3f}' for r in late)}")
        return EXIT_NONCONVERGED
    if not passed:
        for rep in reports:
            for row in rep.rows:
                if row.status == "fail":
                    print(f"  FAIL {row.tag}: {row.lhs:.6e} > {row.rhs:.6e}")
        return EXIT_CHECK
    return EXIT_OK


def cmd_suite(args) -> int:
    result = run_suite(args.name, seed=args.seed or 0)
    text = dumps(result)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"suite_{args.name}.json").write_text(text)
    for key, check in result["checks"].items():
        print(f"{'PASS' if check['passed'] else 'FAIL'} {args.name}.{key}")
    print(f"suite {args.name}: {'passed' if result['passed'] else 'FAILED'}")
    return EXIT_OK if result["passed"] else EXIT_CHECK


def cmd_check(args) -> int:
    try:
        run = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cells = "x".join(str(c) for c in run.cells)
    print(f"ok: {run.name} ({run.dim}-D, {cells} cells, {run.steps} steps, "
          f"boundary {run.boundary_spec().family}, picard {run.picard.mode})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radcond", description="coupled radiative-conductive heat transfer solver")
    p.add_argument("-v", "--verbose", action="store_true", help="log Picard progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a configured scenario")
    r.add_argument("config")
    r.add_argument("--output", help="output directory")
    r.add_argument("--threads", type=int, default=1, help="worker threads for the transport sweeps")
    r.add_argument("--seed", type=int, help="override the configuration seed")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run a property battery")
    s.add_argument("name", choices=SUITES)
    s.add_argument("--output", help="directory for the JSON summary")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_suite)

    c = sub.add_parser("check", help="validate a configuration without solving")
    c.add_argument("config")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
