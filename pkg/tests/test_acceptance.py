"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> <name>: PASS|FAIL`` line with the
numbers behind the verdict, then asserts. Run with ``pytest -m slow -s`` to see
only these.
"""
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from radcond.cli import main
from radcond.config import load_config
from radcond.fixedpoint import picard_solve
from radcond.suites import (
    l8_battery,
    mms_suite,
    positivity_suite,
    scaling_ladder,
    transport_refinement,
    uniqueness_check,
)

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def verdict(capsys):
    def emit(number, name, passed, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed

    return emit


def test_1_positivity(verdict):
    res = positivity_suite(n_scenarios=100, seed=0)
    c = res["checks"]
    ok = verdict(
        1, "positivity", res["passed"],
        f"{c['all_converged']['converged']}/100 converged, families {','.join(res['families'])}, "
        f"min T {c['non_negative']['T_min']:.3g}, min I {c['non_negative']['I_min']:.3g}",
    )
    assert ok, res["checks"]


def test_2_transport_estimates(verdict):
    t3 = transport_refinement(3, [8, 16, 32])
    t1 = transport_refinement(1, [64, 128, 256])
    ok = all(r["finest_pass"] and r["margins_monotone"] for r in (t3, t1))
    slacks = {
        f"{r['dim']}d": max(v["slack"] for v in r["levels"][-1]["rows"].values() if v["slack"] is not None)
        for r in (t3, t1)
    }
    verdict(2, "transport estimates", ok,
            f"max slack at 32^3 {slacks['3d']:.3f}, at 256 {slacks['1d']:.3f}, margins monotone "
            f"{t3['margins_monotone'] and t1['margins_monotone']}")
    assert ok


def test_3_l8_bounds(verdict):
    robin = l8_battery("robin", 10)
    dirichlet = l8_battery("dirichlet", 10)
    neumann = l8_battery("neumann", 10)
    ok = robin["passed"] and dirichlet["passed"] and neumann["passed"]
    worst = {b["family"]: max(r["slack"] for r in b["rows"]) for b in (robin, dirichlet)}
    verdict(3, "L8 bounds", ok,
            f"worst slack robin {worst['robin']:.3f}, dirichlet {worst['dirichlet']:.3f}; "
            f"neumann reported only on {len(neumann['rows'])} scenarios")
    assert ok


def test_4_contraction(verdict):
    lad = scaling_ladder()
    ok = lad["all_below_one"] and lad["non_increasing"] and lad["geometric"] and lad["all_converged"]
    rhos = ", ".join(f"s={r['scale']}: rho {r['rho']:.3f} R2 {r['r2']:.4f}" for r in lad["rows"])
    verdict(4, "contraction", ok, rhos)
    assert ok


def test_5_uniqueness(verdict):
    res = uniqueness_check()
    verdict(5, "uniqueness", res["passed"],
            f"relative W21 difference {res['relative_difference']:.2e} vs bound {res['bound']:.1e}")
    assert res["passed"]


def test_6_oracle_and_orders(verdict):
    res = mms_suite()
    c = res["checks"]
    names = ("oracle_first_order_band", "sweep_order", "heat_space_order", "heat_time_order")
    ok = all(c[k]["passed"] for k in names)
    verdict(6, "oracle and orders", ok,
            f"oracle worst rel err {c['oracle_first_order_band']['worst']:.3f} <= h {c['oracle_first_order_band']['h']}, "
            f"sweep {c['sweep_order']['order']:.2f}, heat space {c['heat_space_order']['order']:.2f}, "
            f"heat time {c['heat_time_order']['order']:.2f}")
    assert ok


def test_7_exact_fixed_points(verdict):
    zero = picard_solve(load_config(CONFIGS / "zero.yaml").build_scenario())
    zero_ok = zero.converged and zero.trace.iterations == 1 and not np.any(zero.T) and not np.any(zero.I)

    run = load_config(CONFIGS / "equilibrium.yaml")
    sc = run.build_scenario()
    eq = picard_solve(sc)
    c = 0.7
    dev_T = float(np.max(np.abs(eq.T - c)))
    dev_G = float(np.max(np.abs(eq.G - sc.emission_coeff * c**4)))
    eq_ok = eq.converged and sc.timegrid.steps == 100 and sc.bc.family == "neumann" and max(dev_T, dev_G) <= 1e-10
    ok = zero_ok and eq_ok
    verdict(7, "exact fixed points", ok,
            f"zero data {zero.trace.iterations} iteration(s); equilibrium over {sc.timegrid.steps} steps "
            f"max |T-c| {dev_T:.1e}, max |G-sigma c^4| {dev_G:.1e}")
    assert ok


def test_8_determinism(verdict, tmp_path):
    digests = {}
    for threads in (1, 2, 4):
        out = tmp_path / f"threads{threads}"
        code = main(["run", str(CONFIGS / "robin.yaml"), "--output", str(out),
                     "--threads", str(threads), "--seed", "11"])
        assert code == 0
        digests[threads] = hashlib.md5((out / "diagnostics.json").read_bytes()).hexdigest()
    again = tmp_path / "repeat"
    main(["run", str(CONFIGS / "robin.yaml"), "--output", str(again), "--threads", "4", "--seed", "11"])
    digests["repeat"] = hashlib.md5((again / "diagnostics.json").read_bytes()).hexdigest()
    json.loads((again / "diagnostics.json").read_text())
    ok = len(set(digests.values())) == 1
    verdict(8, "determinism", ok, f"diagnostics md5 {sorted(set(digests.values()))}")
    assert ok
