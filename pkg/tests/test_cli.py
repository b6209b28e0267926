import hashlib
import json
from pathlib import Path

import pytest

from radcond.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def digest(path):
    return hashlib.md5(Path(path).read_bytes()).hexdigest()


def test_check_ok(capsys):
    assert main(["check", str(CONFIGS / "robin.yaml")]) == 0
    assert "ok:" in capsys.readouterr().out


def test_check_config_error(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("name: x\nscenario: {dim: 2}\n")
    assert main(["check", str(p)]) == 2
    assert main(["run", str(p), "--output", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_zero_run_writes_artifacts(tmp_path):
    out = tmp_path / "zero"
    assert main(["run", str(CONFIGS / "zero.yaml"), "--output", str(out)]) == 0
    doc = json.loads((out / "diagnostics.json").read_text())
    assert doc["metadata"]["status"] == "ok" and doc["picard"]["residuals"] == [0.0]
    assert (out / "config.normalized.yaml").exists()
    assert (out / "fields_00000.csv").exists() and (out / "fields_00004.csv").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RADCOND_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(CONFIGS / "zero.yaml")]) == 0
    assert (tmp_path / "env" / "diagnostics.json").exists()


def test_normalized_config_reproduces_run(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["run", str(CONFIGS / "neumann.yaml"), "--output", str(a)]) == 0
    assert main(["run", str(a / "config.normalized.yaml"), "--output", str(b)]) == 0
    assert digest(a / "diagnostics.json") == digest(b / "diagnostics.json")


def test_large_data_exit_three(tmp_path, capsys):
    out = tmp_path / "big"
    assert main(["run", str(CONFIGS / "large_data.yaml"), "--output", str(out)]) == 3
    assert "last ratios" in capsys.readouterr().out
    doc = json.loads((out / "diagnostics.json").read_text())
    assert doc["metadata"]["status"] == "not-converged"


def test_failing_check_exit_four(tmp_path, monkeypatch, capsys):
    import radcond.cli as cli
    from radcond.estimates import EstimateReport, EstimateRow

    real = cli.run_checks

    def with_failure(solution, scenario, checks):
        ledger, reports = real(solution, scenario, checks)
        bad = EstimateReport("injected", [EstimateRow("injected.row", "lhs <= rhs", 2.0, 1.0, "fail", True, 2.0)])
        return ledger, reports + [bad]

    monkeypatch.setattr(cli, "run_checks", with_failure)
    out = tmp_path / "o"
    assert main(["run", str(CONFIGS / "zero.yaml"), "--output", str(out)]) == 4
    assert "FAIL injected.row" in capsys.readouterr().out
    doc = json.loads((out / "diagnostics.json").read_text())
    assert doc["all_asserted_pass"] is False and doc["metadata"]["status"] == "check-failure"


def test_thread_counts_give_identical_diagnostics(tmp_path):
    digests = set()
    for n in (1, 2, 4):
        out = tmp_path / f"t{n}"
        assert main(["run", str(CONFIGS / "robin.yaml"), "--output", str(out), "--threads", str(n), "--seed", "3"]) == 0
        digests.add(digest(out / "diagnostics.json"))
    assert len(digests) == 1


def test_unknown_suite_rejected():
    with pytest.raises(SystemExit):
        main(["suite", "nope"])
