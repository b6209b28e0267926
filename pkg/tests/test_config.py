import copy
from pathlib import Path

import pytest
import yaml

from radcond.config import ConfigError, dump_config, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "name": "t",
    "scenario": {
        "dim": 2,
        "extents": [1.0, 1.0],
        "cells": [4, 4],
        "time": {"horizon": 0.1, "steps": 2},
        "theta": 1.0,
        "boundary": {"a": 1.0, "b": 1.0, "g": "0.1 + 0.1*x1"},
        "inflow": "0.2*(1.5 + b1)",
        "T0": "0.5",
    },
}


def with_(path, value):
    doc = copy.deepcopy(BASE)
    node = doc
    for key in path[:-1]:
        node = node[key]
    if value is None:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return doc


def test_base_parses_with_defaults():
    run = parse_config(BASE)
    assert run.order == 8 and run.picard.tol == 1e-8 and run.checks["tol_est"] == 0.05
    assert run.boundary_spec().family == "robin"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load_and_round_trip(path, tmp_path):
    run = load_config(path)
    dump_config(run, tmp_path / "n.yaml")
    again = load_config(tmp_path / "n.yaml")
    assert again == run
    assert again.normalized() == run.normalized()


@pytest.mark.parametrize(
    "path, value, fragment",
    [
        (("scenario", "dim"), 4, "dim"),
        (("scenario", "theta"), -1.0, "theta"),
        (("scenario", "cells"), [4], "cells"),
        (("scenario", "unknown"), 1, "unknown"),
        (("scenario", "T0"), None, "T0"),
        (("scenario", "quadrature"), {"order": 5}, "quadrature"),
        (("scenario", "boundary"), {"a": 0.0, "b": 0.0}, r"a \+ b"),
        (("scenario", "boundary", "g"), "x3", "x3"),
        (("scenario", "boundary", "g"), "x1 - 0.5", "non-negative"),
        (("scenario", "inflow"), "b1 - 2", "non-negative"),
        (("scenario", "T0"), "t", "t"),
        (("scenario", "T0"), "-1", "non-negative"),
        (("scenario", "T0"), "cos(", "T0"),
        (("picard",), {"mode": "sideways"}, "picard"),
        (("picard",), {"tol": 0}, "picard"),
    ],
)
def test_rejections(path, value, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(with_(path, value))


def test_dirichlet_incompatibility():
    doc = with_(("scenario", "boundary"), {"a": 0.0, "b": 1.0, "g": 0.2})
    with pytest.raises(ConfigError, match="scenario"):
        parse_config(doc)
    doc["scenario"]["T0"] = 0.2
    assert parse_config(doc).boundary_spec().family == "dirichlet"


def test_invalid_yaml_and_missing_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: [unterminated")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        parse_config(["not", "a", "mapping"])


def test_noise_is_seeded():
    doc = copy.deepcopy(BASE)
    doc["scenario"]["T0_noise"] = 0.1
    doc["seed"] = 7
    run = parse_config(doc)
    a = run.build_scenario().T0
    b = run.build_scenario().T0
    assert (a == b).all() and a.min() >= 0.5 and a.max() <= 0.6
    assert not (a == run.build_scenario(seed=8).T0).all()


def test_canonical_expressions_in_normalized():
    run = parse_config(with_(("scenario", "boundary", "g"), "0.1+(0.1*x1)"))
    assert run.normalized()["scenario"]["boundary"]["g"] == "0.1 + 0.1 * x1"
    text = yaml.safe_dump(run.normalized())
    assert parse_config(yaml.safe_load(text)) == run
