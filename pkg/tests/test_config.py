# -*- coding: utf-8 -*-
import copy
import json

import numpy as np
import pytest

from scenario_runner.config import (
    ConfigError,
    apply_overrides,
    canonical_json,
    load_config,
    parse_config,
)

BASE = {
    "name": "unit",
    "model": {
        "sample_sites": ["s1", "s2"],
        "h_S": [[0.0, [0.0, 1.0]], [[0.0, -1.0], 0.0]],
        "w": [[0.0, 1.0], [1.0, 0.0]],
        "xi": 0.5,
        "leads": [
            {"h": [[0.0]], "psi": [1.0], "phi": [1.0, 0.0], "d": 0.7, "beta": 1.0, "mu": 0.4},
            {"name": "right", "h": [[0.0]], "psi": [1.0], "phi": [0.0, 1.0], "d": 0.7, "beta": 2.0, "mu": -0.4},
        ],
    },
    "grid": {"T": 1.0, "dt": 0.05},
    "run": {"pipeline": "currents", "probes": [0]},
}


def _cfg(**patch):
    data = copy.deepcopy(BASE)
    for path, value in patch.items():
        node = data
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return data


def test_parse_and_convert():
    cfg = parse_config(_cfg())
    spec = cfg.to_model_spec()
    assert spec.n_modes == 4
    assert spec.h_S[0, 1] == 1j
    assert spec.h_S[1, 0] == -1j
    assert [lead.name for lead in spec.leads] == ["L1", "right"]
    assert cfg.to_grid().n_points == 21
    assert cfg.run.energies == [0.0]
    assert cfg.run.etas == [0.0, 0.5, 2.0]
    assert cfg.sample_varrho() is None


def test_zero_diagonal_violation_is_a_config_error():
    with pytest.raises(ConfigError) as exc:
        parse_config(_cfg(model__w=[[0.5, 1.0], [1.0, 0.0]]))
    assert exc.value.field == "model.w"
    assert "zero diagonal" in str(exc.value)


def test_semantic_model_errors_carry_the_field():
    data = _cfg()
    data["model"]["leads"][0]["psi"] = [2.0]
    cfg = parse_config(data)
    with pytest.raises(ConfigError) as exc:
        cfg.to_model_spec()
    assert exc.value.field == "model.leads[0].psi"


@pytest.mark.parametrize(
    "patch, fragment",
    [
        ({"grid__dt": 0.3}, "integer"),
        ({"run__probes": [2]}, "probe lead 2"),
        ({"run__etas": [-1.0]}, "eta"),
        ({"run__pipeline": "everything"}, "pipeline"),
        ({"model__h_S": [[0.0]]}, "h_S"),
    ],
)
def test_invalid_blocks(patch, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(_cfg(**patch))


def test_unknown_keys_are_rejected():
    data = _cfg()
    data["run"]["speed"] = "fast"
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert exc.value.field == "run.speed"


def test_overrides_revalidate():
    cfg = parse_config(_cfg())
    fine = apply_overrides(cfg, dt=0.025, xi=0.0, seed=3, pipeline="identity-audit")
    assert fine.grid.dt == 0.025
    assert fine.model.xi == 0.0
    assert fine.run.seed == 3
    assert fine.run.pipeline == "identity-audit"
    assert cfg.grid.dt == 0.05
    with pytest.raises(ConfigError):
        apply_overrides(cfg, dt=0.3)


def test_canonical_json_is_stable():
    a = canonical_json(parse_config(_cfg()))
    b = canonical_json(parse_config(json.loads(json.dumps(_cfg()))))
    assert a == b
    assert canonical_json(apply_overrides(parse_config(_cfg()), xi=0.1)) != a


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "missing.json")
    assert exc.value.field == "<file>"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert exc.value.field == "<json>"


def test_bundled_scenarios_load(scenario_dir):
    for path in sorted(scenario_dir.glob("*.json")):
        cfg, text = load_config(path)
        spec = cfg.to_model_spec()
        assert spec.n_modes == 8
        assert json.loads(text)["name"] == cfg.name
        assert np.allclose(spec.w, [[0.0, 1.0], [1.0, 0.0]])
