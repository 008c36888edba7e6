# -*- coding: utf-8 -*-
import copy
import json

import pandas as pd
import pytest

from scenario_runner.export import CURRENTS_CSV, KERNEL_DIR, REPORT_CSV, REPORT_JSON, load_bundle
from negf_core.errors import GridError
from scenario_runner.run_batch import EXIT_CONFIG, EXIT_FOCK_CAP, EXIT_NUMERICAL, EXIT_OK, EXIT_RESIDUAL, main

SMALL = {
    "name": "cli-small",
    "model": {
        "sample_sites": ["s1", "s2"],
        "h_S": [[0.0, 1.0], [1.0, 0.0]],
        "w": [[0.0, 1.0], [1.0, 0.0]],
        "xi": 0.5,
        "leads": [
            {"name": "L1", "h": [[0.0]], "psi": [1.0], "phi": [1.0, 0.0], "d": 0.7, "beta": 1.0, "mu": 0.4},
            {"name": "L2", "h": [[0.0]], "psi": [1.0], "phi": [0.0, 1.0], "d": 0.7, "beta": 2.0, "mu": -0.4},
        ],
    },
    "grid": {"T": 1.0, "dt": 0.025},
    "run": {"pipeline": "currents", "probes": [0, 1], "seed": 11},
}


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    monkeypatch.delenv("NEGF_FOCK_CAP", raising=False)
    monkeypatch.setenv("NEGF_OUT_DIR", str(tmp_path / "default_out"))
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_currents_run_writes_report_and_traces(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK

    bundle = load_bundle(out)
    report = bundle["report"]
    assert {"lesser-form-current[0]", "jmw-vs-direct[1]", "conservation", "density-two-routes"} <= set(report["name"])
    assert report["passed"].all()
    assert (report["dt"] == 0.025).all()

    currents = bundle["currents"]
    assert list(currents.columns) == ["t", "I", "method", "lead"]
    assert set(currents["method"]) == {"direct", "jmw"}
    assert sorted(bundle["kernels"]) == ["G_lesser", "G_retarded"]

    side = bundle["sidecar"]
    assert side["scenario"] == "cli-small"
    assert side["pipeline"] == "currents"
    assert len(side["config_hash"]) == 64
    assert side["passed"] is True

    kernel = pd.read_csv(out / KERNEL_DIR / "G_lesser.csv")
    assert list(kernel.columns) == ["k", "kp", "t", "tp", "row", "col", "re", "im"]
    assert len(kernel) == 41 * 41 * 4


def test_outputs_are_byte_identical_across_runs(tmp_path):
    cfg = _write(tmp_path, SMALL)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    for name in (REPORT_CSV, CURRENTS_CSV, f"{KERNEL_DIR}/G_retarded.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    hashes = [json.loads((o / REPORT_JSON).read_text(encoding="utf-8"))["config_hash"] for o in outs]
    assert hashes[0] == hashes[1]


def test_empty_probes_write_only_the_report(tmp_path):
    data = copy.deepcopy(SMALL)
    data["run"]["probes"] = []
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, data)), "--out", str(out), "--quiet"]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == sorted([REPORT_CSV, REPORT_JSON])


def test_zero_diagonal_violation_exits_2(tmp_path, capsys):
    data = copy.deepcopy(SMALL)
    data["model"]["w"] = [[1.0, 1.0], [1.0, 0.0]]
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, data)), "--out", str(out), "--quiet"]) == EXIT_CONFIG
    assert "model.w" in capsys.readouterr().err
    assert not out.exists()


def test_fock_cap_exits_3(tmp_path, monkeypatch):
    monkeypatch.setenv("NEGF_FOCK_CAP", "3")
    assert main(["run", str(_write(tmp_path, SMALL)), "--quiet"]) == EXIT_FOCK_CAP


def test_grid_failure_during_the_run_exits_4(tmp_path, monkeypatch, capsys):
    def off_grid(*args, **kwargs):
        raise GridError("[transport] t = 9 beyond grid horizon 1")

    monkeypatch.setattr("scenario_runner.main_controller.direct_current", off_grid)
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, SMALL)), "--out", str(out), "--quiet"]) == EXIT_NUMERICAL
    assert "beyond grid horizon" in capsys.readouterr().err
    assert not out.exists()


def test_bad_grid_in_config_exits_2(tmp_path):
    data = copy.deepcopy(SMALL)
    data["grid"]["dt"] = 0.3
    assert main(["run", str(_write(tmp_path, data)), "--quiet"]) == EXIT_CONFIG


def test_failed_residual_exits_1(tmp_path):
    data = copy.deepcopy(SMALL)
    data["run"]["tolerances"] = {"jmw-vs-direct": 1e-30}
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, data)), "--out", str(out), "--quiet"]) == EXIT_RESIDUAL
    report = load_bundle(out)["report"]
    failed = report.loc[~report["passed"], "name"].tolist()
    assert failed == ["jmw-vs-direct[0]", "jmw-vs-direct[1]"]


def test_cli_overrides_and_default_out_dir(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["run", str(cfg), "--dt", "0.05", "--xi", "0", "--quiet"]) == EXIT_OK
    report = load_bundle(tmp_path / "default_out")["report"]
    assert (report["dt"] == 0.05).all()
    assert "one-body-current[0]" in set(report["name"])


def test_unknown_pipeline_is_an_argparse_error(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", str(_write(tmp_path, SMALL)), "--pipeline", "everything"])
