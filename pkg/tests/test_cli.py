import json

import numpy as np
import pytest

from spacelike_mcf.cli import EXIT_CONFIG, EXIT_HALT, EXIT_INVARIANT, main
from spacelike_mcf.indefinite import Signature, random_onm
from spacelike_mcf.io import OUTPUT_ENV, write_matrix_csv


def test_decompose_identity(tmp_path, capsys):
    src = tmp_path / "I.csv"
    src.write_text("1,0,0\n0,1,0\n0,0,1\n")
    assert main(["decompose", "--input", str(src), "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "normal_form.json").read_text())
    assert doc["D1"] == [1.0] and doc["D2"] == [1.0]
    assert "D1" in capsys.readouterr().out
    assert (tmp_path / "o" / "manifest.json").exists()


def test_decompose_infers_signature(tmp_path, rng):
    M = random_onm(Signature(2, 2), rng, max_angle=1.0).matrix
    src = write_matrix_csv(tmp_path / "M.csv", M)
    assert main(["decompose", "--input", str(src), "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "normal_form.json").read_text())
    assert doc["signature"] == [2, 2] and doc["reconstruction_error"] < 1e-10


def test_decompose_rejects_non_group_element(tmp_path):
    src = write_matrix_csv(tmp_path / "M.csv", np.diag([2.0, 1.0]), (1, 1))
    assert main(["decompose", "--input", str(src), "--out", str(tmp_path / "o")]) == EXIT_INVARIANT
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["exit_code"] == EXIT_INVARIANT


def test_radial_linear_stationary(tmp_path):
    out = tmp_path / "r"
    assert main(["radial", "--profile", "linear", "--a", "1.0", "--steps", "100", "--out", str(out)]) == 0
    rows = (out / "radial_monitors.csv").read_text().splitlines()
    assert rows[0] == "step,t,dt,sup_dev,min_H,min_Hprime" and len(rows) == 101
    assert all(float(r.split(",")[3]) <= 1e-10 for r in rows[1:])


def test_flow_heat_regime(tmp_path):
    out = tmp_path / "f"
    code = main(["flow", "--ambient", "flat", "--init", "sine", "--eps", "1e-3", "--steps", "200",
                 "--out", str(out)])
    assert code == 0
    lines = (out / "monitors.csv").read_text().splitlines()
    assert len(lines) == 201
    sup_v = np.array([float(r.split(",")[3]) for r in lines[1:]])
    assert np.all(np.diff(sup_v[10:]) <= 0)
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["sections"]["initial"]["eps"] == 1e-3
    assert "monitors.csv" in man["outputs"] and "wall_seconds" in man["timing"]


def test_flow_with_config_file(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[initial]\nN = 12\neps = 0.1\n[flow]\nmax_steps = 20\nsnapshot_every = 10\n")
    out = tmp_path / "f"
    assert main(["flow", "--config", str(cfg), "--steps", "10", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("snapshot_*.csv")) == ["snapshot_000000.csv", "snapshot_000010.csv"]


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "root"))
    assert main(["radial", "--steps", "5"]) == 0
    assert (tmp_path / "root" / "radial" / "radial_monitors.csv").exists()


def test_tcc_flat(tmp_path):
    out = tmp_path / "t"
    assert main(["tcc", "--ambient", "flat", "--samples", "200", "--out", str(out)]) == 0
    row = (out / "tcc.csv").read_text().splitlines()[1].split(",")
    assert float(row[0]) == 0.0


@pytest.mark.parametrize("argv", [
    ["flow", "--steps", "many"],
    ["flow", "--bogus", "1"],
    ["radial", "--profile", "quartic"],
    ["decompose"],
    ["nonsense"],
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_numerical_halt_exit_3(tmp_path, monkeypatch):
    import spacelike_mcf.flow as flow_mod

    real, calls = flow_mod.step, {"n": 0}

    def failing(state, dt, integrator="euler", max_retries=10):
        calls["n"] += 1
        if calls["n"] > 2:
            raise flow_mod.FlowHalted("spacelikeness lost")
        return real(state, dt, integrator, max_retries)

    monkeypatch.setattr(flow_mod, "step", failing)
    out = tmp_path / "h"
    assert main(["flow", "--N", "12", "--steps", "10", "--out", str(out)]) == EXIT_HALT
    assert len((out / "monitors.csv").read_text().splitlines()) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == EXIT_HALT and man["status"].startswith("halted")


def test_profile_outside_window_is_rejected(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("R,H\n0.5,0.5\n0.6,0.4\n0.7,0.3\n0.8,0.2\n0.9,0.1\n")
    assert main(["radial", "--profile-csv", str(prof), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_check_subset(tmp_path, capsys):
    assert main(["check", "--criteria", "3", "--out", str(tmp_path / "c")]) == 0
    out = capsys.readouterr().out
    assert "criterion  3 [PASS]" in out and "1/1 criteria passed" in out
