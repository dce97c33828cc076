import math

import numpy as np

from spacelike_mcf.ambient import FlatPseudoEuclidean
from spacelike_mcf.flow import FlowConfig, MONITOR_COLUMNS, run
from spacelike_mcf.initial_data import sine_graph
from spacelike_mcf.io import (
    export_series,
    format_value,
    read_matrix_csv,
    read_profile_csv,
    read_snapshot_header,
    write_manifest,
    write_matrix_csv,
    write_profile_csv,
)

FLAT = FlatPseudoEuclidean(2, 1)


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(math.nan) == "nan"
    assert format_value(math.inf, "K_min") == "unbounded"
    assert format_value(math.inf) == "inf"
    assert format_value(np.int64(3)) == "3"
    assert format_value(True) == "true"


def test_matrix_round_trip(tmp_path, rng):
    M = rng.standard_normal((3, 3))
    p = write_matrix_csv(tmp_path / "m.csv", M, (2, 1))
    M2, sig = read_matrix_csv(p)
    assert np.array_equal(M, M2) and sig == (2, 1)


def test_profile_round_trip(tmp_path):
    R = np.linspace(0.5, 2, 7)
    p = write_profile_csv(tmp_path / "p.csv", R, R**2)
    R2, H2 = read_profile_csv(p)
    assert np.array_equal(R, R2) and np.array_equal(R**2, H2)


def test_export_series_rows_and_snapshots(tmp_path):
    traj = run(FlowConfig(max_steps=100, snapshot_every=10), sine_graph(FLAT, 12, eps=0.1))
    files = export_series(traj, tmp_path / "mon.csv")
    lines = (tmp_path / "mon.csv").read_text().splitlines()
    assert lines[0] == ",".join(MONITOR_COLUMNS)
    assert len(lines) == 101
    snaps = sorted(tmp_path.glob("snapshot_*.csv"))
    assert len(snaps) == 11 and len(files) == 12
    head = read_snapshot_header(snaps[-1])
    assert head["grid_shape"] == "12x12" and head["step"] == "100"


def test_one_step_and_header_only(tmp_path):
    traj = run(FlowConfig(max_steps=1), sine_graph(FLAT, 12, eps=0.1))
    export_series(traj, tmp_path / "a.csv", snapshots=False)
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 2
    traj = run(FlowConfig(max_steps=3, monitors=()), sine_graph(FLAT, 12, eps=0.1))
    export_series(traj, tmp_path / "b.csv", snapshots=False)
    assert (tmp_path / "b.csv").read_text().splitlines() == [",".join(MONITOR_COLUMNS)]


def test_manifest(tmp_path):
    import json
    p = write_manifest(tmp_path / "manifest.json", {"a": np.float64(1.5)}, [tmp_path / "x.csv"], {"wall": 0.1})
    doc = json.loads(p.read_text())
    assert doc["config"] == {"a": 1.5} and doc["outputs"] == ["x.csv"]
    assert {"package", "numpy", "kernel_backend"} <= set(doc["versions"])
