import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacelike_mcf.ambient import FlatFactor, FlatPseudoEuclidean, ProductMetric, RoundSphere
from spacelike_mcf.flow import (
    FlowConfig,
    FlowHalted,
    FlowState,
    calibrate_area_sign,
    cfl_dt,
    gradient_estimate_K,
    monitor_bound_shape,
    run,
    step,
)
from spacelike_mcf.initial_data import affine_graph, make_initial, sine_graph
from spacelike_mcf.submanifold import derive

FLAT = FlatPseudoEuclidean(2, 1)


def test_small_data_follows_heat_equation():
    # linearized flow of u = eps sin x sin y decays like exp(-2 s)
    eps = 1e-3
    patch = sine_graph(FLAT, 32, eps=eps)
    traj = run(FlowConfig(max_steps=200), patch)
    s = traj.final.s
    x = patch.grid.coords()
    oracle = eps * math.exp(-2 * s) * np.sin(x[..., 0]) * np.sin(x[..., 1])
    err = np.abs(traj.final.geom.u[..., 0] - oracle).max() / np.abs(oracle).max()
    assert s > 0.5
    assert err < 0.05
    sup_v = traj.series("sup_v")
    assert np.all(np.diff(sup_v[5:]) <= 1e-15)


def test_stationary_plane_does_not_move():
    patch = make_initial(FLAT, "flat", 16)
    traj = run(FlowConfig(max_steps=20), patch)
    assert np.array_equal(traj.final.patch.f, patch.f)
    assert np.all(traj.series("K_min") == 0.0)
    assert np.all(traj.series("sup_H2") == 0.0)


def test_affine_plane_is_stationary():
    patch = affine_graph(FLAT, 16, [[0.5, 0.2]])
    traj = run(FlowConfig(max_steps=10), patch)
    assert np.abs(traj.final.patch.f - patch.f).max() < 1e-12


def test_snapshot_cadence():
    traj = run(FlowConfig(max_steps=100, snapshot_every=10), sine_graph(FLAT, 12, eps=0.1))
    assert len(traj.snapshots) == 11
    assert traj.snapshots[0][:2] == (0, 0.0)
    assert [k for k, _, _ in traj.snapshots] == list(range(0, 101, 10))


def test_one_step_gives_one_row():
    traj = run(FlowConfig(max_steps=1), sine_graph(FLAT, 12, eps=0.1))
    assert len(traj.rows) == 1
    assert traj.rows[0]["step"] == 1


def test_s_end_is_hit_exactly():
    traj = run(FlowConfig(max_steps=10_000, s_end=0.05), sine_graph(FLAT, 12, eps=0.1))
    assert traj.final.s == pytest.approx(0.05, rel=1e-12)


def test_fixed_dt_clamped_to_cfl():
    patch = sine_graph(FLAT, 16, eps=0.3)
    dt_cfl = cfl_dt(FlowState(patch, derive(patch)), 0.2)
    traj = run(FlowConfig(dt=10.0, max_steps=1), patch)
    assert traj.rows[0]["dt"] == pytest.approx(dt_cfl)


def test_rk2_agrees_with_euler():
    patch = sine_graph(FLAT, 16, eps=0.2)
    cfg = dict(dt=1e-3, max_steps=50)
    a = run(FlowConfig(integrator="euler", **cfg), patch).final.patch.f
    b = run(FlowConfig(integrator="rk2", **cfg), patch).final.patch.f
    assert np.abs(a - b).max() < 1e-4


def test_curvature_decays_and_stays_nonnegative():
    traj = run(FlowConfig(max_steps=100), sine_graph(FLAT, 16, eps=0.3, tilt=0.3))
    assert min(traj.min_H2) >= 0 and min(traj.min_A2) >= 0
    assert traj.sup_H2[-1] < traj.sup_H2[0]
    assert traj.area_sign_violations == 0


def test_area_sign_calibration():
    assert calibrate_area_sign(sine_graph(FLAT, 16, eps=0.3)) == -1.0


def test_area_grows_under_the_flow():
    traj = run(FlowConfig(max_steps=30), sine_graph(FLAT, 16, eps=0.3))
    area = traj.series("area")
    assert np.all(np.diff(area) > 0)


def test_product_ambient_run():
    amb = ProductMetric(RoundSphere(1.0), FlatFactor(1))
    traj = run(FlowConfig(max_steps=20, monitors=("uflow", "area", "gradient")), sine_graph(amb, 16, eps=0.1))
    assert np.all(np.isnan(traj.series("res_H2")))
    assert np.all(np.isfinite(traj.series("res_uflow")))
    assert np.all(np.isfinite(traj.series("K_min")))


def test_halt_when_spacelikeness_cannot_be_kept():
    patch = sine_graph(FLAT, 12, eps=0.1)
    with pytest.raises(FlowHalted):
        step(FlowState(patch, derive(patch)), 1e6, max_retries=0)


def test_halt_carries_trajectory(monkeypatch):
    import spacelike_mcf.flow as flow_mod

    calls = {"n": 0}
    real = flow_mod.step

    def flaky(state, dt, integrator="euler", max_retries=10):
        calls["n"] += 1
        if calls["n"] > 3:
            raise FlowHalted("forced")
        return real(state, dt, integrator, max_retries)

    monkeypatch.setattr(flow_mod, "step", flaky)
    with pytest.raises(FlowHalted) as info:
        run(FlowConfig(max_steps=10), sine_graph(FLAT, 12, eps=0.1))
    traj = info.value.trajectory
    assert len(traj.rows) == 3 and traj.halted == "forced"
    assert traj.snapshots[-1][0] == 3


@given(st.floats(1.0, 5.0), st.floats(0.0, 2.0))
def test_gradient_estimate_minimal(v_max, gap):
    v = np.array([1.0, v_max])
    u = np.array([0.0, -gap])
    grid = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 60)])
    K = gradient_estimate_K(v, u, 1.0, 0.0, 1, grid)
    bound = lambda k: (1 + 1.0) * np.exp(k * (0.0 - u))
    if math.isfinite(K):
        assert np.all(v <= bound(K) * (1 + 1e-12))
        smaller = grid[grid < K]
        if smaller.size:
            assert np.any(v > bound(smaller[-1]))
    else:
        assert gap == 0.0 or np.any(v > bound(grid[-1]))


def test_bound_shape_fit():
    traj = run(FlowConfig(max_steps=40, snapshot_every=10), sine_graph(FLAT, 12, eps=0.2))
    rep = monitor_bound_shape(traj)
    assert set(rep) == {"H2", "A2"}
    assert rep["H2"]["C"] > 0


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(integrator="rk4")
    with pytest.raises(ValueError):
        FlowConfig(monitors=("bogus",))
    with pytest.raises(ValueError):
        FlowConfig(area_sign=0.5)
