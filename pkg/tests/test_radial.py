import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacelike_mcf.radial import (
    RadialHalted,
    RadialProfile,
    analytic_closed_form,
    closed_form_mean_curvature,
    cross_check_against_generic,
    make_profile,
    radial_cfl_dt,
    radial_flow_step,
    radial_rhs,
    radial_run,
    shell_patch,
    signature_classify,
)
from spacelike_mcf.submanifold import derive

# rows H < 0, H = 0, H > 0; columns H' < 0, H' = 0, H' > 0
TABLE = [["-3", "(0,2)", "(1,2)"], ["(0,1)", "0", "(1,0)"], ["(2,1)", "(2,0)", "+3"]]


@pytest.mark.parametrize("i,H", list(enumerate((-2.0, 0.0, 0.5))))
@pytest.mark.parametrize("j,Hp", list(enumerate((-0.1, 0.0, 3.0))))
def test_signature_table(i, H, j, Hp):
    assert signature_classify(H, Hp).label == TABLE[i][j]


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_signature_counts_match_induced_metric(H, Hp):
    c = signature_classify(H, Hp)
    diag = np.array([2 * Hp, 2 * H, 2 * H])
    assert c.positive == int(np.sum(diag > 0)) and c.negative == int(np.sum(diag < 0))
    assert c.spacelike == (H > 0 and Hp > 0)


def test_closed_form_value_at_unit_radius():
    cf = analytic_closed_form([1.0], [2.0], [4.0], [6.0])
    assert cf.numerator[0] == pytest.approx(28.0)
    assert cf.factor[0] == pytest.approx(-28 / 128)
    assert cf.printed_factor[0] == pytest.approx(-28 / 128 * math.sqrt(2))


def test_closed_form_velocity_drives_scalar_flow():
    # moving (R, H) along factor * (1, -H') changes the graph height at rate -2 H' factor
    prof = make_profile("cubic", c=1.0, h=1 / 32)
    cf = closed_form_mean_curvature(prof)
    assert np.allclose(-2 * cf.Hprime * cf.factor, radial_rhs(prof)[1:-1], rtol=1e-12)


def test_degenerate_nodes_flagged():
    cf = analytic_closed_form([1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0])
    assert cf.degenerate.tolist() == [True, True]
    assert np.all(np.isnan(cf.factor))


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
def test_linear_profile_is_fixed_point(a):
    prof = make_profile("linear", a=a, h=1 / 32)
    run = radial_run(prof, 100)
    assert np.abs(run.final.H - prof.H).max() <= 1e-10
    assert np.all(run.series("sup_dev") <= 1e-10)


def test_bump_relaxes_toward_line():
    run = radial_run(make_profile("bump", amp=0.1, h=1 / 16), 400)
    dev = run.series("sup_dev")
    assert np.all(np.diff(dev) <= 1e-14) and dev[-1] < dev[0]
    assert np.all(run.series("min_Hprime") > 0)


def test_cfl_violation_is_rejected_and_halved():
    prof = make_profile("bump", amp=0.1, h=1 / 16)
    bound = radial_cfl_dt(prof)
    new, used, retries = radial_flow_step(prof, 4.5 * bound)
    assert retries == 3 and used == pytest.approx(4.5 * bound / 8)


def test_outside_window_halts():
    prof = RadialProfile(np.linspace(0.5, 2, 9), -np.linspace(0.5, 2, 9))
    with pytest.raises(RadialHalted):
        radial_flow_step(prof, 1e-4)


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0, 1, 2, 3, 4]), np.ones(5))
    with pytest.raises(ValueError):
        RadialProfile(np.array([1.0, 2, 4, 5, 6]), np.ones(5))
    with pytest.raises(ValueError):
        make_profile("quartic")


def test_shell_patch_metric():
    prof = make_profile("cubic", c=1.0, h=1 / 16)
    patch = shell_patch(prof)
    geom = derive(patch)
    R = np.broadcast_to(prof.R[:, None, None], patch.grid.shape)
    H, Hp = R + R**3, 1 + 3 * R**2
    th = patch.grid.coords()[..., 1]
    # 2 H' dR^2 + 2 R H dOmega^2 up to the O(h^2) difference error
    m = geom.mask
    assert np.allclose(geom.g[..., 0, 0][m], (2 * Hp)[m], rtol=5e-3)
    assert np.allclose(geom.g[..., 1, 1][m], (2 * R * H)[m], rtol=5e-3)
    assert np.allclose(geom.g[..., 2, 2][m], (2 * R * H * np.sin(th) ** 2)[m], rtol=5e-3)
    assert np.abs(geom.g[..., 0, 1][m]).max() < 1e-10


def test_shell_patch_keeps_away_from_poles():
    with pytest.raises(ValueError):
        shell_patch(make_profile("linear", h=1 / 16), theta_c=0.25)


def test_cross_check_linear_is_zero():
    rep = cross_check_against_generic(make_profile("linear", a=1.3, h=1 / 16))
    assert rep.abs_dev <= 1e-9 and rep.max_closed <= 1e-9


def test_cross_check_cubic():
    reps = [cross_check_against_generic(make_profile("cubic", c=1.0, h=h)) for h in (1 / 16, 1 / 32)]
    assert reps[1].rel_dev < 0.02
    assert math.log2(reps[0].rel_dev / reps[1].rel_dev) > 1.5
    assert reps[1].orthogonality < 1e-10
    assert reps[1].parallel_defect < 1e-6
    # the printed normalization is larger by sqrt 2
    assert reps[1].ratio_generic_to_printed == pytest.approx(1 / math.sqrt(2), rel=5e-3)
    assert reps[1].rel_dev_printed > 0.25
