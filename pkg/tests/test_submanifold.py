import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacelike_mcf.ambient import FlatFactor, FlatPseudoEuclidean, ProductMetric, RoundSphere
from spacelike_mcf.indefinite import frame_norm_bounds
from spacelike_mcf.initial_data import affine_graph, boosted_plane, sine_graph
from spacelike_mcf.submanifold import (
    GridSpec,
    ImmersedPatch,
    NotSpacelikeError,
    adapted_frame,
    check_laplacian_identity,
    check_slice_identity,
    d1,
    d2,
    derive,
    laplace_beltrami,
)


def profile_graph(N, amp):
    """Graph u = amp * sin(x^1) over the flat torus in R^{2,1}."""
    grid = GridSpec.torus(N)
    x = grid.coords()
    f = np.concatenate([x, amp * np.sin(x[..., :1])], axis=-1)
    shift = np.zeros((2, 3))
    shift[0, 0] = shift[1, 1] = 2 * np.pi
    return ImmersedPatch(grid, f, FlatPseudoEuclidean(2, 1), shift), x


@pytest.mark.parametrize("periodic", [True, False])
def test_difference_operators_second_order(periodic):
    errs1, errs2 = [], []
    for N in (32, 64):
        h = 2 * np.pi / N if periodic else 2.0 / (N - 1)
        x = np.arange(N) * h
        errs1.append(np.abs(d1(np.sin(x), 0, h, periodic) - np.cos(x)).max())
        errs2.append(np.abs(d2(np.sin(x), 0, h, periodic) + np.sin(x)).max())
    assert math.log2(errs1[0] / errs1[1]) > 1.8
    assert math.log2(errs2[0] / errs2[1]) > 1.8


def test_laplace_beltrami_on_sphere_band():
    # Delta cos(theta) = -2 cos(theta) on the unit sphere
    errs = []
    for N in (32, 64):
        grid = GridSpec((N, N), (2.0 / (N - 1), 2 * np.pi / N), (0.6, 0.0), (False, True))
        th = grid.coords()[..., 0]
        ginv = np.zeros(grid.shape + (2, 2))
        ginv[..., 0, 0] = 1.0
        ginv[..., 1, 1] = 1 / np.sin(th) ** 2
        lap = laplace_beltrami(np.cos(th), np.sin(th), ginv, grid)
        errs.append(np.abs(lap + 2 * np.cos(th))[grid.interior_mask()].max())
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5


def test_affine_induced_metric_and_tilt():
    geom = derive(affine_graph(FlatPseudoEuclidean(2, 1), 16, [[0.6, 0.0]]))
    assert np.allclose(geom.g[..., 0, 0], 0.64) and np.allclose(geom.g[..., 1, 1], 1.0)
    assert np.allclose(geom.v, 1.25, atol=1e-12)
    assert np.abs(geom.H).max() < 1e-12 and np.abs(geom.A2).max() < 1e-12


def test_timelike_graph_rejected():
    with pytest.raises(NotSpacelikeError):
        derive(affine_graph(FlatPseudoEuclidean(2, 1), 16, [[1.2, 0.0]]))


def test_profile_graph_curvature_against_closed_form():
    # a 1-D profile graph has |H|^2_+ = u''^2 / (1 - u'^2)^3
    amp = 0.3
    errs = []
    for N in (32, 64):
        patch, x = profile_graph(N, amp)
        geom = derive(patch)
        s = x[..., 0]
        exact = (amp * np.sin(s)) ** 2 / (1 - (amp * np.cos(s)) ** 2) ** 3
        errs.append(np.abs(geom.H2 - exact).max())
        # the normal time component pulls the height toward the heat-equation direction u''
        assert np.all(geom.H_vec[..., 2] * (-np.sin(s)) >= -1e-12)
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5


def test_positive_norms_nonnegative():
    geom = derive(sine_graph(FlatPseudoEuclidean(2, 2), 16, eps=0.2, tilt=0.2))
    assert geom.H2.min() >= 0 and geom.A2.min() >= 0
    # trace inequality |H|^2 <= n |A|^2
    assert np.all(geom.H2 <= 2 * geom.A2 + 1e-12)


@given(st.floats(0.0, 1.2), st.floats(-1.0, 1.0))
def test_boosted_plane_is_flat(a, b):
    geom = derive(boosted_plane(2, 1, 8, [a]))
    assert np.abs(geom.H2).max() < 1e-10
    assert np.allclose(geom.v, math.cosh(a), rtol=1e-10)


@given(st.floats(-0.9, 0.9), st.floats(-0.4, 0.4))
def test_tilt_at_least_one(slope, eps):
    geom = derive(sine_graph(FlatPseudoEuclidean(2, 1), 12, eps=eps * (1 - abs(slope)) / 2, tilt=slope))
    assert geom.v.min() >= 1.0 - 1e-12


def test_adapted_frame_properties():
    patch = sine_graph(ProductMetric(RoundSphere(1.0), FlatFactor(1)), 16, eps=0.1)
    geom = derive(patch)
    fp = adapted_frame(patch, (5, 3), geom)
    assert fp.orthonormality_defect() < 1e-10
    assert frame_norm_bounds(fp).bounds_hold


def test_second_fundamental_form_symmetry_converges():
    defects = [derive(sine_graph(FlatPseudoEuclidean(2, 1), N, eps=0.2)).symmetry_defect() for N in (16, 32)]
    assert defects[1] < defects[0] / 3


def test_slice_identity_exact_for_linear_time():
    patch = sine_graph(FlatPseudoEuclidean(2, 1), 16, eps=0.3, tilt=0.3)
    assert check_slice_identity(patch) < 1e-12


def test_identities_converge_with_warped_time():
    amb = FlatPseudoEuclidean(2, 1, time_warp=0.3)
    r5, r6 = [], []
    for N in (16, 32):
        p = sine_graph(amb, N, eps=0.05, tilt=0.3)
        g = derive(p)
        r5.append(check_slice_identity(p, g))
        r6.append(check_laplacian_identity(p, g))
    assert r5[0] / r5[1] > 3.2 and r6[0] / r6[1] > 3.2


def test_codim_two_laplacian_identity_converges():
    amb = FlatPseudoEuclidean(2, 2)
    r = [check_laplacian_identity(sine_graph(amb, N, eps=0.1, tilt=0.1)) for N in (16, 32)]
    assert r[0] / r[1] > 3.2
