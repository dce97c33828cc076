import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacelike_mcf.ambient import (
    DomainError,
    FlatFactor,
    FlatPseudoEuclidean,
    NeutralTangentBundle,
    ProductMetric,
    RoundSphere,
    make_ambient,
    tcc_estimate,
)

angles = st.floats(0.3, math.pi - 0.3)
phis = st.floats(0.0, 2 * math.pi)


def sphere_flat(r=1.0):
    return ProductMetric(RoundSphere(r), FlatFactor(1))


def test_flat_metric_and_frame():
    sp = FlatPseudoEuclidean(2, 2)
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(sp.metric(x), np.diag([1.0, 1.0, -1.0, -1.0]))
    fr = sp.multitime_frame(x)
    assert np.allclose(fr.psi, 1.0)
    # heights increase along T
    assert np.allclose(fr.T, [[0, 0, 1, 0], [0, 0, 0, 1]])
    assert np.allclose(sp.riemann(x), 0.0)


@given(st.floats(-0.8, 0.8), st.floats(-3, 3))
def test_warped_time_lapse(w, x1):
    sp = FlatPseudoEuclidean(2, 1, time_warp=w)
    fr = sp.multitime_frame(np.array([x1, 0.0, 0.0]))
    assert fr.psi[0] == pytest.approx(1 / math.sqrt(1 - (w * math.cos(x1)) ** 2))
    assert fr.T[0] @ sp.metric(np.zeros(3)) @ fr.T[0] == pytest.approx(-1.0)


def test_time_warp_needs_single_time():
    with pytest.raises(ValueError):
        FlatPseudoEuclidean(2, 2, time_warp=0.2)


def test_neutral_bundle_frame():
    sp = NeutralTangentBundle(3)
    x = np.arange(6.0)
    E = sp.orthonormal_frame(x)
    eta = np.diag([1.0] * 3 + [-1.0] * 3)
    assert np.allclose(E @ sp.metric(x) @ E.T, eta)
    assert np.allclose(sp.multitime_frame(x).psi, 1.0)


@given(angles, phis)
def test_sphere_christoffels_closed_form(th, ph):
    sp = sphere_flat()
    G = sp.christoffel(np.array([th, ph, 0.0]))
    assert G[0, 1, 1] == pytest.approx(-math.sin(th) * math.cos(th))
    assert G[1, 0, 1] == pytest.approx(math.cos(th) / math.sin(th))
    assert G[1, 1, 0] == pytest.approx(math.cos(th) / math.sin(th))
    assert abs(G[2]).max() == 0.0


@given(angles, angles)
def test_product_sphere_curvature(th1, th2):
    r1, r2 = 1.0, math.sqrt(2.0)
    sp = ProductMetric(RoundSphere(r1), RoundSphere(r2))
    Rm = sp.riemann(np.array([th1, 0.4, th2, 1.1]))
    assert Rm[0, 1, 0, 1] == pytest.approx(r1**2 * math.sin(th1) ** 2)
    assert Rm[2, 3, 2, 3] == pytest.approx(-(r2**2) * math.sin(th2) ** 2)
    assert abs(Rm[0, 2, 0, 2]) < 1e-12
    # algebraic symmetries
    assert np.allclose(Rm, -np.swapaxes(Rm, 0, 1))
    assert np.allclose(Rm, np.transpose(Rm, (2, 3, 0, 1)))


def test_analytic_curvature_matches_differences():
    sp = ProductMetric(RoundSphere(1.3), RoundSphere(0.8))
    x = np.array([1.0, 0.3, 2.0, 5.0])
    assert np.allclose(sp.christoffel_fd(x), sp.christoffel(x), atol=1e-7)
    assert np.allclose(sp.riemann_fd(x), sp.riemann(x), atol=1e-6)


def test_time_hessian_on_sphere_times_sphere():
    sp = ProductMetric(RoundSphere(1.0), RoundSphere(1.0))
    x = np.array([1.0, 0.0, 1.2, 0.0])
    H = sp.time_hessian(x)
    # t = theta_2 has Hessian -Gamma^theta_phiphi on the second factor
    assert H[0, 3, 3] == pytest.approx(math.sin(1.2) * math.cos(1.2))


def test_pole_is_rejected():
    sp = sphere_flat()
    with pytest.raises(DomainError):
        sp.metric(np.array([0.0, 0.0, 0.0]))


def test_make_ambient_catalog():
    assert make_ambient("flat", n=3, m=2).sig.dim == 5
    assert make_ambient("neutral").sig.n == 3
    sp = make_ambient("product", factor1={"kind": "sphere", "radius": 2.0}, factor2={"kind": "flat", "dim": 1})
    assert sp.sig.n == 2 and sp.sig.m == 1
    with pytest.raises(ValueError):
        make_ambient("hyperbolic")


def test_tcc_flat_is_zero():
    for sp in (FlatPseudoEuclidean(2, 1), NeutralTangentBundle(3)):
        est = tcc_estimate(sp, ([-1.0] * sp.dim, [1.0] * sp.dim), 500, seed=2)
        assert est.k_est == 0.0 and math.copysign(1.0, est.k_est) == 1.0
        assert est.n_samples == 500


def test_tcc_is_reproducible_and_bounded():
    sp = ProductMetric(RoundSphere(1.0), RoundSphere(math.sqrt(2.0)))
    region = ([0.3, 0.0, 0.3, 0.0], [math.pi - 0.3, 2 * math.pi, math.pi - 0.3, 2 * math.pi])
    a = tcc_estimate(sp, region, 3000, seed=5)
    b = tcc_estimate(sp, region, 3000, seed=5)
    assert a.k_est == b.k_est
    assert a.ratio_min <= a.k_est
    assert a.k_est > 0


def test_tcc_rejects_bad_region():
    with pytest.raises(ValueError):
        tcc_estimate(FlatPseudoEuclidean(2, 1), ([0, 0], [1, 1]), 10)
