import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacelike_mcf.indefinite import (
    FramePair,
    PseudoOrthogonalMatrix,
    Signature,
    canonical_blocks,
    check_onm,
    frame_norm_bounds,
    multi_angle_blocks,
    onm_defect,
    onm_normal_form,
    random_adapted_frame,
    random_onm,
    reconstruct,
    standard_boost,
    tensor_norm,
    tilt,
)

signatures = st.tuples(st.integers(1, 5), st.integers(1, 3)).map(lambda t: Signature(*t))
seeds = st.integers(0, 2**32 - 1)


def test_identity_normal_form():
    nf = onm_normal_form(PseudoOrthogonalMatrix.identity(Signature(3, 2)))
    assert np.allclose(nf.D1, 1.0) and np.allclose(nf.D2, 1.0)
    assert np.allclose(nf.D3, 0.0) and np.allclose(nf.D4, 0.0)


def test_single_boost_blocks():
    a = 0.7
    M = standard_boost(Signature(1, 1), [a])
    pm = PseudoOrthogonalMatrix.from_matrix(M, Signature(1, 1))
    nf = onm_normal_form(pm)
    assert nf.D1[0] == pytest.approx(np.cosh(a))
    assert nf.D3[0] == pytest.approx(np.sinh(a))
    assert tilt(pm.V) == pytest.approx(np.cosh(a))


def test_not_pseudo_orthogonal_rejected():
    pm = PseudoOrthogonalMatrix.from_matrix(np.diag([2.0, 1.0, 1.0]), Signature(2, 1))
    assert not check_onm(pm)
    with pytest.raises(ValueError, match="not in O"):
        onm_normal_form(pm)


def test_block_shape_validation():
    with pytest.raises(ValueError, match="block X"):
        PseudoOrthogonalMatrix(Signature(2, 1), np.eye(3), np.zeros((2, 1)), np.zeros((1, 2)), np.eye(1))


@given(signatures, seeds)
def test_round_trip(sig, seed):
    M = random_onm(sig, np.random.default_rng(seed))
    assert onm_defect(M) < 1e-10
    nf = onm_normal_form(M)
    assert np.abs(reconstruct(nf).matrix - M.matrix).max() < 1e-9
    d = nf.invariant_defects()
    assert d["D1_sq_minus_D3_sq"] < 1e-9
    assert d["D2_sq_minus_D4_sq"] < 1e-9
    assert d["trace_gap"] < 1e-8 * max(1.0, float(np.sum(nf.D1**2)))
    assert d["min_D1"] >= 1 - 1e-12 and d["min_D2"] >= 1 - 1e-12


@given(signatures, seeds)
def test_rotations_are_orthogonal(sig, seed):
    nf = onm_normal_form(random_onm(sig, np.random.default_rng(seed)))
    for R in (nf.R_tan, nf.R_nor, nf.S_tan, nf.S_nor):
        assert np.allclose(R @ R.T, np.eye(R.shape[0]), atol=1e-10)
    Xc, Wc, Uc, Vc = canonical_blocks(nf)
    assert Xc.shape == (sig.n, sig.n) and Vc.shape == (sig.m, sig.m)


@given(signatures, seeds)
def test_tilt_at_least_sqrt_m(sig, seed):
    M = random_onm(sig, np.random.default_rng(seed))
    assert tilt(M.V) >= np.sqrt(sig.m) - 1e-10


@given(signatures, seeds)
def test_frame_bounds_hold(sig, seed):
    fp = random_adapted_frame(sig, np.random.default_rng(seed))
    assert fp.orthonormality_defect() < 1e-8
    assert fp.tangent_gram_min_eig() > 0
    assert frame_norm_bounds(fp).bounds_hold


def test_background_frame_norm_is_euclidean(rng):
    fp = random_adapted_frame(Signature(2, 1), rng, max_angle=0.0)
    rep = frame_norm_bounds(fp)
    assert np.allclose(rep.tau_norms, 1.0) and np.allclose(rep.nu_norms, 1.0)


def test_tensor_norm_of_metric(rng):
    fp = random_adapted_frame(Signature(3, 1), rng)
    # the metric evaluates to eta on the background frame: squared norm d
    assert tensor_norm(fp.metric, fp) == pytest.approx(4.0)
    assert tensor_norm([fp.metric, np.zeros((4, 4, 4))], fp, k=1) == pytest.approx(4.0)


def test_multi_angle_blocks_are_in_group(rng):
    fp = random_adapted_frame(Signature(2, 2), rng)
    assert check_onm(multi_angle_blocks(fp))
