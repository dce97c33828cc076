"""Small dense linear algebra for inner products of signature (n, m).

Frames are stored row-wise: an array of shape ``(k, d)`` holds ``k``
vectors with ``d = n + m`` chart components each.  The block layout of a
frame-change matrix follows::

    X_ij = G(tau_i, e_j)     W_ib = G(tau_i, T_b)
    U_aj = -G(nu_a, e_j)     V_ab = -G(nu_a, T_b)

and the assembled matrix ``M = [[X, W], [-U, -V]]`` is an element of the
indefinite orthogonal group O(n, m), i.e. ``M^T eta M = eta`` with
``eta = diag(I_n, -I_m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Signature",
    "PseudoOrthogonalMatrix",
    "NormalForm",
    "FramePair",
    "FrameNormReport",
    "check_onm",
    "onm_defect",
    "onm_normal_form",
    "reconstruct",
    "canonical_blocks",
    "tilt",
    "tensor_norm",
    "frame_norm_bounds",
    "multi_angle_blocks",
    "standard_boost",
    "random_orthogonal",
    "random_onm",
    "random_adapted_frame",
]

ONM_TOL = 1e-9
EIG_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class Signature:
    """Numbers of positive (``n``) and negative (``m``) directions."""

    n: int
    m: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m or self.n < 1 or self.m < 1:
            raise ValueError(f"signature needs integers n >= 1, m >= 1, got ({self.n}, {self.m})")

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def eta(self) -> np.ndarray:
        return np.diag(np.concatenate([np.ones(self.n), -np.ones(self.m)]))


@dataclass
class PseudoOrthogonalMatrix:
    """Block data ``(X, W, U, V)`` of a frame change in O(n, m)."""

    sig: Signature
    X: np.ndarray
    W: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        n, m = self.sig.n, self.sig.m
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        self.V = np.atleast_2d(np.asarray(self.V, dtype=float))
        expected = {"X": (n, n), "W": (n, m), "U": (m, n), "V": (m, m)}
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"block {name} has shape {got}, expected {shape} for signature ({n}, {m})")

    @classmethod
    def from_matrix(cls, M, sig: Signature) -> "PseudoOrthogonalMatrix":
        M = np.asarray(M, dtype=float)
        d = sig.dim
        if M.shape != (d, d):
            raise ValueError(f"matrix has shape {M.shape}, expected ({d}, {d})")
        n = sig.n
        return cls(sig, M[:n, :n], M[:n, n:], -M[n:, :n], -M[n:, n:])

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.X, self.W], [-self.U, -self.V]])

    @classmethod
    def identity(cls, sig: Signature) -> "PseudoOrthogonalMatrix":
        n, m = sig.n, sig.m
        return cls(sig, np.eye(n), np.zeros((n, m)), np.zeros((m, n)), np.eye(m))


def onm_defect(M: PseudoOrthogonalMatrix) -> float:
    """Largest absolute entry deviation among the three O(n, m) block identities."""
    n, m = M.sig.n, M.sig.m
    X, W, U, V = M.X, M.W, M.U, M.V
    d1 = X.T @ X - np.eye(n) - U.T @ U
    d2 = V.T @ V - np.eye(m) - W.T @ W
    d3 = U.T @ V - X.T @ W
    return float(max(np.abs(d1).max(), np.abs(d2).max(), np.abs(d3).max()))


def check_onm(M: PseudoOrthogonalMatrix, tol: float = ONM_TOL) -> bool:
    """True iff ``X^T X = I + U^T U``, ``V^T V = I + W^T W`` and ``U^T V = X^T W`` hold within ``tol``."""
    return onm_defect(M) <= tol


@dataclass
class NormalForm:
    """Rotations and diagonals bringing an O(n, m) element to block-diagonal boost form.

    For ``n >= m`` the rotated blocks read::

        R_tan X S_tan = diag(I_{n-m}, D1)     R_tan W S_nor = [0; diag(s * D4) A^T]
        R_nor U S_tan = [0, A diag(D3)]       R_nor V S_nor = diag(D2)

    with ``s = sign_choices``.  For ``n < m`` the same layout is applied to
    the mirrored data ``(V, U, W, X)`` and ``mirrored`` is set; the
    rotations are always stored in their original roles.
    """

    sig: Signature
    R_tan: np.ndarray
    R_nor: np.ndarray
    S_tan: np.ndarray
    S_nor: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    D4: np.ndarray
    A_block: np.ndarray
    sign_choices: np.ndarray
    mirrored: bool = False

    def invariant_defects(self) -> dict:
        return {
            "D1_sq_minus_D3_sq": float(np.abs(self.D1**2 - 1.0 - self.D3**2).max(initial=0.0)),
            "D2_sq_minus_D4_sq": float(np.abs(self.D2**2 - 1.0 - self.D4**2).max(initial=0.0)),
            "trace_gap": float(abs(np.sum(self.D1**2) - np.sum(self.D2**2))),
            "min_D1": float(self.D1.min(initial=np.inf)),
            "min_D2": float(self.D2.min(initial=np.inf)),
        }

    def to_dict(self) -> dict:
        out = {"signature": [self.sig.n, self.sig.m], "mirrored": self.mirrored}
        for name in ("R_tan", "R_nor", "S_tan", "S_nor", "D1", "D2", "D3", "D4", "A_block", "sign_choices"):
            out[name] = np.asarray(getattr(self, name)).tolist()
        return out


def _polar_orthogonal(B: np.ndarray) -> np.ndarray:
    P, _, Qt = np.linalg.svd(B)
    return P @ Qt


def _sym_sqrt_frame(B: np.ndarray, k_unit: int):
    """Eigenframe of ``B^T B`` (eigenvalues >= 1) ordered: ``k_unit`` smallest first, rest descending."""
    lam, Q = np.linalg.eigh(B.T @ B)
    if lam[0] < 1.0 - 1e-6 * max(1.0, lam[-1]):
        raise ValueError("block has a singular value below 1; not an O(n, m) block")
    lam = np.maximum(lam, 1.0)
    N = len(lam)
    idx = np.arange(N)
    # boosted directions: largest values, ties resolved toward later indices
    boosted = np.lexsort((-idx, -lam))[: N - k_unit]
    boosted = boosted[np.lexsort((boosted, -lam[boosted]))]
    unit = np.setdiff1d(idx, boosted)
    order = np.concatenate([unit, boosted]).astype(int)
    return lam[order], Q[:, order]


def _normal_form_tall(X, W, U, V):
    """Normal form data for blocks with ``n >= m`` (see :class:`NormalForm`)."""
    n, m = X.shape[0], V.shape[0]
    k = n - m
    lam, Q = _sym_sqrt_frame(X, k)
    # R_tan = sqrt(X^T X) X^{-1} rotated into the eigenframe, written without the inverse
    R_tan = (Q.T @ X.T) / np.sqrt(lam)[:, None]
    S_tan = Q
    mu, P = _sym_sqrt_frame(V, 0)
    R_nor = (P.T @ V.T) / np.sqrt(mu)[:, None]
    S_nor = P

    Uc = R_nor @ U @ S_tan
    Wc = R_tan @ W @ S_nor
    B3 = Uc[:, k:]
    D3 = np.linalg.norm(B3, axis=0)
    A = _polar_orthogonal(B3)
    W1 = Wc[k:, :]
    diag_WA = np.diag(W1 @ A)
    D4 = np.linalg.norm(W1, axis=1)
    signs = np.where(diag_WA < 0.0, -1.0, 1.0)
    D1 = np.sqrt(1.0 + D3**2)
    D2 = np.sqrt(1.0 + D4**2)
    return dict(R_tan=R_tan, R_nor=R_nor, S_tan=S_tan, S_nor=S_nor,
                D1=D1, D2=D2, D3=D3, D4=D4, A_block=A, sign_choices=signs)


def _canonical_tall(n, m, D1, D2, D3, D4, A, signs):
    k = n - m
    Xc = np.diag(np.concatenate([np.ones(k), D1]))
    Wc = np.zeros((n, m))
    Wc[k:, :] = (signs * D4)[:, None] * A.T
    Uc = np.zeros((m, n))
    Uc[:, k:] = A * D3[None, :]
    Vc = np.diag(D2)
    return Xc, Wc, Uc, Vc


def onm_normal_form(M: PseudoOrthogonalMatrix, tol: float = ONM_TOL) -> NormalForm:
    """Rotate both frames so that ``M`` takes the block-diagonal boost form.

    The symmetric square root of ``X^T X`` is taken through its symmetric
    eigendecomposition, after which ``X`` is diagonal and ``U = A D3``.
    Diagonals are sorted in descending order and ``D3``, ``D4`` are
    non-negative; any sign is carried by ``A_block`` and ``sign_choices``.

    Raises
    ------
    ValueError
        If ``M`` violates the O(n, m) identities by more than ``tol``.
    """
    defect = onm_defect(M)
    if defect > tol:
        raise ValueError(f"matrix is not in O({M.sig.n},{M.sig.m}): defect {defect:.3e} > tol {tol:.1e}")
    n, m = M.sig.n, M.sig.m
    if n >= m:
        data = _normal_form_tall(M.X, M.W, M.U, M.V)
        return NormalForm(sig=M.sig, mirrored=False, **data)
    # mirrored data (V, U, W, X) lies in O(m, n)
    data = _normal_form_tall(M.V, M.U, M.W, M.X)
    return NormalForm(
        sig=M.sig,
        R_tan=data["R_nor"], R_nor=data["R_tan"], S_tan=data["S_nor"], S_nor=data["S_tan"],
        D1=data["D1"], D2=data["D2"], D3=data["D3"], D4=data["D4"],
        A_block=data["A_block"], sign_choices=data["sign_choices"], mirrored=True,
    )


def canonical_blocks(nf: NormalForm):
    """Rotated blocks ``(Xc, Wc, Uc, Vc)`` described by a normal form."""
    n, m = nf.sig.n, nf.sig.m
    if not nf.mirrored:
        return _canonical_tall(n, m, nf.D1, nf.D2, nf.D3, nf.D4, nf.A_block, nf.sign_choices)
    Xm, Wm, Um, Vm = _canonical_tall(m, n, nf.D1, nf.D2, nf.D3, nf.D4, nf.A_block, nf.sign_choices)
    return Vm, Um, Wm, Xm


def reconstruct(nf: NormalForm) -> PseudoOrthogonalMatrix:
    """Undo the rotations of a normal form."""
    Xc, Wc, Uc, Vc = canonical_blocks(nf)
    X = nf.R_tan.T @ Xc @ nf.S_tan.T
    W = nf.R_tan.T @ Wc @ nf.S_nor.T
    U = nf.R_nor.T @ Uc @ nf.S_tan.T
    V = nf.R_nor.T @ Vc @ nf.S_nor.T
    return PseudoOrthogonalMatrix(nf.sig, X, W, U, V)


def tilt(V_block) -> float:
    """Tilt ``v = sqrt(sum V_ab^2)``; at least ``sqrt(m)`` for a valid V block."""
    V_block = np.atleast_2d(np.asarray(V_block, dtype=float))
    return float(np.sqrt(np.sum(V_block**2)))


@dataclass
class FramePair:
    """Background frame ``{e_i, T_a}`` and adapted frame ``{tau_i, nu_a}`` at one ambient point.

    ``background`` and ``adapted`` are ``(d, d)`` arrays whose rows are the
    ``n`` spacelike vectors followed by the ``m`` timelike vectors.
    """

    sig: Signature
    background: np.ndarray
    adapted: np.ndarray
    metric: np.ndarray
    point: np.ndarray = field(default=None)

    def __post_init__(self):
        d = self.sig.dim
        self.background = np.asarray(self.background, dtype=float)
        self.adapted = np.asarray(self.adapted, dtype=float)
        self.metric = np.asarray(self.metric, dtype=float)
        for name in ("background", "adapted", "metric"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must have shape ({d}, {d})")
        if self.point is None:
            self.point = np.zeros(d)

    def orthonormality_defect(self) -> float:
        eta = self.sig.eta
        gb = self.background @ self.metric @ self.background.T
        ga = self.adapted @ self.metric @ self.adapted.T
        return float(max(np.abs(gb - eta).max(), np.abs(ga - eta).max()))

    def tangent_gram_min_eig(self) -> float:
        tau = self.adapted[: self.sig.n]
        return float(np.linalg.eigvalsh(tau @ self.metric @ tau.T).min())


def multi_angle_blocks(fp: FramePair) -> PseudoOrthogonalMatrix:
    """Blocks ``(X, W, U, V)`` of the frame change from background to adapted frame."""
    n = fp.sig.n
    cross = fp.adapted @ fp.metric @ fp.background.T
    return PseudoOrthogonalMatrix(fp.sig, cross[:n, :n], cross[:n, n:], -cross[n:, :n], -cross[n:, n:])


def tensor_norm(B, frame: FramePair, k: int = 0, covariant: bool = True) -> float:
    """Frame-dependent positive norm of a tensor.

    Sums the squared evaluations of ``B`` on all-spacelike tuples
    ``(e_i1, ..., e_il)`` plus all-timelike tuples ``(T_b1, ..., T_bl)`` of
    the background frame; mixed tuples do not enter.  This is not the
    Hilbert-Schmidt norm and changes under boosts of the background frame.

    Parameters
    ----------
    B : array_like or sequence of array_like
        Chart components, shape ``(d,) * l``.  For ``k > 0`` pass the
        sequence ``[B, nabla B, ..., nabla^k B]`` of covariant derivatives,
        computed by the caller; the result is the sum of their norms.
    frame : FramePair
        Supplies the background frame and the metric at the point.
    covariant : bool
        ``True`` for lower-index components (multilinear forms).  Upper
        indices are lowered with the metric first.
    """
    if k < 0:
        raise ValueError("derivative order k must be >= 0")
    if k == 0:
        parts = [B]
    else:
        parts = list(B)
        if len(parts) != k + 1:
            raise ValueError(f"expected {k + 1} tensors (B and its first {k} derivatives), got {len(parts)}")
    d, n = frame.sig.dim, frame.sig.n
    total = 0.0
    for T in parts:
        T = np.asarray(T, dtype=float)
        if T.ndim == 0 or any(s != d for s in T.shape):
            raise ValueError(f"tensor components must have shape ({d},)*l with l >= 1, got {T.shape}")
        if not covariant:
            for axis in range(T.ndim):
                T = np.moveaxis(np.tensordot(frame.metric, T, axes=([1], [axis])), 0, axis)
        E = frame.background
        for axis in range(T.ndim):
            T = np.moveaxis(np.tensordot(E, T, axes=([1], [axis])), 0, axis)
        space = T[(slice(0, n),) * T.ndim]
        time = T[(slice(n, d),) * T.ndim]
        total += float(np.sum(space**2) + np.sum(time**2))
    return total


@dataclass
class FrameNormReport:
    tau_norms: np.ndarray
    nu_norms: np.ndarray
    v: float
    bounds_hold: bool


def frame_norm_bounds(fp: FramePair) -> FrameNormReport:
    """Check ``|tau_i|^2 <= n(n+2) v^2`` and ``|nu_a|^2 <= 2 m v^2``."""
    M = multi_angle_blocks(fp)
    n, m = fp.sig.n, fp.sig.m
    tau_norms = np.sum(M.X**2, axis=1) + np.sum(M.W**2, axis=1)
    nu_norms = np.sum(M.U**2, axis=1) + np.sum(M.V**2, axis=1)
    v = tilt(M.V)
    # relative slack covers rounding in the equality case
    slack = 1.0 + 1e-12
    ok = bool(np.all(tau_norms <= n * (n + 2) * v**2 * slack) and np.all(nu_norms <= 2 * m * v**2 * slack))
    return FrameNormReport(tau_norms=tau_norms, nu_norms=nu_norms, v=v, bounds_hold=ok)


def standard_boost(sig: Signature, angles) -> np.ndarray:
    """Assembled boost matrix with hyperbolic angles in the planes ``(e_{n-k+j}, T_j)``.

    ``angles`` has at most ``min(n, m)`` entries.  The matrix satisfies
    ``M^T eta M = eta`` and its blocks have ``X, V`` carrying ``cosh`` and
    ``W, U`` carrying ``sinh`` on the paired entries.
    """
    n, m = sig.n, sig.m
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if len(angles) > min(n, m):
        raise ValueError("at most min(n, m) boost angles")
    X, V = np.eye(n), np.eye(m)
    W, U = np.zeros((n, m)), np.zeros((m, n))
    for j, th in enumerate(angles):
        i = n - len(angles) + j
        X[i, i] = np.cosh(th)
        V[j, j] = np.cosh(th)
        W[i, j] = np.sinh(th)
        U[j, i] = np.sinh(th)
    return PseudoOrthogonalMatrix(sig, X, W, U, V).matrix


def random_orthogonal(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of O(k)."""
    Z = rng.standard_normal((k, k))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))[None, :]


def random_onm(sig: Signature, rng: np.random.Generator, max_angle: float = 2.0) -> PseudoOrthogonalMatrix:
    """Random element ``diag(R1, R2) . boost . diag(S1, S2)`` of O(n, m)."""
    n, m = sig.n, sig.m
    k = min(n, m)
    angles = rng.uniform(-max_angle, max_angle, size=k)
    left = np.zeros((sig.dim, sig.dim))
    right = np.zeros((sig.dim, sig.dim))
    left[:n, :n], left[n:, n:] = random_orthogonal(n, rng), random_orthogonal(m, rng)
    right[:n, :n], right[n:, n:] = random_orthogonal(n, rng), random_orthogonal(m, rng)
    return PseudoOrthogonalMatrix.from_matrix(left @ standard_boost(sig, angles) @ right, sig)


def random_adapted_frame(sig: Signature, rng: np.random.Generator, max_angle: float = 2.0) -> FramePair:
    """Adapted frame related to a background frame by a random O(n, m) element.

    The chart is scrambled by a random invertible map so that the metric
    is not diagonal; both frames are G-orthonormal.
    """
    d = sig.dim
    L = np.eye(d) + 0.3 * rng.standard_normal((d, d))
    while abs(np.linalg.det(L)) < 0.1:
        L = np.eye(d) + 0.3 * rng.standard_normal((d, d))
    Linv = np.linalg.inv(L)
    metric = Linv.T @ sig.eta @ Linv
    background = L.T.copy()  # rows L e_k
    M = random_onm(sig, rng, max_angle).matrix
    # rows C b with C = M eta give G(adapted_i, background_j) = M_ij
    adapted = (M @ sig.eta) @ background
    return FramePair(sig, background=background, adapted=adapted, metric=metric)
