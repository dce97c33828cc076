"""Vectorized numpy implementations of the node-wise kernels.

These are the reference versions; the compiled module must agree with
them to roundoff.
"""

import numpy as np

STATUS_OK = 0
STATUS_NOT_SPACELIKE = 1
STATUS_DEGENERATE_NORMAL = 2


def _g(a, G, b):
    return np.einsum("Na,Nab,Nb->N", a, G, b)


def adapted_frames(E, G, T, cond_max=1e8):
    """Adapted frames at every node.

    Parameters
    ----------
    E : ndarray, shape (N, n, d)
        Coordinate tangent vectors ``d_i f`` per node.
    G : ndarray, shape (N, d, d)
        Ambient metric at the nodes.
    T : ndarray, shape (N, m, d)
        Background unit timelike fields.
    cond_max : float
        Largest accepted condition number of the projected time Gram matrix.

    Returns
    -------
    tau : ndarray, shape (N, n, d)
    nu : ndarray, shape (N, m, d)
    cond : ndarray, shape (N,)
        Condition number of the Gram matrix of the projected ``T``.
    status : ndarray of int8, shape (N,)
        0 for a good node, 1 when the tangents are not spacelike, 2 when
        the normal projection is degenerate.
    """
    E = np.ascontiguousarray(E, dtype=float)
    G = np.ascontiguousarray(G, dtype=float)
    T = np.ascontiguousarray(T, dtype=float)
    N, n, d = E.shape
    m = T.shape[1]
    status = np.zeros(N, dtype=np.int8)
    tau = np.empty_like(E)
    for k in range(n):
        w = E[:, k].copy()
        for j in range(k):
            w -= _g(w, G, tau[:, j])[:, None] * tau[:, j]
        q = _g(w, G, w)
        bad = q <= 0.0
        status[bad] = STATUS_NOT_SPACELIKE
        tau[:, k] = w / np.sqrt(np.where(bad, 1.0, q))[:, None]
    P = T.copy()
    for k in range(n):
        coef = np.einsum("Nsa,Nab,Nb->Ns", P, G, tau[:, k])
        P -= coef[:, :, None] * tau[:, k][:, None, :]
    gram = -np.einsum("Nsa,Nab,Nrb->Nsr", P, G, P)
    ev = np.linalg.eigvalsh(gram)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(ev[:, 0] > 0, ev[:, -1] / ev[:, 0], np.inf)
    status[(status == 0) & ~(cond <= cond_max)] = STATUS_DEGENERATE_NORMAL
    nu = np.empty_like(P)
    for a in range(m):
        w = P[:, a].copy()
        for b in range(a):
            w += _g(w, G, nu[:, b])[:, None] * nu[:, b]
        q = -_g(w, G, w)
        nu[:, a] = w / np.sqrt(np.where(q > 0, q, 1.0))[:, None]
    return tau, nu, cond, status


def radial_rhs(R, H, h):
    """Right-hand side ``(R H H'' + 2 R H'^2 - 2 H H') / (2 R H H')`` at interior nodes.

    Returns the RHS (zero at the two end nodes) and the minimum over
    interior nodes of ``H`` and of the discrete ``H'``.
    """
    R = np.asarray(R, dtype=float)
    H = np.asarray(H, dtype=float)
    out = np.zeros_like(H)
    Hp = (H[2:] - H[:-2]) / (2 * h)
    Hpp = (H[2:] - 2 * H[1:-1] + H[:-2]) / (h * h)
    Hi, Ri = H[1:-1], R[1:-1]
    num = Ri * Hi * Hpp + 2 * Ri * Hp**2 - 2 * Hi * Hp
    den = 2 * Ri * Hi * Hp
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:-1] = num / den
    return out, float(Hi.min()), float(Hp.min())
