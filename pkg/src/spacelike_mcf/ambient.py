"""Ambient manifolds with metrics of signature (n, m).

Every query takes chart points ``x`` of shape ``(..., d)`` and returns
arrays with the same leading shape.  Index conventions:

* ``christoffel(x)[..., c, a, b]`` is ``Gamma^c_ab``;
* ``riemann(x)[..., a, b, c, d]`` is ``G(R(d_a, d_b) d_c, d_d)`` for the
  curvature operator ``R(X,Y)Z = -D_X D_Y Z + D_Y D_X Z + D_[X,Y] Z``,
  i.e. minus the usual operator;
* ``time_differentials(x)[..., a, :]`` holds the components of ``dt_a``.

The time orientation is fixed so that the last ``m`` chart coordinates
increase along each unit timelike field ``T_a = -psi_a grad t_a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .indefinite import Signature

__all__ = [
    "SignatureMetricSpace",
    "FlatPseudoEuclidean",
    "NeutralTangentBundle",
    "RoundSphere",
    "FlatFactor",
    "ProductMetric",
    "MultitimeFrame",
    "TCCEstimate",
    "metric_at",
    "christoffels_at",
    "riemann_at",
    "multitime_frame",
    "tcc_estimate",
    "make_ambient",
    "AMBIENTS",
]

H_AMB = 1e-4


class DomainError(ValueError):
    """Chart point outside the domain of the ambient space."""


def _riemann_from_christoffel(gamma, dgamma, G):
    """Lowered curvature in the sign convention of this module.

    ``dgamma[..., e, c, a, b]`` is ``d_e Gamma^c_ab``.
    """
    # Rs[r, s, mu, nu] = d_mu Gamma^r_{nu s} - d_nu Gamma^r_{mu s}
    #                    + Gamma^r_{mu l} Gamma^l_{nu s} - Gamma^r_{nu l} Gamma^l_{mu s}
    d1 = np.einsum("...mrns->...rsmn", dgamma)
    quad = np.einsum("...rml,...lns->...rsmn", gamma, gamma)
    Rs = d1 - np.swapaxes(d1, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    # G(R(d_a,d_b)d_c, d_d) = -G_de Rs[e, c, a, b]
    return -np.einsum("...de,...ecab->...abcd", G, Rs)


class SignatureMetricSpace:
    """Base class: a single chart with metric, connection, curvature and multi-time functions.

    Subclasses implement :meth:`metric` and may override the analytic
    Christoffels, curvature and time functions.  Without overrides the
    connection and curvature come from central differences with step
    ``h_amb``, and the time functions are the last ``m`` coordinates.
    """

    name = "abstract"

    def __init__(self, sig: Signature, h_amb: float = H_AMB):
        self.sig = sig
        self.h_amb = h_amb

    @property
    def dim(self) -> int:
        return self.sig.dim

    def params(self) -> dict:
        return {}

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainError(f"points must have {self.dim} components, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite chart coordinates")
        return x

    def metric(self, x) -> np.ndarray:
        raise NotImplementedError

    def metric_derivative_fd(self, x, h=None) -> np.ndarray:
        """``dG[..., e, a, b] = d_e G_ab`` by central differences."""
        h = self.h_amb if h is None else h
        x = self.check_domain(x)
        out = []
        for e in range(self.dim):
            step = np.zeros(self.dim)
            step[e] = h
            out.append((self.metric(x + step) - self.metric(x - step)) / (2 * h))
        return np.stack(out, axis=-3)

    def christoffel_fd(self, x, h=None) -> np.ndarray:
        x = self.check_domain(x)
        dG = self.metric_derivative_fd(x, h)
        Ginv = np.linalg.inv(self.metric(x))
        # lowered: Gamma_{d a b} = 1/2 (d_a G_db + d_b G_da - d_d G_ab)
        low = 0.5 * (np.einsum("...adb->...dab", dG) + np.einsum("...bda->...dab", dG) - dG)
        return np.einsum("...cd,...dab->...cab", Ginv, low)

    def christoffel(self, x) -> np.ndarray:
        return self.christoffel_fd(x)

    def riemann_fd(self, x, h=None) -> np.ndarray:
        """Curvature from central differences of :meth:`christoffel`."""
        h = self.h_amb if h is None else h
        x = self.check_domain(x)
        dgam = []
        for e in range(self.dim):
            step = np.zeros(self.dim)
            step[e] = h
            dgam.append((self.christoffel(x + step) - self.christoffel(x - step)) / (2 * h))
        dgamma = np.stack(dgam, axis=-4)
        return _riemann_from_christoffel(self.christoffel(x), dgamma, self.metric(x))

    def riemann(self, x) -> np.ndarray:
        return self.riemann_fd(x)

    # multi-time functions -------------------------------------------------

    def time_functions(self, x) -> np.ndarray:
        x = self.check_domain(x)
        return x[..., self.sig.n:].copy()

    def time_differentials(self, x) -> np.ndarray:
        x = self.check_domain(x)
        dt = np.zeros(x.shape[:-1] + (self.sig.m, self.dim))
        for a in range(self.sig.m):
            dt[..., a, self.sig.n + a] = 1.0
        return dt

    def time_second_partials(self, x) -> np.ndarray:
        """``d_a d_b t`` in chart coordinates, shape ``(..., m, d, d)``."""
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.sig.m, self.dim, self.dim))

    def time_hessian(self, x) -> np.ndarray:
        """Covariant Hessian ``D_a D_b t = d_a d_b t - Gamma^c_ab d_c t``."""
        gamma = self.christoffel(x)
        dt = self.time_differentials(x)
        return self.time_second_partials(x) - np.einsum("...cab,...tc->...tab", gamma, dt)

    def multitime_frame(self, x) -> "MultitimeFrame":
        x = self.check_domain(x)
        G = self.metric(x)
        Ginv = np.linalg.inv(G)
        dt = self.time_differentials(x)
        grad = np.einsum("...ab,...tb->...ta", Ginv, dt)
        gram = np.einsum("...ta,...ab,...sb->...ts", grad, G, grad)
        diag = np.diagonal(gram, axis1=-2, axis2=-1)
        if np.any(diag >= 0.0):
            raise ValueError("time function gradient is not timelike")
        psi = 1.0 / np.sqrt(-diag)
        T = -psi[..., None] * grad
        return MultitimeFrame(T=T, psi=psi, gram=gram)

    def orthonormal_frame(self, x) -> np.ndarray:
        """Background frame at a single point: rows ``e_1..e_n`` then ``T_1..T_m``."""
        x = self.check_domain(x)
        if x.ndim != 1:
            raise ValueError("orthonormal_frame takes a single point")
        G = self.metric(x)
        T = self.multitime_frame(x).T
        rows = []
        for k in range(self.dim):
            w = np.zeros(self.dim)
            w[k] = 1.0
            for Ta in T:
                w = w + (w @ G @ Ta) * Ta
            for e in rows:
                w = w - (w @ G @ e) * e
            q = w @ G @ w
            if q > 1e-10 * max(1.0, np.abs(G).max()):
                rows.append(w / np.sqrt(q))
            if len(rows) == self.sig.n:
                break
        if len(rows) < self.sig.n:
            raise ValueError("could not complete a spacelike orthonormal frame")
        return np.vstack(rows + list(T))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


@dataclass
class MultitimeFrame:
    T: np.ndarray
    psi: np.ndarray
    gram: np.ndarray


class FlatPseudoEuclidean(SignatureMetricSpace):
    """``R^{n+m}`` (or its torus quotient) with ``G = diag(I_n, -I_m)``.

    With ``time_warp = w`` (only for ``m = 1``) the time function becomes
    ``t = y + w sin(x^1)``, which has a non-vanishing Hessian.
    """

    name = "flat"

    def __init__(self, n: int, m: int, time_warp: float = 0.0, h_amb: float = H_AMB):
        super().__init__(Signature(n, m), h_amb)
        if time_warp != 0.0 and m != 1:
            raise ValueError("time_warp requires m = 1 (gradients must stay orthogonal)")
        if abs(time_warp) >= 1.0:
            raise ValueError("|time_warp| must be < 1 to keep grad t timelike")
        self.time_warp = float(time_warp)

    def params(self):
        return {"n": self.sig.n, "m": self.sig.m, "time_warp": self.time_warp}

    def metric(self, x):
        x = self.check_domain(x)
        return np.broadcast_to(self.sig.eta, x.shape[:-1] + (self.dim, self.dim)).copy()

    def christoffel(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 3)

    def riemann(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 4)

    def time_functions(self, x):
        t = super().time_functions(x)
        if self.time_warp:
            t[..., 0] += self.time_warp * np.sin(x[..., 0])
        return t

    def time_differentials(self, x):
        dt = super().time_differentials(x)
        if self.time_warp:
            dt[..., 0, 0] = self.time_warp * np.cos(np.asarray(x)[..., 0])
        return dt

    def time_second_partials(self, x):
        ddt = super().time_second_partials(x)
        if self.time_warp:
            ddt[..., 0, 0, 0] = -self.time_warp * np.sin(np.asarray(x)[..., 0])
        return ddt


class NeutralTangentBundle(SignatureMetricSpace):
    """Tangent bundle of flat ``R^n`` with the neutral metric ``ds^2 = sum dx^i dxdot^i``.

    Chart coordinates are ``(x^1..x^n, xdot^1..xdot^n)`` and
    ``G(d_x^i, d_xdot^i) = 1``.  The time functions
    ``t_i = (xdot^i - x^i) / sqrt(2)`` have unit lapse.
    """

    name = "neutral"

    def __init__(self, n: int = 3, h_amb: float = H_AMB):
        super().__init__(Signature(n, n), h_amb)
        k = n
        G = np.zeros((2 * k, 2 * k))
        G[:k, k:] = np.eye(k)
        G[k:, :k] = np.eye(k)
        self._G = G

    def params(self):
        return {"n": self.sig.n}

    def metric(self, x):
        x = self.check_domain(x)
        return np.broadcast_to(self._G, x.shape[:-1] + self._G.shape).copy()

    def christoffel(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 3)

    def riemann(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 4)

    def time_functions(self, x):
        x = self.check_domain(x)
        k = self.sig.n
        return (x[..., k:] - x[..., :k]) / np.sqrt(2.0)

    def time_differentials(self, x):
        x = self.check_domain(x)
        k = self.sig.n
        dt = np.zeros(x.shape[:-1] + (k, 2 * k))
        for a in range(k):
            dt[..., a, a] = -1.0 / np.sqrt(2.0)
            dt[..., a, k + a] = 1.0 / np.sqrt(2.0)
        return dt


class RoundSphere:
    """Round 2-sphere of radius ``r`` in coordinates ``(theta, phi)``, ``theta`` in (0, pi)."""

    dim = 2
    name = "sphere"

    def __init__(self, radius: float = 1.0, pole_margin: float = 1e-3):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.pole_margin = pole_margin

    def params(self):
        return {"kind": "sphere", "radius": self.radius}

    def check(self, y):
        th = y[..., 0]
        if np.any(th <= self.pole_margin) or np.any(th >= np.pi - self.pole_margin):
            raise DomainError("sphere chart requires theta in (0, pi) away from the poles")

    def metric(self, y):
        r2 = self.radius**2
        g = np.zeros(y.shape[:-1] + (2, 2))
        g[..., 0, 0] = r2
        g[..., 1, 1] = r2 * np.sin(y[..., 0]) ** 2
        return g

    def christoffel(self, y):
        th = y[..., 0]
        gam = np.zeros(y.shape[:-1] + (2, 2, 2))
        gam[..., 0, 1, 1] = -np.sin(th) * np.cos(th)
        gam[..., 1, 0, 1] = np.cos(th) / np.sin(th)
        gam[..., 1, 1, 0] = gam[..., 1, 0, 1]
        return gam

    def riemann_standard(self, y):
        """``g(R(d_a,d_b)d_c, d_d)`` for the usual operator: ``(g_bc g_ad - g_ac g_bd) / r^2``."""
        g = self.metric(y)
        return (np.einsum("...bc,...ad->...abcd", g, g) - np.einsum("...ac,...bd->...abcd", g, g)) / self.radius**2


class FlatFactor:
    """Flat ``R^k`` or torus factor with the Euclidean metric."""

    name = "flat"

    def __init__(self, dim: int = 1):
        self.dim = int(dim)

    def params(self):
        return {"kind": "flat", "dim": self.dim}

    def check(self, y):
        return None

    def metric(self, y):
        return np.broadcast_to(np.eye(self.dim), y.shape[:-1] + (self.dim, self.dim)).copy()

    def christoffel(self, y):
        return np.zeros(y.shape[:-1] + (self.dim,) * 3)

    def riemann_standard(self, y):
        return np.zeros(y.shape[:-1] + (self.dim,) * 4)


class ProductMetric(SignatureMetricSpace):
    """Indefinite product ``G = g1 - g2`` on ``M1 x M2``.

    The time functions are the coordinates of the second factor.
    """

    name = "product"

    def __init__(self, factor1, factor2, h_amb: float = H_AMB):
        super().__init__(Signature(factor1.dim, factor2.dim), h_amb)
        self.f1, self.f2 = factor1, factor2

    def params(self):
        return {"factor1": self.f1.params(), "factor2": self.f2.params()}

    def check_domain(self, x):
        x = super().check_domain(x)
        n = self.sig.n
        self.f1.check(x[..., :n])
        self.f2.check(x[..., n:])
        return x

    def metric(self, x):
        x = self.check_domain(x)
        n = self.sig.n
        G = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        G[..., :n, :n] = self.f1.metric(x[..., :n])
        G[..., n:, n:] = -self.f2.metric(x[..., n:])
        return G

    def christoffel(self, x):
        # Christoffels of -g2 equal those of g2
        x = self.check_domain(x)
        n = self.sig.n
        gam = np.zeros(x.shape[:-1] + (self.dim,) * 3)
        gam[..., :n, :n, :n] = self.f1.christoffel(x[..., :n])
        gam[..., n:, n:, n:] = self.f2.christoffel(x[..., n:])
        return gam

    def riemann(self, x):
        x = self.check_domain(x)
        n = self.sig.n
        R = np.zeros(x.shape[:-1] + (self.dim,) * 4)
        # lowering with -g2 on the second factor flips the sign there
        R[..., :n, :n, :n, :n] = -self.f1.riemann_standard(x[..., :n])
        R[..., n:, n:, n:, n:] = self.f2.riemann_standard(x[..., n:])
        return R


AMBIENTS = ("flat", "neutral", "product")


def _factor(spec):
    if isinstance(spec, (RoundSphere, FlatFactor)):
        return spec
    kind = spec.get("kind", "sphere")
    if kind == "sphere":
        return RoundSphere(float(spec.get("radius", 1.0)))
    if kind == "flat":
        return FlatFactor(int(spec.get("dim", 1)))
    raise ValueError(f"unknown factor kind {kind!r}")


def make_ambient(name: str, **params) -> SignatureMetricSpace:
    """Build a catalog space by name (``flat``, ``neutral`` or ``product``)."""
    if name == "flat":
        return FlatPseudoEuclidean(int(params.get("n", 2)), int(params.get("m", 1)),
                                   float(params.get("time_warp", 0.0)))
    if name == "neutral":
        return NeutralTangentBundle(int(params.get("n", 3)))
    if name == "product":
        f1 = _factor(params.get("factor1", {"kind": "sphere", "radius": 1.0}))
        f2 = _factor(params.get("factor2", {"kind": "flat", "dim": 1}))
        return ProductMetric(f1, f2)
    raise ValueError(f"unknown ambient {name!r}; choose from {AMBIENTS}")


def metric_at(space: SignatureMetricSpace, x) -> np.ndarray:
    return space.metric(x)


def christoffels_at(space: SignatureMetricSpace, x) -> np.ndarray:
    return space.christoffel(x)


def riemann_at(space: SignatureMetricSpace, x) -> np.ndarray:
    return space.riemann(x)


def multitime_frame(space: SignatureMetricSpace, x) -> MultitimeFrame:
    return space.multitime_frame(x)


@dataclass
class TCCEstimate:
    """Sampled curvature ratio ``sum_i G(R(X,tau_i)X,tau_i) / G(X,X)``.

    ``k_est`` is the largest sampled ratio: the smallest constant ``k``
    consistent with every sampled plane.  Being a maximum over samples it
    can only grow with more samples.
    """

    k_est: float
    ratio_min: float
    witness: dict
    n_samples: int
    n_rejected: int


def _eta_orthonormalize(vectors, eta_diag, sign):
    """Gram-Schmidt in a diagonal metric, batched over the leading axis; rows are vectors."""
    out = []
    for k in range(vectors.shape[1]):
        w = vectors[:, k].copy()
        for q in out:
            w = w - (np.sum(w * eta_diag * q, axis=-1) / sign)[:, None] * q
        nrm = sign * np.sum(w * eta_diag * w, axis=-1)
        out.append(w / np.sqrt(nrm)[:, None])
    return np.stack(out, axis=1)


def _sample_planes(rng, n, m, count, min_gram_eig):
    """Spacelike n-planes in frame coordinates and unit timelike normals."""
    d = n + m
    eta = np.concatenate([np.ones(n), -np.ones(m)])
    taus, Xs = [], []
    rejected = 0
    need = count
    while need > 0:
        batch = max(2 * need, 64)
        Z = rng.standard_normal((batch, d, n))
        Q, _ = np.linalg.qr(Z)
        gram = np.einsum("bki,k,bkj->bij", Q, eta, Q)
        ok = np.linalg.eigvalsh(gram)[:, 0] >= min_gram_eig
        rejected += int(np.sum(~ok))
        Q = Q[ok][:need]
        tau = _eta_orthonormalize(np.swapaxes(Q, 1, 2), eta, 1.0)
        # normal complement: project the timelike axes off the plane
        axes = np.broadcast_to(np.eye(d)[n:], (len(Q), m, d)).copy()
        proj = np.einsum("bkd,d,bid->bki", axes, eta, tau)
        axes = axes - np.einsum("bki,bid->bkd", proj, tau)
        nu = _eta_orthonormalize(axes, eta, -1.0)
        c = rng.standard_normal((len(Q), m))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        taus.append(tau)
        Xs.append(np.einsum("bk,bkd->bd", c, nu))
        need -= len(Q)
    return np.concatenate(taus), np.concatenate(Xs), rejected


def tcc_estimate(space: SignatureMetricSpace, region, n_samples: int, seed: int = 0,
                 n_points: int = 32, min_gram_eig: float = 0.1) -> TCCEstimate:
    """Sample the timelike curvature ratio over points, spacelike planes and timelike normals.

    Points are uniform in the box ``region = (lo, hi)``.  Planes are
    spanned by Gaussian ``(n+m) x n`` matrices in background-frame
    coordinates, orthonormalized, and rejected when their Gram matrix has
    smallest eigenvalue below ``min_gram_eig``; ``X`` is a uniformly random
    unit combination of the normals.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    lo, hi = (np.asarray(b, dtype=float) for b in region)
    if lo.shape != (space.dim,) or hi.shape != (space.dim,):
        raise ValueError("region bounds must have one entry per chart coordinate")
    rng = np.random.default_rng(seed)
    n, m = space.sig.n, space.sig.m
    n_points = max(1, min(n_points, n_samples))
    points = lo + (hi - lo) * rng.random((n_points, space.dim))
    space.check_domain(points)
    counts = np.full(n_points, n_samples // n_points)
    counts[: n_samples % n_points] += 1
    best = (-np.inf, None)
    worst = np.inf
    rejected = 0
    R_all = space.riemann(points)
    for p, x in enumerate(points):
        E = space.orthonormal_frame(x)
        Rf = np.einsum("abcd,ia,jb,kc,ld->ijkl", R_all[p], E, E, E, E)
        tau, X, rej = _sample_planes(rng, n, m, int(counts[p]), min_gram_eig)
        rejected += rej
        num = np.einsum("ijkl,bi,bsj,bk,bsl->b", Rf, X, tau, X, tau)
        eta = np.concatenate([np.ones(n), -np.ones(m)])
        ratio = num / np.einsum("bi,i,bi->b", X, eta, X)
        j = int(np.argmax(ratio))
        if ratio[j] > best[0]:
            best = (float(ratio[j]), {"point": x.copy(), "plane": tau[j] @ E, "X": X[j] @ E})
        worst = min(worst, float(ratio.min()))
    return TCCEstimate(k_est=best[0] + 0.0, ratio_min=worst, witness=best[1], n_samples=int(n_samples), n_rejected=rejected)
