"""Discretized spacelike immersions and their extrinsic geometry.

A patch is a structured grid in the parameter domain with an embedding
``f`` giving chart coordinates at each node.  Grid axes may be periodic
(a torus direction, with an optional covering shift so that
``f(x + L e_k) = f(x) + shift_k``) or bounded, in which case one-sided
second-order differences are used at the two margin nodes and pointwise
checks are restricted to the interior mask.

Conventions
-----------
* ``A[..., i, j, a] = -G(D_i d_j f, nu_a)`` in coordinate indices, so that
  the normal part of ``D_i d_j f`` equals ``A_ija nu_a``.
* ``H[..., a] = g^ij A_ija`` and the mean curvature vector is
  ``H_vec = H_a nu_a``; raising with the normal metric gives
  ``H^a = -H_a``.
* ``|H|^2_+ = sum_a H_a^2`` and ``|A|^2_+ = g^ik g^jl A_ija A_kla``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .ambient import SignatureMetricSpace
from .indefinite import FramePair

__all__ = [
    "GridSpec",
    "ImmersedPatch",
    "DerivedGeometry",
    "NotSpacelikeError",
    "DegenerateNormalError",
    "d1",
    "d2",
    "laplace_beltrami",
    "derive",
    "induced_metric",
    "adapted_frame",
    "second_fundamental_form",
    "mean_curvature",
    "heights_and_tilt",
    "slice_identity_residual",
    "laplacian_identity_residual",
    "check_slice_identity",
    "check_laplacian_identity",
]

MARGIN = 2
COND_MAX = 1e8


class NotSpacelikeError(ValueError):
    """Raised when the induced metric fails to be positive definite somewhere."""

    def __init__(self, nodes, min_eig):
        self.nodes = [tuple(int(i) for i in nd) for nd in nodes]
        self.min_eig = float(min_eig)
        head = ", ".join(str(nd) for nd in self.nodes[:5])
        super().__init__(f"induced metric not positive definite at {len(self.nodes)} node(s) "
                         f"(first: {head}); smallest eigenvalue {self.min_eig:.3e}")


class DegenerateNormalError(ValueError):
    """Raised when the background time fields project degenerately onto the normal space."""

    def __init__(self, nodes, cond):
        self.nodes = [tuple(int(i) for i in nd) for nd in nodes]
        self.cond = float(cond)
        super().__init__(f"degenerate normal projection at {len(self.nodes)} node(s); "
                         f"worst condition number {self.cond:.3e} exceeds {COND_MAX:.0e}")


@dataclass(frozen=True)
class GridSpec:
    """Structured parameter grid.

    Parameters
    ----------
    shape : tuple of int
        Nodes per axis.
    h : tuple of float
        Spacing per axis.
    origin : tuple of float
        Parameter coordinate of node 0 along each axis.
    periodic : tuple of bool
        Whether each axis wraps around.
    """

    shape: tuple
    h: tuple
    origin: tuple
    periodic: tuple

    def __post_init__(self):
        n = len(self.shape)
        if not (len(self.h) == len(self.origin) == len(self.periodic) == n):
            raise ValueError("shape, h, origin and periodic must have one entry per axis")
        for N, p in zip(self.shape, self.periodic):
            if N < (3 if p else 2 * MARGIN + 1):
                raise ValueError("grid too small for the difference stencils")
        if any(h <= 0 for h in self.h):
            raise ValueError("grid spacing must be positive")

    @classmethod
    def torus(cls, N, n=2, length=2 * np.pi):
        """Uniform periodic grid with ``N`` nodes per axis on ``[0, length)^n``."""
        return cls((N,) * n, (length / N,) * n, (0.0,) * n, (True,) * n)

    @property
    def ndim(self):
        return len(self.shape)

    def coords(self):
        axes = [o + h * np.arange(N) for N, h, o in zip(self.shape, self.h, self.origin)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def interior_mask(self, margin=MARGIN):
        mask = np.ones(self.shape, dtype=bool)
        for ax, p in enumerate(self.periodic):
            if not p:
                idx = [slice(None)] * self.ndim
                idx[ax] = slice(0, margin)
                mask[tuple(idx)] = False
                idx[ax] = slice(self.shape[ax] - margin, None)
                mask[tuple(idx)] = False
        return mask

    def weights(self):
        """Quadrature weights: rectangle rule on periodic axes, trapezoid on bounded ones."""
        w = np.ones(self.shape)
        for ax, (p, h) in enumerate(zip(self.periodic, self.h)):
            wa = np.full(self.shape[ax], h)
            if not p:
                wa[0] = wa[-1] = h / 2
            shp = [1] * self.ndim
            shp[ax] = -1
            w = w * wa.reshape(shp)
        return w

    def to_dict(self):
        return {"shape": list(self.shape), "h": list(self.h), "origin": list(self.origin),
                "periodic": list(self.periodic)}


def _shift_slice(F, axis, index, shift, sign):
    """Add ``sign * shift`` to the hyperplane ``index`` along ``axis`` (in place)."""
    if shift is None:
        return
    idx = [slice(None)] * F.ndim
    idx[axis] = index
    F[tuple(idx)] += sign * np.asarray(shift)


def _neighbors(F, axis, shift):
    Fp = np.roll(F, -1, axis=axis)
    Fm = np.roll(F, 1, axis=axis)
    _shift_slice(Fp, axis, -1, shift, +1)
    _shift_slice(Fm, axis, 0, shift, -1)
    return Fp, Fm


def _take(F, axis, idx):
    return np.take(F, idx, axis=axis)


def d1(F, axis, h, periodic, shift=None):
    """First derivative along a grid axis, second-order accurate everywhere.

    ``F`` has the grid axes first.  On periodic axes ``shift`` is the jump
    of ``F`` across one period (zero when ``None``).
    """
    if periodic:
        Fp, Fm = _neighbors(F, axis, shift)
        return (Fp - Fm) / (2 * h)
    out = np.empty_like(F, dtype=float)
    N = F.shape[axis]
    inner = (_take(F, axis, np.arange(2, N)) - _take(F, axis, np.arange(0, N - 2))) / (2 * h)
    lo = (-3 * _take(F, axis, 0) + 4 * _take(F, axis, 1) - _take(F, axis, 2)) / (2 * h)
    hi = (3 * _take(F, axis, N - 1) - 4 * _take(F, axis, N - 2) + _take(F, axis, N - 3)) / (2 * h)
    idx = [slice(None)] * F.ndim
    idx[axis] = slice(1, N - 1)
    out[tuple(idx)] = inner
    idx[axis] = 0
    out[tuple(idx)] = lo
    idx[axis] = N - 1
    out[tuple(idx)] = hi
    return out


def d2(F, axis, h, periodic, shift=None):
    """Second derivative along a grid axis, second-order accurate everywhere."""
    if periodic:
        Fp, Fm = _neighbors(F, axis, shift)
        return (Fp - 2 * F + Fm) / (h * h)
    out = np.empty_like(F, dtype=float)
    N = F.shape[axis]
    inner = (_take(F, axis, np.arange(2, N)) - 2 * _take(F, axis, np.arange(1, N - 1))
             + _take(F, axis, np.arange(0, N - 2))) / (h * h)
    lo = (2 * _take(F, axis, 0) - 5 * _take(F, axis, 1) + 4 * _take(F, axis, 2) - _take(F, axis, 3)) / (h * h)
    hi = (2 * _take(F, axis, N - 1) - 5 * _take(F, axis, N - 2) + 4 * _take(F, axis, N - 3)
          - _take(F, axis, N - 4)) / (h * h)
    idx = [slice(None)] * F.ndim
    idx[axis] = slice(1, N - 1)
    out[tuple(idx)] = inner
    idx[axis] = 0
    out[tuple(idx)] = lo
    idx[axis] = N - 1
    out[tuple(idx)] = hi
    return out


def laplace_beltrami(phi, sqrtg, ginv, grid: GridSpec, shift=None):
    """Divergence-form Laplace-Beltrami operator of a scalar field.

    Diagonal fluxes use metric coefficients averaged to half nodes; mixed
    terms use centered differences of centered derivatives.  Values are
    meaningful on the interior mask only.

    Parameters
    ----------
    phi : ndarray, grid shape
    sqrtg : ndarray, grid shape
        ``sqrt(det g)``.
    ginv : ndarray, grid shape + (n, n)
    grid : GridSpec
    shift : sequence, optional
        Jump of ``phi`` across one period of each axis.
    """
    n = grid.ndim
    shift = [None] * n if shift is None else list(shift)
    total = np.zeros_like(phi, dtype=float)
    for i in range(n):
        h = grid.h[i]
        a = sqrtg * ginv[..., i, i]
        phip, phim = _neighbors(phi, i, shift[i])
        ap = 0.5 * (a + np.roll(a, -1, axis=i))
        am = 0.5 * (a + np.roll(a, 1, axis=i))
        total += (ap * (phip - phi) - am * (phi - phim)) / (h * h)
        for j in range(n):
            if j == i:
                continue
            flux = sqrtg * ginv[..., i, j] * d1(phi, j, grid.h[j], grid.periodic[j], shift[j])
            total += d1(flux, i, h, grid.periodic[i])
    return total / sqrtg


@dataclass
class ImmersedPatch:
    """Embedding values on a structured grid.

    Parameters
    ----------
    grid : GridSpec
    f : ndarray, shape grid.shape + (d,)
        Chart coordinates of the immersion at each node.
    ambient : SignatureMetricSpace
    shift : ndarray, shape (n, d), optional
        Covering shift of ``f`` across each periodic axis; rows of bounded
        axes are ignored.
    label : str
        Free-form description carried into snapshots.
    """

    grid: GridSpec
    f: np.ndarray
    ambient: SignatureMetricSpace
    shift: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        d = self.ambient.dim
        if self.f.shape != tuple(self.grid.shape) + (d,):
            raise ValueError(f"f must have shape {tuple(self.grid.shape) + (d,)}, got {self.f.shape}")
        if self.grid.ndim != self.ambient.sig.n:
            raise ValueError("grid dimension must equal the spacelike index n of the ambient")
        if self.shift is None:
            self.shift = np.zeros((self.grid.ndim, d))
        self.shift = np.asarray(self.shift, dtype=float).reshape(self.grid.ndim, d)

    def axis_shift(self, axis):
        return self.shift[axis] if self.grid.periodic[axis] else None

    def with_f(self, f):
        return ImmersedPatch(self.grid, f, self.ambient, self.shift.copy(), self.label)

    def height_shift(self):
        """Jump of the height functions across each periodic axis, or ``None``."""
        out = []
        p0 = self.f.reshape(-1, self.ambient.dim)[0]
        t0 = self.ambient.time_functions(p0)
        for ax in range(self.grid.ndim):
            if self.grid.periodic[ax] and np.any(self.shift[ax]):
                out.append(self.ambient.time_functions(p0 + self.shift[ax]) - t0)
            else:
                out.append(None)
        return out


@dataclass
class DerivedGeometry:
    """Node fields derived from an :class:`ImmersedPatch`.

    Shapes use ``S`` for the grid shape: ``E`` is ``S+(n,d)``, ``g`` and
    ``ginv`` are ``S+(n,n)``, ``tau`` is ``S+(n,d)``, ``nu`` is ``S+(m,d)``,
    ``A`` and ``A_nu`` are ``S+(n,n,m)``, ``H`` is ``S+(m,)``, ``H_vec`` is
    ``S+(d,)``, ``C`` is ``S+(n,m,m)``, ``V`` is ``S+(m,m)``, ``u``, ``psi``
    and ``trace_hess_t`` are ``S+(m,)``.
    """

    E: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    g_eig: np.ndarray
    sqrtg: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    cond: np.ndarray
    A: np.ndarray
    A_nu: np.ndarray
    H: np.ndarray
    H_vec: np.ndarray
    C: np.ndarray
    V: np.ndarray
    v: np.ndarray
    u: np.ndarray
    psi: np.ndarray
    T: np.ndarray
    trace_hess_t: np.ndarray
    H2: np.ndarray
    A2: np.ndarray
    mask: np.ndarray
    area: float
    extra: dict = field(default_factory=dict)

    @property
    def H_upper(self):
        """``H^a``: the mean curvature components raised with the normal metric."""
        return -self.H

    def symmetry_defect(self):
        """Largest ``|A_ij - A_ji|`` over the interior for the normal-derivative form."""
        return float(np.abs(self.A_nu - np.swapaxes(self.A_nu, -2, -3))[self.mask].max())


def _g(a, G, b):
    return np.einsum("...a,...ab,...b->...", a, G, b)


def _node_index(flat_ids, shape):
    return np.stack(np.unravel_index(flat_ids, shape), axis=-1)


def derive(patch: ImmersedPatch, cond_max: float = COND_MAX) -> DerivedGeometry:
    """Compute all derived node fields of a patch.

    Raises
    ------
    NotSpacelikeError
        If the induced metric is not positive definite at some node.
    DegenerateNormalError
        If the projected time fields are too ill-conditioned at some node.
    """
    grid, amb = patch.grid, patch.ambient
    n, m, d = amb.sig.n, amb.sig.m, amb.dim
    S = tuple(grid.shape)
    f = patch.f
    E = np.stack([d1(f, i, grid.h[i], grid.periodic[i], patch.axis_shift(i)) for i in range(n)], axis=-2)
    G = amb.metric(f)
    g = np.einsum("...ia,...ab,...jb->...ij", E, G, E)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    g_eig = np.linalg.eigvalsh(g)
    bad = g_eig[..., 0] <= 0.0
    if np.any(bad):
        raise NotSpacelikeError(np.argwhere(bad), g_eig[..., 0].min())
    ginv = np.linalg.inv(g)
    sqrtg = np.sqrt(np.linalg.det(g))

    mt = amb.multitime_frame(f)
    T, psi = mt.T, mt.psi
    tau, nu, cond, status = _kernels.adapted_frames(E.reshape(-1, n, d), G.reshape(-1, d, d),
                                                     T.reshape(-1, m, d), cond_max)
    if np.any(status == _kernels.STATUS_NOT_SPACELIKE):
        ids = np.flatnonzero(status == _kernels.STATUS_NOT_SPACELIKE)
        raise NotSpacelikeError(_node_index(ids, S), g_eig[..., 0].min())
    if np.any(status == _kernels.STATUS_DEGENERATE_NORMAL):
        ids = np.flatnonzero(status == _kernels.STATUS_DEGENERATE_NORMAL)
        raise DegenerateNormalError(_node_index(ids, S), cond.max())
    tau = tau.reshape(S + (n, d))
    nu = nu.reshape(S + (m, d))
    cond = cond.reshape(S)

    gamma = amb.christoffel(f)
    # D_i d_j f = d_i d_j f + Gamma(d_i f, d_j f)
    DDf = np.empty(S + (n, n, d))
    for i in range(n):
        DDf[..., i, i, :] = d2(f, i, grid.h[i], grid.periodic[i], patch.axis_shift(i))
        for j in range(i + 1, n):
            mixed = d1(E[..., j, :], i, grid.h[i], grid.periodic[i])
            DDf[..., i, j, :] = mixed
            DDf[..., j, i, :] = mixed
    DDf += np.einsum("...cab,...ia,...jb->...ijc", gamma, E, E)
    A = -np.einsum("...ijc,...cb,...ab->...ija", DDf, G, nu)
    H = np.einsum("...ij,...ija->...a", ginv, A)
    H_vec = np.einsum("...a,...ac->...c", H, nu)

    # normal derivatives of nu: D_i nu_a = d_i nu_a + Gamma(d_i f, nu_a)
    Dnu = np.stack([d1(nu, i, grid.h[i], grid.periodic[i]) for i in range(n)], axis=-3)
    Dnu += np.einsum("...cab,...ia,...sb->...isc", gamma, E, nu)
    A_nu = np.einsum("...isc,...cb,...jb->...ijs", Dnu, G, E)
    C = np.einsum("...isc,...cb,...rb->...isr", Dnu, G, nu)

    V = -np.einsum("...ac,...cb,...sb->...as", nu, G, T)
    v = np.sqrt(np.sum(V**2, axis=(-1, -2)))
    u = amb.time_functions(f)
    hess = amb.time_hessian(f)
    trace_hess_t = np.einsum("...ij,...ia,...jb,...tab->...t", ginv, E, E, hess)

    H2 = np.sum(H**2, axis=-1)
    A2 = np.einsum("...ik,...jl,...ija,...kla->...", ginv, ginv, A, A)
    area = float(np.sum(sqrtg * grid.weights()))
    return DerivedGeometry(E=E, g=g, ginv=ginv, g_eig=g_eig, sqrtg=sqrtg, tau=tau, nu=nu, cond=cond,
                           A=A, A_nu=A_nu, H=H, H_vec=H_vec, C=C, V=V, v=v, u=u, psi=psi, T=T,
                           trace_hess_t=trace_hess_t, H2=H2, A2=A2, mask=grid.interior_mask(), area=area)


def induced_metric(patch: ImmersedPatch) -> np.ndarray:
    """Pullback metric ``g_ij = G(d_i f, d_j f)`` by central differences.

    Raises :class:`NotSpacelikeError` with the offending node indices when
    it is not positive definite.
    """
    grid = patch.grid
    E = np.stack([d1(patch.f, i, grid.h[i], grid.periodic[i], patch.axis_shift(i))
                  for i in range(grid.ndim)], axis=-2)
    G = patch.ambient.metric(patch.f)
    g = np.einsum("...ia,...ab,...jb->...ij", E, G, E)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    lam = np.linalg.eigvalsh(g)[..., 0]
    if np.any(lam <= 0.0):
        raise NotSpacelikeError(np.argwhere(lam <= 0.0), lam.min())
    return g


def adapted_frame(patch: ImmersedPatch, node, geom: DerivedGeometry = None) -> FramePair:
    """Background and adapted frames at one node as a :class:`FramePair`."""
    geom = derive(patch) if geom is None else geom
    node = tuple(node)
    x = patch.f[node]
    background = patch.ambient.orthonormal_frame(x)
    adapted = np.vstack([geom.tau[node], geom.nu[node]])
    return FramePair(patch.ambient.sig, background, adapted, patch.ambient.metric(x), point=x)


def second_fundamental_form(patch: ImmersedPatch) -> np.ndarray:
    return derive(patch).A


def mean_curvature(patch: ImmersedPatch) -> np.ndarray:
    """Mean curvature vector ``H_a nu_a`` in chart components at every node."""
    return derive(patch).H_vec


def heights_and_tilt(patch: ImmersedPatch):
    """Return ``(u, V, v)``: heights ``t_a(f)``, the ``V`` block and the tilt."""
    geom = derive(patch)
    return geom.u, geom.V, geom.v


def _grad_heights(patch: ImmersedPatch, geom: DerivedGeometry):
    grid = patch.grid
    ushift = patch.height_shift()
    return np.stack([d1(geom.u, i, grid.h[i], grid.periodic[i], ushift[i]) for i in range(grid.ndim)],
                    axis=-2)


def slice_identity_residual(patch: ImmersedPatch, geom: DerivedGeometry = None) -> np.ndarray:
    """Node field of ``max_ab |<grad u_a, grad u_b> - (sum_c V_ca V_cb - delta_ab) / (psi_a psi_b)|``."""
    geom = derive(patch) if geom is None else geom
    du = _grad_heights(patch, geom)
    lhs = np.einsum("...ij,...ia,...jb->...ab", geom.ginv, du, du)
    m = geom.V.shape[-1]
    rhs = (np.einsum("...ca,...cb->...ab", geom.V, geom.V) - np.eye(m)) / (
        geom.psi[..., :, None] * geom.psi[..., None, :])
    return np.abs(lhs - rhs).max(axis=(-1, -2))


def laplacian_identity_residual(patch: ImmersedPatch, geom: DerivedGeometry = None) -> np.ndarray:
    """Node field ``Delta u_c + V_ac H^a / psi_c - g^ij Hess t_c(d_i f, d_j f)``, shape ``S+(m,)``."""
    geom = derive(patch) if geom is None else geom
    ushift = patch.height_shift()
    m = geom.u.shape[-1]
    out = np.empty_like(geom.u)
    for c in range(m):
        sh = [None if s is None else s[c] for s in ushift]
        lap = laplace_beltrami(geom.u[..., c], geom.sqrtg, geom.ginv, patch.grid, sh)
        vh = np.einsum("...a,...a->...", geom.V[..., :, c], geom.H_upper) / geom.psi[..., c]
        out[..., c] = lap + vh - geom.trace_hess_t[..., c]
    return out


def check_slice_identity(patch: ImmersedPatch, geom: DerivedGeometry = None) -> float:
    """Largest slice-identity residual over interior nodes."""
    geom = derive(patch) if geom is None else geom
    return float(slice_identity_residual(patch, geom)[geom.mask].max())


def check_laplacian_identity(patch: ImmersedPatch, geom: DerivedGeometry = None) -> float:
    """Largest Laplacian-identity residual over interior nodes and time indices."""
    geom = derive(patch) if geom is None else geom
    return float(np.abs(laplacian_identity_residual(patch, geom))[geom.mask].max())
