"""Named families of initial immersions.

Every builder returns an :class:`~spacelike_mcf.submanifold.ImmersedPatch`.
Graph families write ``f(x) = (x, u(x))`` over the first ``n`` chart
coordinates, which suits the flat and product ambients.
"""

from __future__ import annotations

import numpy as np

from .ambient import FlatPseudoEuclidean, ProductMetric, RoundSphere, SignatureMetricSpace
from .indefinite import standard_boost
from .submanifold import GridSpec, ImmersedPatch

__all__ = ["base_grid", "affine_graph", "sine_graph", "boosted_plane", "make_initial", "INITIAL_FAMILIES"]

INITIAL_FAMILIES = ("affine", "sine", "boosted", "flat")

# theta range of bounded sphere patches, away from the poles
THETA_RANGE = (0.6, np.pi - 0.6)


def base_grid(ambient: SignatureMetricSpace, N: int) -> GridSpec:
    """Parameter grid matching the spacelike factor of the ambient.

    Flat factors get the periodic ``[0, 2 pi)^n`` torus; a round-sphere
    factor gets a band ``theta in THETA_RANGE`` (bounded) times periodic
    ``phi``.
    """
    n = ambient.sig.n
    if isinstance(ambient, ProductMetric) and isinstance(ambient.f1, RoundSphere):
        t0, t1 = THETA_RANGE
        h0 = (t1 - t0) / (N - 1)
        return GridSpec((N, N), (h0, 2 * np.pi / N), (t0, 0.0), (False, True))
    return GridSpec.torus(N, n)


def _graph(ambient, grid, u, slope=None, label=""):
    n, m = ambient.sig.n, ambient.sig.m
    x = grid.coords()
    f = np.concatenate([x, u], axis=-1)
    shift = np.zeros((n, n + m))
    for k in range(n):
        if grid.periodic[k]:
            L = grid.h[k] * grid.shape[k]
            shift[k, k] = L
            if slope is not None:
                shift[k, n:] = L * slope[:, k]
    return ImmersedPatch(grid, f, ambient, shift, label)


def affine_graph(ambient: SignatureMetricSpace, N: int, slope, offset=0.0) -> ImmersedPatch:
    """Graph ``u = slope @ x + offset`` with ``slope`` of shape ``(m, n)``."""
    n, m = ambient.sig.n, ambient.sig.m
    slope = np.asarray(slope, dtype=float).reshape(m, n)
    grid = base_grid(ambient, N)
    x = grid.coords()
    u = np.einsum("an,...n->...a", slope, x) + offset
    return _graph(ambient, grid, u, slope, f"affine slope={slope.tolist()}")


def sine_graph(ambient: SignatureMetricSpace, N: int, eps: float = 0.1, tilt: float = 0.0,
               offset: float = 0.0) -> ImmersedPatch:
    """Graph ``u_a = offset + tilt * x^1 + eps * prod_k sin(x^k + 0.7 a)``.

    On a sphere band the product uses ``sin(2 (theta - theta_0))`` for the
    bounded axis so the perturbation is smooth up to the margins.
    """
    n, m = ambient.sig.n, ambient.sig.m
    grid = base_grid(ambient, N)
    x = grid.coords()
    slope = np.zeros((m, n))
    slope[:, 0] = tilt
    if not grid.periodic[0] and tilt:
        raise ValueError("tilt is only supported on periodic grids")
    u = np.empty(grid.shape + (m,))
    for a in range(m):
        wave = np.ones(grid.shape)
        for k in range(n):
            arg = x[..., k] - grid.origin[k]
            wave = wave * np.sin((2 * arg if not grid.periodic[k] else arg) + 0.7 * a)
        u[..., a] = offset + tilt * x[..., 0] + eps * wave
    return _graph(ambient, grid, u, slope, f"sine eps={eps} tilt={tilt}")


def boosted_plane(n: int, m: int, N: int, angles) -> ImmersedPatch:
    """Flat n-plane in ``R^{n,m}`` spanned by the tangent rows of a standard boost."""
    amb = FlatPseudoEuclidean(n, m)
    # rows of M eta are the adapted vectors in the background basis
    tangents = (standard_boost(amb.sig, angles) @ amb.sig.eta)[:n]
    grid = GridSpec.torus(N, n)
    x = grid.coords()
    f = np.einsum("...k,ka->...a", x, tangents)
    L = grid.h[0] * grid.shape[0]
    shift = L * tangents
    return ImmersedPatch(grid, f, amb, shift, f"boosted angles={list(np.atleast_1d(angles))}")


def make_initial(ambient: SignatureMetricSpace, name: str, N: int, **params) -> ImmersedPatch:
    """Build an initial patch by family name."""
    if name == "flat":
        return affine_graph(ambient, N, np.zeros((ambient.sig.m, ambient.sig.n)), float(params.get("offset", 0.0)))
    if name == "affine":
        slope = params.get("slope", 0.6)
        slope = np.broadcast_to(np.asarray(slope, dtype=float), (ambient.sig.m, ambient.sig.n)).copy() \
            if np.ndim(slope) == 0 else np.asarray(slope, dtype=float)
        if np.ndim(params.get("slope", 0.6)) == 0:
            slope[:, 1:] = 0.0
        return affine_graph(ambient, N, slope, float(params.get("offset", 0.0)))
    if name == "sine":
        return sine_graph(ambient, N, float(params.get("eps", 0.1)), float(params.get("tilt", 0.0)),
                          float(params.get("offset", 0.0)))
    if name == "boosted":
        if not isinstance(ambient, FlatPseudoEuclidean):
            raise ValueError("boosted plane requires the flat ambient")
        return boosted_plane(ambient.sig.n, ambient.sig.m, N, params.get("angles", [0.5]))
    raise ValueError(f"unknown initial family {name!r}; choose from {INITIAL_FAMILIES}")
