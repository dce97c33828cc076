"""Radial vector-field sections of the neutral tangent bundle of ``R^3``.

A profile ``H(R)`` defines the 3-submanifold ``{(p, H(|p|) p / |p|)}`` of
``T R^3`` with the neutral metric ``G(d_x^i, d_xdot^i) = 1``.  Its induced
metric is ``2 H' dR^2 + 2 R H dOmega^2``, so the signature is read off the
signs of ``H'`` and ``H``.  Mean curvature flow of such sections reduces to
the scalar equation

    dH/dt = (R H H'' + 2 R H'^2 - 2 H H') / (2 R H H').

Two normalizations of the closed-form mean curvature vector are exposed.
``factor`` is the one that reproduces the scalar flow above under the
metric convention used throughout the package; ``printed_factor`` is
``sqrt(2)`` times larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .ambient import NeutralTangentBundle
from .submanifold import GridSpec, ImmersedPatch, derive

__all__ = [
    "SignatureClass",
    "signature_classify",
    "RadialProfile",
    "ClosedFormMeanCurvature",
    "closed_form_mean_curvature",
    "analytic_closed_form",
    "radial_rhs",
    "radial_cfl_dt",
    "radial_flow_step",
    "RadialRun",
    "radial_run",
    "make_profile",
    "PROFILE_FAMILIES",
    "shell_patch",
    "CrossCheckReport",
    "cross_check_against_generic",
    "RadialHalted",
]

@dataclass(frozen=True)
class SignatureClass:
    """One cell of the classification table.

    ``positive`` and ``negative`` count the signs of the induced metric.
    ``label`` is ``"+3"`` or ``"-3"`` for definite metrics, ``"0"`` when it
    vanishes, and ``"(positive,negative)"`` otherwise.
    """

    sign_H: int
    sign_Hprime: int
    positive: int
    negative: int
    label: str

    @property
    def spacelike(self) -> bool:
        return self.positive == 3


def _sign(x, tol):
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def signature_classify(H: float, Hprime: float, tol: float = 0.0) -> SignatureClass:
    """Signature of the induced metric ``2 H' dR^2 + 2 R H dOmega^2`` (``R > 0``).

    Values with ``|x| <= tol`` count as zero.
    """
    sH, sP = _sign(H, tol), _sign(Hprime, tol)
    pos = (sP > 0) + 2 * (sH > 0)
    neg = (sP < 0) + 2 * (sH < 0)
    if pos == 3:
        label = "+3"
    elif neg == 3:
        label = "-3"
    elif pos == neg == 0:
        label = "0"
    else:
        label = f"({pos},{neg})"
    return SignatureClass(sH, sP, int(pos), int(neg), label)


class RadialHalted(RuntimeError):
    """The radial flow left the spacelike window and could not recover."""


@dataclass
class RadialProfile:
    """Profile values on a uniform ``R`` grid with Dirichlet end values.

    The end values are ``H[0]`` and ``H[-1]`` and stay fixed under the flow.
    """

    R: np.ndarray
    H: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        if self.R.ndim != 1 or self.R.shape != self.H.shape or len(self.R) < 5:
            raise ValueError("R and H must be matching 1-D arrays with at least 5 nodes")
        if self.R[0] <= 0:
            raise ValueError("R_min must be positive")
        dR = np.diff(self.R)
        if not np.allclose(dR, dR[0], rtol=1e-9, atol=0):
            raise ValueError("R grid must be uniform")

    @property
    def h(self) -> float:
        return float(self.R[1] - self.R[0])

    def derivatives(self):
        """Central-difference ``H'`` and ``H''`` at interior nodes."""
        h = self.h
        Hp = (self.H[2:] - self.H[:-2]) / (2 * h)
        Hpp = (self.H[2:] - 2 * self.H[1:-1] + self.H[:-2]) / (h * h)
        return Hp, Hpp

    def window_margins(self):
        """``(min H, min H')`` over interior nodes; both positive inside the spacelike window."""
        Hp, _ = self.derivatives()
        return float(self.H[1:-1].min()), float(Hp.min())

    def in_window(self) -> bool:
        mH, mP = self.window_margins()
        return mH > 0 and mP > 0

    def copy(self, H=None):
        return RadialProfile(self.R.copy(), self.H.copy() if H is None else np.asarray(H, dtype=float), self.name)


PROFILE_FAMILIES = ("linear", "cubic", "bump")


def make_profile(name: str, R_min=0.5, R_max=2.0, n_nodes=None, h=None, **params) -> RadialProfile:
    """Named profile families.

    ``linear``: ``H = a R``.  ``cubic``: ``H = R + c R^3``.
    ``bump``: ``H = R + amp sin(pi (R - R_min) / (R_max - R_min))``.
    Give either ``n_nodes`` or ``h``.
    """
    if h is not None:
        n_nodes = int(round((R_max - R_min) / h)) + 1
    n_nodes = 97 if n_nodes is None else int(n_nodes)
    R = np.linspace(R_min, R_max, n_nodes)
    if name == "linear":
        a = float(params.get("a", 1.0))
        H = a * R
    elif name == "cubic":
        c = float(params.get("c", 1.0))
        H = R + c * R**3
    elif name == "bump":
        amp = float(params.get("amp", 0.1))
        H = R + amp * np.sin(np.pi * (R - R_min) / (R_max - R_min))
    else:
        raise ValueError(f"unknown profile {name!r}; choose from {PROFILE_FAMILIES}")
    return RadialProfile(R, H, name)


@dataclass
class ClosedFormMeanCurvature:
    """Closed-form mean curvature at interior nodes.

    The vector is ``factor * (d_R - H' d_Rdot)``; ``printed_factor`` is
    ``sqrt(2) * factor``.  ``degenerate`` flags nodes with ``H`` or ``H'``
    too small to divide by.
    """

    R: np.ndarray
    numerator: np.ndarray
    factor: np.ndarray
    printed_factor: np.ndarray
    Hprime: np.ndarray
    degenerate: np.ndarray


def _closed_form(R, H, Hp, Hpp, tol):
    num = R * H * Hpp + 2 * R * Hp**2 - 2 * H * Hp
    degenerate = (np.abs(H) <= tol) | (np.abs(Hp) <= tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(degenerate, np.nan, -num / (4 * R * H * Hp**2))
    return ClosedFormMeanCurvature(R=R, numerator=num, factor=factor, printed_factor=factor * math.sqrt(2),
                                   Hprime=Hp, degenerate=degenerate)


def closed_form_mean_curvature(profile: RadialProfile, tol: float = 1e-12) -> ClosedFormMeanCurvature:
    """Closed form with ``H'``, ``H''`` from central differences (interior nodes)."""
    Hp, Hpp = profile.derivatives()
    return _closed_form(profile.R[1:-1], profile.H[1:-1], Hp, Hpp, tol)


def analytic_closed_form(R, H, Hp, Hpp, tol: float = 1e-12) -> ClosedFormMeanCurvature:
    """Closed form from exact profile values and derivatives."""
    R, H, Hp, Hpp = (np.asarray(a, dtype=float) for a in (R, H, Hp, Hpp))
    return _closed_form(R, H, Hp, Hpp, tol)


def radial_rhs(profile: RadialProfile) -> np.ndarray:
    """Right-hand side of the scalar flow; zero at the Dirichlet ends."""
    out, _, _ = _kernels.radial_rhs(profile.R, profile.H, profile.h)
    return out


def radial_cfl_dt(profile: RadialProfile, c_cfl: float = 0.2) -> float:
    """``c h^2 inf(2 R H H') / sup(R H)`` over interior nodes."""
    Hp, _ = profile.derivatives()
    R, H = profile.R[1:-1], profile.H[1:-1]
    return c_cfl * profile.h**2 * float((2 * R * H * Hp).min()) / float((R * H).max())


def radial_flow_step(profile: RadialProfile, dt: float, c_cfl: float = 0.2, max_retries: int = 10):
    """One forward Euler step with Dirichlet ends.

    A step is rejected and ``dt`` halved when ``dt`` exceeds the CFL bound
    or the result leaves the spacelike window.

    Returns
    -------
    new_profile : RadialProfile
    dt_used : float
    retries : int
    """
    if not profile.in_window():
        raise RadialHalted("profile is outside the spacelike window (need H > 0 and H' > 0)")
    bound = radial_cfl_dt(profile, c_cfl)
    for attempt in range(max_retries + 1):
        if dt <= bound:
            rhs, mH, mP = _kernels.radial_rhs(profile.R, profile.H, profile.h)
            new = profile.copy(profile.H + dt * rhs)
            if new.in_window() and np.all(np.isfinite(new.H)):
                return new, dt, attempt
        dt *= 0.5
    raise RadialHalted(f"radial step rejected {max_retries} times; last dt {dt:.3e}, "
                       f"window margins {profile.window_margins()}")


@dataclass
class RadialRun:
    """Monitor rows ``(step, t, dt, sup_dev, min_H, min_Hprime)`` and the final profile."""

    rows: list = field(default_factory=list)
    final: RadialProfile | None = None
    reference: np.ndarray | None = None

    COLUMNS = ("step", "t", "dt", "sup_dev", "min_H", "min_Hprime")

    def series(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)


def radial_run(profile: RadialProfile, steps: int, dt: float | None = None, c_cfl: float = 0.2,
               reference=None, max_retries: int = 10) -> RadialRun:
    """Run the scalar flow for ``steps`` steps.

    ``reference`` defaults to the line through the two Dirichlet end values,
    which equals ``H = R`` when both ends are pinned to ``R``.
    """
    if reference is None:
        R = profile.R
        reference = profile.H[0] + (profile.H[-1] - profile.H[0]) * (R - R[0]) / (R[-1] - R[0])
    reference = np.asarray(reference, dtype=float)
    out = RadialRun(reference=reference)
    t = 0.0
    cur = profile
    for k in range(1, steps + 1):
        step_dt = radial_cfl_dt(cur, c_cfl) if dt is None else dt
        try:
            cur, used, _ = radial_flow_step(cur, step_dt, c_cfl, max_retries)
        except RadialHalted:
            out.final = cur
            raise
        t += used
        mH, mP = cur.window_margins()
        out.rows.append({"step": k, "t": t, "dt": used, "sup_dev": float(np.abs(cur.H - reference).max()),
                         "min_H": mH, "min_Hprime": mP})
    out.final = cur
    return out


def shell_patch(profile: RadialProfile, n_ang: int = 9, h_ang: float | None = None,
                theta_c: float = np.pi / 2, phi_c: float = 0.0) -> ImmersedPatch:
    """Embed the section over a spherical wedge of the shell.

    The grid is ``(R, theta, phi)`` with all ``R`` nodes of the profile and
    ``n_ang`` nodes of spacing ``h_ang`` (default ``h_R``) in each angle,
    centred on ``(theta_c, phi_c)``.
    """
    h_ang = profile.h if h_ang is None else h_ang
    off = h_ang * (np.arange(n_ang) - (n_ang - 1) / 2)
    theta0 = theta_c + off[0]
    if theta0 < 0.2 or theta_c + off[-1] > np.pi - 0.2:
        raise ValueError("angular wedge must stay inside theta in [0.2, pi - 0.2]")
    grid = GridSpec((len(profile.R), n_ang, n_ang), (profile.h, h_ang, h_ang),
                    (float(profile.R[0]), theta0, phi_c + off[0]), (False, False, False))
    c = grid.coords()
    R, th, ph = c[..., 0], c[..., 1], c[..., 2]
    omega = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    Hn = np.broadcast_to(profile.H[:, None, None], R.shape)
    f = np.concatenate([R[..., None] * omega, Hn[..., None] * omega], axis=-1)
    return ImmersedPatch(grid, f, NeutralTangentBundle(3), None, f"radial shell {profile.name}")


@dataclass
class CrossCheckReport:
    """Comparison of the generic mean curvature vector with the closed form.

    ``rel_dev`` compares against the normalization consistent with the
    scalar flow and ``rel_dev_printed`` against ``printed_factor``;
    ``abs_dev`` is the absolute chart-component deviation.  ``orthogonality``
    is the largest ``|G(H, d_i f)|`` and ``parallel_defect`` the largest
    sine of the angle between the generic vector and ``d_R - H' d_Rdot``.
    """

    h: float
    rel_dev: float
    rel_dev_printed: float
    abs_dev: float
    max_closed: float
    orthogonality: float
    parallel_defect: float
    n_nodes: int
    n_degenerate: int
    ratio_generic_to_printed: float

    def to_dict(self):
        return dict(self.__dict__)


def cross_check_against_generic(profile: RadialProfile, n_ang: int = 9, h_ang: float | None = None,
                                abs_floor: float = 1e-9) -> CrossCheckReport:
    """Run the generic submanifold pipeline on a shell wedge and compare.

    Deviations are maxima over interior nodes; relative deviations are
    taken against ``max(|closed form|, abs_floor)`` node by node.
    """
    patch = shell_patch(profile, n_ang, h_ang)
    geom = derive(patch)
    cf = closed_form_mean_curvature(profile)
    mask = geom.mask.copy()
    # closed form is available on interior R nodes only
    fac = np.full(len(profile.R), np.nan)
    fac[1:-1] = cf.factor
    deg = np.ones(len(profile.R), dtype=bool)
    deg[1:-1] = cf.degenerate
    Hp = np.zeros(len(profile.R))
    Hp[1:-1] = cf.Hprime
    n_degenerate = int(np.sum(mask & deg[:, None, None]))
    mask &= ~deg[:, None, None]
    c = patch.grid.coords()
    th, ph = c[..., 1], c[..., 2]
    omega = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    direction = np.concatenate([omega, -Hp[:, None, None, None] * omega], axis=-1)
    closed = fac[:, None, None, None] * direction
    gen = geom.H_vec
    diff = np.linalg.norm(gen - closed, axis=-1)[mask]
    cn = np.linalg.norm(closed, axis=-1)[mask]
    gn = np.linalg.norm(gen, axis=-1)[mask]
    floor = np.maximum(cn, abs_floor)
    rel = float((diff / floor).max())
    printed = closed * math.sqrt(2)
    diffp = np.linalg.norm(gen - printed, axis=-1)[mask]
    relp = float((diffp / np.maximum(cn * math.sqrt(2), abs_floor)).max())
    G = patch.ambient.metric(patch.f)
    orth = np.abs(np.einsum("...a,...ab,...ib->...i", gen, G, geom.E))[mask].max()
    dn = np.linalg.norm(direction, axis=-1)[mask]
    cosang = np.abs(np.einsum("...a,...a->...", gen, direction)[mask]) / np.maximum(gn * dn, 1e-300)
    sin = np.sqrt(np.clip(1 - cosang**2, 0, None))
    parallel = float(sin[gn > abs_floor].max()) if np.any(gn > abs_floor) else 0.0
    big = cn > abs_floor
    ratio = float(np.median(gn[big] / (cn[big] * math.sqrt(2)))) if np.any(big) else math.nan
    return CrossCheckReport(h=profile.h, rel_dev=rel, rel_dev_printed=relp, abs_dev=float(diff.max()),
                            max_closed=float(cn.max()), orthogonality=float(orth), parallel_defect=parallel,
                            n_nodes=int(mask.sum()), n_degenerate=n_degenerate,
                            ratio_generic_to_printed=ratio)
