"""Method-of-lines mean curvature flow ``df/ds = H`` with runtime monitors.

Each accepted step records one monitor row.  Residual monitors compare a
forward difference in ``s`` between consecutive states with the right-hand
side of the corresponding evolution identity evaluated at the earlier
state, so they carry an ``O(dt)`` term on top of the spatial ``O(h^2)``
floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import FlatPseudoEuclidean, NeutralTangentBundle
from .submanifold import (
    DegenerateNormalError,
    DerivedGeometry,
    ImmersedPatch,
    NotSpacelikeError,
    derive,
    laplace_beltrami,
)

__all__ = [
    "FlowConfig",
    "FlowState",
    "FlowTrajectory",
    "FlowHalted",
    "MONITOR_COLUMNS",
    "default_k_grid",
    "cfl_dt",
    "step",
    "run",
    "uflow_residual_field",
    "curvature_evolution_residual_field",
    "curvature_evolution_terms",
    "area_variation_residual",
    "gradient_estimate_K",
    "monitor_uflow_residual",
    "monitor_gradient_estimate",
    "monitor_curvature_evolution",
    "monitor_area_variation",
    "monitor_bound_shape",
    "calibrate_area_sign",
]

MONITOR_COLUMNS = ("step", "s", "dt", "sup_v", "min_g_eig", "sup_H2", "sup_A2", "area", "K_min",
                   "res_uflow", "res_H2", "res_area")
MONITORS = ("uflow", "H2", "area", "gradient")


def default_k_grid():
    """``{0}`` together with 60 geometric points on ``[1e-2, 1e3]``."""
    return np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 60)])


class FlowHalted(RuntimeError):
    """Raised when a step cannot be completed after the allowed retries."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class FlowConfig:
    """Time-stepping and monitoring parameters.

    Parameters
    ----------
    dt : float or None
        Fixed step.  ``None`` selects the CFL policy each step; a fixed
        step larger than the CFL bound is clamped to it.
    c_cfl : float
        CFL constant in ``(0, 1]``.
    max_steps : int
    s_end : float
    snapshot_every : int
        Snapshot cadence in steps; ``0`` keeps only the initial and final states.
    integrator : {"euler", "rk2"}
    max_retries : int
        Step halvings allowed after a loss of spacelikeness.
    monitors : tuple of str
        Subset of ``("uflow", "H2", "area", "gradient")``.
    k_grid : ndarray or None
        Search grid for the gradient-estimate monitor.
    area_sign : float
        Constant ``eps`` in ``dA/ds = eps * int G(H, H) dmu``.
    """

    dt: float | None = None
    c_cfl: float = 0.2
    max_steps: int = 100
    s_end: float = math.inf
    snapshot_every: int = 0
    integrator: str = "euler"
    max_retries: int = 10
    monitors: tuple = MONITORS
    k_grid: np.ndarray | None = None
    area_sign: float = -1.0

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.c_cfl <= 1:
            raise ValueError("c_cfl must lie in (0, 1]")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.integrator not in ("euler", "rk2"):
            raise ValueError("integrator must be 'euler' or 'rk2'")
        unknown = set(self.monitors) - set(MONITORS)
        if unknown:
            raise ValueError(f"unknown monitors {sorted(unknown)}")
        if self.area_sign not in (1.0, -1.0):
            raise ValueError("area_sign must be +1 or -1")
        if self.k_grid is None:
            self.k_grid = default_k_grid()
        self.k_grid = np.sort(np.asarray(self.k_grid, dtype=float))
        if self.k_grid.size == 0 or self.k_grid[0] < 0:
            raise ValueError("k_grid must be nonempty and nonnegative")

    def to_dict(self):
        return {"dt": self.dt, "c_cfl": self.c_cfl, "max_steps": self.max_steps,
                "s_end": None if math.isinf(self.s_end) else self.s_end,
                "snapshot_every": self.snapshot_every, "integrator": self.integrator,
                "max_retries": self.max_retries, "monitors": list(self.monitors),
                "k_grid": [float(k) for k in self.k_grid], "area_sign": self.area_sign}


@dataclass
class FlowState:
    patch: ImmersedPatch
    geom: DerivedGeometry
    s: float = 0.0
    step: int = 0


@dataclass
class FlowTrajectory:
    """Snapshots and monitor rows of a run.

    ``snapshots`` holds ``(step, s, f)`` tuples; ``rows`` holds one dict
    per accepted step keyed by :data:`MONITOR_COLUMNS`.
    """

    initial: ImmersedPatch
    config: FlowConfig
    snapshots: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    sup_H2: list = field(default_factory=list)
    sup_A2: list = field(default_factory=list)
    s_values: list = field(default_factory=list)
    min_H2: list = field(default_factory=list)
    min_A2: list = field(default_factory=list)
    final: FlowState | None = None
    last_fields: dict = field(default_factory=dict)
    halted: str | None = None
    rejections: int = 0
    area_sign_violations: int = 0

    def series(self, column):
        return np.array([r[column] for r in self.rows], dtype=float)

    def snapshot_patch(self, k):
        step_no, s, f = self.snapshots[k]
        return self.initial.with_f(f)


def _min_h(patch):
    return min(patch.grid.h)


def cfl_dt(state: FlowState, c_cfl: float) -> float:
    """``c h^2 inf lambda_min(g) / (1 + sup |A|^2_+)`` over interior nodes."""
    g = state.geom
    lam = g.g_eig[..., 0][g.mask].min()
    return c_cfl * _min_h(state.patch) ** 2 * lam / (1.0 + g.A2[g.mask].max())


def _frozen(patch):
    """Nodes held fixed: the margins of bounded axes."""
    return ~patch.grid.interior_mask()


def _advance(patch, geom, dt, integrator):
    frozen = _frozen(patch)
    vel = geom.H_vec.copy()
    vel[frozen] = 0.0
    if integrator == "euler":
        return patch.with_f(patch.f + dt * vel)
    half = patch.with_f(patch.f + 0.5 * dt * vel)
    vel2 = derive(half).H_vec
    vel2[frozen] = 0.0
    return patch.with_f(patch.f + dt * vel2)


def step(state: FlowState, dt: float, integrator: str = "euler", max_retries: int = 10):
    """Advance one step, halving ``dt`` on loss of spacelikeness.

    Returns
    -------
    new_state : FlowState
    dt_used : float
    retries : int

    Raises
    ------
    FlowHalted
        If every retry fails.
    """
    last_err = None
    for attempt in range(max_retries + 1):
        try:
            new_patch = _advance(state.patch, state.geom, dt, integrator)
            new_geom = derive(new_patch)
            if np.any(new_geom.g_eig[..., 0] <= 0):
                raise NotSpacelikeError(np.argwhere(new_geom.g_eig[..., 0] <= 0), new_geom.g_eig.min())
            return FlowState(new_patch, new_geom, state.s + dt, state.step + 1), dt, attempt
        except (NotSpacelikeError, DegenerateNormalError) as err:
            last_err = err
            dt *= 0.5
    raise FlowHalted(f"step {state.step + 1} failed after {max_retries} retries: {last_err}")


# residual fields ------------------------------------------------------------

def uflow_residual_field(s0: FlowState, s1: FlowState, dt: float) -> np.ndarray:
    """``(u(s+dt) - u(s))/dt - Delta u + g^ij Hess t(d_i f, d_j f)`` at the earlier state, shape ``S+(m,)``."""
    patch, g0 = s0.patch, s0.geom
    ushift = patch.height_shift()
    out = (s1.geom.u - g0.u) / dt
    for c in range(out.shape[-1]):
        sh = [None if s is None else s[c] for s in ushift]
        out[..., c] -= laplace_beltrami(g0.u[..., c], g0.sqrtg, g0.ginv, patch.grid, sh)
    out += g0.trace_hess_t
    return out


def _normal_gradient_H(patch, geom):
    """``(nabla^perp_i H)_b = d_i H_b - H_a C_iab``, shape ``S+(n,m)``."""
    from .submanifold import d1
    grid = patch.grid
    dH = np.stack([d1(geom.H, i, grid.h[i], grid.periodic[i]) for i in range(grid.ndim)], axis=-2)
    return dH - np.einsum("...a,...iab->...ib", geom.H, geom.C)


def curvature_evolution_terms(patch, geom):
    """Return ``(Delta |H|^2_+, |grad H|^2_+, |H.A|^2_+)`` node fields."""
    lap = laplace_beltrami(geom.H2, geom.sqrtg, geom.ginv, patch.grid)
    DH = _normal_gradient_H(patch, geom)
    gradH2 = np.einsum("...ij,...ib,...jb->...", geom.ginv, DH, DH)
    HA = np.einsum("...a,...ija->...ij", geom.H, geom.A)
    HA2 = np.einsum("...ik,...jl,...ij,...kl->...", geom.ginv, geom.ginv, HA, HA)
    return lap, gradH2, HA2


def curvature_evolution_residual_field(s0: FlowState, s1: FlowState, dt: float) -> np.ndarray:
    """``(d/ds - Delta)|H|^2_+ + 2|grad H|^2_+ + 2|H.A|^2_+`` for flat ambients."""
    lap, gradH2, HA2 = curvature_evolution_terms(s0.patch, s0.geom)
    return (s1.geom.H2 - s0.geom.H2) / dt - lap + 2 * gradH2 + 2 * HA2


def area_variation_residual(s0: FlowState, s1: FlowState, dt: float, area_sign: float) -> float:
    """``(Area(s+dt) - Area(s))/dt - eps * int G(H, H) dmu`` at the earlier state."""
    g0 = s0.geom
    w = s0.patch.grid.weights()
    int_GHH = -float(np.sum(g0.H2 * g0.sqrtg * w))
    return (s1.geom.area - g0.area) / dt - area_sign * int_GHH


def _is_flat(ambient):
    if isinstance(ambient, (FlatPseudoEuclidean, NeutralTangentBundle)):
        return True
    return False


def gradient_estimate_K(v, u, v0_sup, u_hist_sup, m, k_grid):
    """Smallest ``K`` on the grid with ``v <= (m + sup v_0) exp(K (sup_hist u - u))`` at every node.

    Returns ``inf`` when no grid value works.
    """
    bound0 = m + v0_sup
    gap = u_hist_sup - u
    need = np.zeros_like(v)
    over = v > bound0
    if np.any(over & (gap <= 0)):
        return math.inf
    # a vanishing gap gives an infinite requirement, i.e. unbounded
    with np.errstate(over="ignore", divide="ignore"):
        need[over] = np.log(v[over] / bound0) / gap[over]
    K = float(need.max()) if need.size else 0.0
    ok = k_grid[k_grid >= K * (1 - 1e-12)]
    return float(ok[0]) if ok.size else math.inf


def _sup(x, mask):
    return float(x[mask].max())


def run(config: FlowConfig, initial: ImmersedPatch) -> FlowTrajectory:
    """Integrate the flow and collect monitors.

    On a halt the trajectory keeps the last valid state and ``halted``
    holds the reason; :class:`FlowHalted` is raised with the trajectory
    attached.
    """
    geom = derive(initial)
    state = FlowState(initial, geom)
    traj = FlowTrajectory(initial=initial, config=config)
    traj.snapshots.append((0, 0.0, initial.f.copy()))
    traj.s_values.append(0.0)
    traj.sup_H2.append(_sup(geom.H2, geom.mask))
    traj.sup_A2.append(_sup(geom.A2, geom.mask))
    traj.min_H2.append(float(geom.H2.min()))
    traj.min_A2.append(float(geom.A2.min()))
    m = initial.ambient.sig.m
    mask = geom.mask
    v0_sup = _sup(geom.v, mask)
    u_hist = _sup(geom.u.sum(axis=-1), mask)
    flat = _is_flat(initial.ambient)
    mons = set(config.monitors)
    while state.step < config.max_steps and state.s < config.s_end * (1 - 1e-14):
        dt = cfl_dt(state, config.c_cfl)
        if config.dt is not None:
            dt = min(config.dt, dt)
        if math.isfinite(config.s_end):
            dt = min(dt, config.s_end - state.s)
        try:
            new, dt_used, retries = step(state, dt, config.integrator, config.max_retries)
        except FlowHalted as err:
            traj.halted = str(err)
            traj.final = state
            if not traj.snapshots or traj.snapshots[-1][0] != state.step:
                traj.snapshots.append((state.step, state.s, state.patch.f.copy()))
            err.trajectory = traj
            raise
        traj.rejections += retries
        g1 = new.geom
        row = {"step": new.step, "s": new.s, "dt": dt_used, "sup_v": _sup(g1.v, mask),
               "min_g_eig": float(g1.g_eig[..., 0][mask].min()), "sup_H2": _sup(g1.H2, mask),
               "sup_A2": _sup(g1.A2, mask), "area": g1.area, "K_min": math.nan,
               "res_uflow": math.nan, "res_H2": math.nan, "res_area": math.nan}
        usum = g1.u.sum(axis=-1)
        u_hist = max(u_hist, _sup(usum, mask))
        if "gradient" in mons:
            row["K_min"] = gradient_estimate_K(g1.v[mask], usum[mask], v0_sup, u_hist, m, config.k_grid)
        if "uflow" in mons:
            fld = uflow_residual_field(state, new, dt_used)
            traj.last_fields["uflow"] = fld
            row["res_uflow"] = float(np.abs(fld[mask]).max())
        if "H2" in mons and flat:
            fld = curvature_evolution_residual_field(state, new, dt_used)
            traj.last_fields["H2"] = fld
            row["res_H2"] = float(np.abs(fld[mask]).max())
        if "area" in mons:
            row["res_area"] = area_variation_residual(state, new, dt_used, config.area_sign)
            observed = _observed_area_sign(state, new, dt_used)
            if observed is not None and observed != config.area_sign:
                traj.area_sign_violations += 1
        traj.rows.append(row)
        traj.s_values.append(new.s)
        traj.sup_H2.append(row["sup_H2"])
        traj.sup_A2.append(row["sup_A2"])
        traj.min_H2.append(float(g1.H2.min()))
        traj.min_A2.append(float(g1.A2.min()))
        state = new
        if config.snapshot_every and state.step % config.snapshot_every == 0:
            traj.snapshots.append((state.step, state.s, state.patch.f.copy()))
    if traj.snapshots[-1][0] != state.step:
        traj.snapshots.append((state.step, state.s, state.patch.f.copy()))
    traj.final = state
    return traj


def _observed_area_sign(s0, s1, dt, rel_floor=1e-3):
    """Sign of ``dA/ds / int G(H,H)`` when both are clearly nonzero, else ``None``."""
    g0 = s0.geom
    w = s0.patch.grid.weights()
    int_GHH = -float(np.sum(g0.H2 * g0.sqrtg * w))
    dA = (s1.geom.area - g0.area) / dt
    if abs(int_GHH) < 1e-12 or abs(dA) < rel_floor * abs(int_GHH):
        return None
    return float(np.sign(dA / int_GHH))


def calibrate_area_sign(patch: ImmersedPatch, dt: float | None = None) -> float:
    """Determine ``eps`` from one small forward step on ``patch``."""
    geom = derive(patch)
    s0 = FlowState(patch, geom)
    dt = 0.1 * cfl_dt(s0, 0.2) if dt is None else dt
    s1, dt_used, _ = step(s0, dt)
    sign = _observed_area_sign(s0, s1, dt_used)
    if sign is None:
        raise ValueError("calibration patch has no measurable mean curvature")
    return sign


# trajectory-level monitors ------------------------------------------------

def monitor_uflow_residual(traj: FlowTrajectory) -> np.ndarray:
    return traj.series("res_uflow")


def monitor_gradient_estimate(traj: FlowTrajectory) -> np.ndarray:
    return traj.series("K_min")


def monitor_curvature_evolution(traj: FlowTrajectory) -> np.ndarray:
    return traj.series("res_H2")


def monitor_area_variation(traj: FlowTrajectory) -> np.ndarray:
    return traj.series("res_area")


def _fit_shape(s, y):
    phi = 1.0 + 1.0 / s
    denom = float(np.sum(phi**2))
    C = float(np.sum(y * phi) / denom) if denom > 0 else 0.0
    if C <= 0:
        return {"C": C, "max_rel_excess": 0.0, "witness_step": None}
    excess = y / (C * phi) - 1.0
    k = int(np.argmax(excess))
    return {"C": C, "max_rel_excess": float(excess[k]), "witness_index": k}


def monitor_bound_shape(traj: FlowTrajectory, s1: float | None = None) -> dict:
    """Least-squares fits of ``sup|H|^2_+`` and ``sup|A|^2_+`` against ``C (1 + 1/s)``.

    Uses snapshots with ``s >= s1`` (default: the first positive ``s``).
    The report has one entry per quantity with the fitted ``C``, the
    largest relative excess ``y / (C (1 + 1/s)) - 1`` and its step.
    """
    s = np.asarray(traj.s_values)
    keep = s > 0 if s1 is None else s >= max(s1, np.finfo(float).tiny)
    steps = np.arange(len(s))[keep]
    report = {}
    for name, series in (("H2", traj.sup_H2), ("A2", traj.sup_A2)):
        y = np.asarray(series)[keep]
        if y.size == 0:
            report[name] = {"C": 0.0, "max_rel_excess": 0.0, "witness_step": None}
            continue
        fit = _fit_shape(s[keep], y)
        idx = fit.pop("witness_index", None)
        fit["witness_step"] = None if idx is None else int(steps[idx])
        report[name] = fit
    return report
