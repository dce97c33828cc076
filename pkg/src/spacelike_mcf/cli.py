"""Command-line entry point.

Usage::

    spacelike-mcf decompose --input M.csv [--n N --m M]
    spacelike-mcf flow      [--config FILE] [--ambient flat --init sine --eps 1e-3 --steps 200 ...]
    spacelike-mcf radial    [--config FILE] [--profile linear --a 1.0 --steps 100 ...]
    spacelike-mcf tcc       [--config FILE] [--ambient product --factor2 sphere:1.41 --samples 100000 ...]
    spacelike-mcf check     [--criteria 1,2,3]

Flags override keys of the configuration file.  Every run writes its CSV
outputs and a ``manifest.json`` to ``--out``, else ``[run] output``, else
``$SPACELIKE_MCF_OUT/<subcommand>``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical halt,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, load_config

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_HALT", "EXIT_INVARIANT"]

EXIT_OK, EXIT_CONFIG, EXIT_HALT, EXIT_INVARIANT = 0, 2, 3, 4


class InvariantViolation(RuntimeError):
    """A computed result broke a property that must hold."""


# flag -> (section, key)
_COMMON = {"seed": ("run", "seed"), "out": ("run", "output")}
_AMBIENT = {"ambient": ("ambient", "name"), "n": ("ambient", "n"), "m": ("ambient", "m"),
            "time_warp": ("ambient", "time_warp"), "factor1": ("ambient", "factor1"),
            "factor2": ("ambient", "factor2")}
_FLOW = {"init": ("initial", "family"), "N": ("initial", "N"), "eps": ("initial", "eps"),
         "tilt": ("initial", "tilt"), "slope": ("initial", "slope"), "offset": ("initial", "offset"),
         "angles": ("initial", "angles"), "steps": ("flow", "max_steps"), "dt": ("flow", "dt"),
         "c_cfl": ("flow", "c_cfl"), "s_end": ("flow", "s_end"), "snapshot_every": ("flow", "snapshot_every"),
         "integrator": ("flow", "integrator"), "max_retries": ("flow", "max_retries"),
         "monitors": ("flow", "monitors"), "area_sign": ("flow", "area_sign")}
_RADIAL = {"profile": ("radial", "profile"), "a": ("radial", "a"), "c": ("radial", "c"), "amp": ("radial", "amp"),
           "r_min": ("radial", "r_min"), "r_max": ("radial", "r_max"), "h": ("radial", "h"),
           "steps": ("radial", "steps"), "dt": ("radial", "dt"), "c_cfl": ("radial", "c_cfl"),
           "profile_csv": ("radial", "profile_csv")}
_TCC = {"samples": ("tcc", "n_samples"), "points": ("tcc", "n_points"), "min_gram_eig": ("tcc", "min_gram_eig"),
        "region_lo": ("tcc", "region_lo"), "region_hi": ("tcc", "region_hi")}
_DECOMPOSE = {"input": ("decompose", "input"), "n": ("decompose", "n"), "m": ("decompose", "m")}

_FLAGS = {"flow": {**_COMMON, **_AMBIENT, **_FLOW}, "radial": {**_COMMON, **_RADIAL},
          "tcc": {**_COMMON, **_AMBIENT, **_TCC}, "decompose": {**_COMMON, **_DECOMPOSE},
          "check": dict(_COMMON)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spacelike-mcf", description="Spacelike mean curvature flow in indefinite signature.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {"decompose": "normal form of a pseudo-orthogonal matrix read from CSV",
             "flow": "evolve a spacelike graph patch and record monitors",
             "radial": "evolve a radial profile in the neutral tangent bundle of R^3",
             "tcc": "sample the timelike curvature constant of an ambient space",
             "check": "run the acceptance criteria and print a pass/fail table"}
    for name, flags in _FLAGS.items():
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--config", help="INI configuration file")
        for flag in flags:
            p.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None, metavar=flag.upper())
        if name == "check":
            p.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default: all)")
    return parser


def _overrides(sub, ns):
    out = {}
    for flag, key in _FLAGS[sub].items():
        val = getattr(ns, flag, None)
        if val is not None:
            out[key] = val
    return out


def _out_dir(cfg, sub) -> Path:
    given = cfg.get("run", "output")
    path = Path(given) if given else io.output_root() / sub
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"output directory {path} is not writable: {err}") from err
    return path


# subcommands ---------------------------------------------------------------

def _infer_signature(M):
    """Split ``d = n + m`` with the smallest O(n, m) defect; ties go to the larger ``n``."""
    from .indefinite import PseudoOrthogonalMatrix, Signature, onm_defect
    d = M.shape[0]
    best = None
    for m in range(1, d):
        sig = Signature(d - m, m)
        dfx = onm_defect(PseudoOrthogonalMatrix.from_matrix(M, sig))
        if best is None or dfx < best[1] - 1e-12:
            best = (sig, dfx)
    return best[0]


def _run_decompose(cfg, out):
    from .indefinite import PseudoOrthogonalMatrix, Signature, onm_normal_form, reconstruct
    src = cfg.get("decompose", "input")
    if not src:
        raise ConfigError("decompose needs --input M.csv")
    try:
        M, sig = io.read_matrix_csv(src)
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot read matrix: {err}") from err
    n, m = cfg.get("decompose", "n"), cfg.get("decompose", "m")
    d = M.shape[0]
    if n is not None or m is not None:
        n = d - m if n is None else n
        m = d - n if m is None else m
        sig = (n, m)
    if sig is None:
        s = _infer_signature(M)
        sig = (s.n, s.m)
    if sig[0] + sig[1] != d or min(sig) < 1:
        raise ConfigError(f"signature {sig} does not match a {d}x{d} matrix")
    pm = PseudoOrthogonalMatrix.from_matrix(M, Signature(*sig))
    try:
        nf = onm_normal_form(pm)
    except ValueError as err:
        raise InvariantViolation(str(err)) from err
    doc = nf.to_dict()
    doc["invariant_defects"] = nf.invariant_defects()
    doc["reconstruction_error"] = float(np.abs(reconstruct(nf).matrix - M).max())
    path = out / "normal_form.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc, indent=2, sort_keys=True))
    return [path], {"signature": list(sig)}


def _run_flow(cfg, out):
    from .flow import run
    from .initial_data import make_initial
    amb = cfg.build_ambient()
    ip = cfg.initial_params()
    family, N = ip.pop("family"), ip.pop("N")
    try:
        patch = make_initial(amb, family, N, **ip)
    except ValueError as err:
        raise ConfigError(f"[initial] {err}") from err
    fc = cfg.flow_config()
    traj = run(fc, patch)
    written = io.export_series(traj, out / "monitors.csv")
    final = traj.final.geom
    if min(traj.min_H2) < 0 or min(traj.min_A2) < 0:
        raise InvariantViolation("|H|^2_+ or |A|^2_+ became negative")
    summary = {"steps": traj.final.step, "s_final": traj.final.s, "rejections": traj.rejections,
               "area_sign_violations": traj.area_sign_violations, "sup_v_final": float(final.v[final.mask].max())}
    print(f"flow: {summary['steps']} steps to s = {summary['s_final']:.6g}, "
          f"{len(traj.snapshots)} snapshots, output {out}")
    return written, {"summary": summary}


def _run_radial(cfg, out):
    from .radial import RadialProfile, RadialRun, make_profile, radial_run
    r = cfg.sections["radial"]
    if r["profile_csv"]:
        try:
            R, H = io.read_profile_csv(r["profile_csv"])
            prof = RadialProfile(R, H, "csv")
        except (OSError, ValueError) as err:
            raise ConfigError(f"cannot read profile: {err}") from err
    else:
        try:
            prof = make_profile(r["profile"], R_min=r["r_min"], R_max=r["r_max"], h=r["h"],
                                a=r["a"], c=r["c"], amp=r["amp"])
        except ValueError as err:
            raise ConfigError(f"[radial] {err}") from err
    if not prof.in_window():
        raise ConfigError("initial profile is outside the spacelike window (need H > 0 and H' > 0)")
    written = [io.write_profile_csv(out / "profile_initial.csv", prof.R, prof.H)]
    result = radial_run(prof, r["steps"], dt=r["dt"], c_cfl=r["c_cfl"])
    written.append(io.write_rows(out / "radial_monitors.csv", RadialRun.COLUMNS, result.rows))
    written.append(io.write_profile_csv(out / "profile_final.csv", result.final.R, result.final.H))
    dev = result.rows[-1]["sup_dev"] if result.rows else 0.0
    print(f"radial: {len(result.rows)} steps, final sup|H - H_ref| = {dev:.3e}, output {out}")
    return written, {"summary": {"steps": len(result.rows), "final_sup_dev": dev}}


def _default_region(amb):
    from .ambient import ProductMetric, RoundSphere
    if isinstance(amb, ProductMetric):
        lo, hi = [], []
        for fac in (amb.f1, amb.f2):
            if isinstance(fac, RoundSphere):
                lo += [0.3, 0.0]
                hi += [math.pi - 0.3, 2 * math.pi]
            else:
                lo += [-1.0] * fac.dim
                hi += [1.0] * fac.dim
        return lo, hi
    return [-1.0] * amb.dim, [1.0] * amb.dim


def _run_tcc(cfg, out):
    from .ambient import DomainError, tcc_estimate
    amb = cfg.build_ambient()
    t = cfg.sections["tcc"]
    lo, hi = _default_region(amb)
    lo = t["region_lo"] or lo
    hi = t["region_hi"] or hi
    try:
        est = tcc_estimate(amb, (lo, hi), t["n_samples"], seed=cfg.seed, n_points=t["n_points"],
                           min_gram_eig=t["min_gram_eig"])
    except (ValueError, DomainError) as err:
        raise ConfigError(f"[tcc] {err}") from err
    row = {"k_est": est.k_est, "ratio_min": est.ratio_min, "n_samples": est.n_samples,
           "n_rejected": est.n_rejected}
    cols = list(row)
    for k, x in enumerate(est.witness["point"]):
        row[f"point{k}"] = float(x)
        cols.append(f"point{k}")
    path = io.write_rows(out / "tcc.csv", cols, [row])
    print(f"tcc: k_est = {est.k_est:.6g} (min ratio {est.ratio_min:.6g}) from {est.n_samples} planes")
    return [path], {"summary": row}


def _run_check(cfg, out, criteria):
    from .acceptance import run_criteria
    numbers = None
    if criteria:
        try:
            numbers = {int(x) for x in criteria.split(",") if x.strip()}
        except ValueError as err:
            raise ConfigError(f"--criteria: {err}") from err
    results = run_criteria(numbers, stream=sys.stdout)
    rows = [{"criterion": r.number, "title": r.title, "passed": r.passed, "seconds": round(r.seconds, 3),
             "summary": r.summary} for r in results]
    path = io.write_rows(out / "check.csv", ("criterion", "title", "passed", "seconds", "summary"), rows)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    if n_pass != len(results):
        raise InvariantViolation(f"{len(results) - n_pass} criteria failed")
    return [path], {"summary": {"passed": n_pass, "total": len(results)}}


def main(argv=None) -> int:
    from .ambient import DomainError
    from .flow import FlowHalted
    from .radial import RadialHalted
    from .submanifold import DegenerateNormalError, NotSpacelikeError
    argv = sys.argv[1:] if argv is None else list(argv)
    t0 = time.perf_counter()
    out = None
    written = []
    try:
        ns = build_parser().parse_args(argv)
        sub = ns.subcommand
        cfg = load_config(sub, ns.config, _overrides(sub, ns))
        out = _out_dir(cfg, sub)
        runner = {"decompose": _run_decompose, "flow": _run_flow, "radial": _run_radial, "tcc": _run_tcc}
        if sub == "check":
            written, extra = _run_check(cfg, out, ns.criteria)
        else:
            written, extra = runner[sub](cfg, out)
        code, status = EXIT_OK, "ok"
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlowHalted, RadialHalted, NotSpacelikeError, DegenerateNormalError, DomainError) as err:
        print(f"numerical halt: {err}", file=sys.stderr)
        code, status, extra = EXIT_HALT, f"halted: {err}", {}
        trajectory = getattr(err, "trajectory", None)
        if trajectory is not None and trajectory.rows and out is not None:
            written = io.export_series(trajectory, out / "monitors.csv")
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        code, status, extra = EXIT_INVARIANT, f"invariant violation: {err}", {}
    if out is None:
        return code
    timing = {"wall_seconds": time.perf_counter() - t0}
    io.write_manifest(out / "manifest.json", cfg.to_dict(), written, timing,
                      {"status": status, "exit_code": code, "argv": argv, **extra})
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
