"""CSV and manifest persistence.

All numeric output is CSV written with :mod:`csv`.  Floats are written
with ``repr`` so files round-trip exactly and identical runs give identical
bytes.  Non-finite values are spelled ``nan``, ``inf``, and
``unbounded`` for a gradient-estimate constant beyond the search grid.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import _kernels

__all__ = [
    "OUTPUT_ENV",
    "output_root",
    "format_value",
    "write_rows",
    "export_series",
    "write_snapshot",
    "read_snapshot_header",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_profile_csv",
    "write_profile_csv",
    "write_manifest",
    "version_info",
]

OUTPUT_ENV = "SPACELIKE_MCF_OUT"


def output_root() -> Path:
    """Output root from ``$SPACELIKE_MCF_OUT``, else ``./spacelike_mcf_out``."""
    return Path(os.environ.get(OUTPUT_ENV, "spacelike_mcf_out"))


def format_value(x, column=None) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            if column == "K_min" and x > 0:
                return "unbounded"
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_rows(path, columns, rows, header_lines=()):
    """Write dict rows under ``columns``; ``header_lines`` become ``# key: value`` comments."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key, value in header_lines:
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c], c) for c in columns])
    return path


def export_series(traj, path, snapshots: bool = True):
    """Write the monitor CSV and, optionally, one snapshot CSV per stored snapshot.

    With every monitor switched off the monitor CSV holds the header only.
    Returns the list of written paths, monitor CSV first.
    """
    from .flow import MONITOR_COLUMNS
    path = Path(path)
    rows = traj.rows if traj.config.monitors else []
    written = [write_rows(path, MONITOR_COLUMNS, rows)]
    if snapshots:
        for k, (step_no, s, _f) in enumerate(traj.snapshots):
            snap = path.parent / f"snapshot_{step_no:06d}.csv"
            written.append(write_snapshot(traj.snapshot_patch(k), snap, s=s, step=step_no))
    return written


def write_snapshot(patch, path, s=0.0, step=0, geom=None):
    """Patch snapshot: node index, chart coordinates, g eigenvalues, v, |H|^2_+, |A|^2_+."""
    from .submanifold import derive
    geom = derive(patch) if geom is None else geom
    n, d = patch.grid.ndim, patch.ambient.dim
    cols = ([f"i{k}" for k in range(n)] + [f"x{k}" for k in range(d)] + [f"g_eig{k}" for k in range(n)]
            + ["v", "H2", "A2"])
    idx = np.indices(patch.grid.shape).reshape(n, -1).T
    f = patch.f.reshape(-1, d)
    eig = geom.g_eig.reshape(-1, n)
    v, H2, A2 = geom.v.ravel(), geom.H2.ravel(), geom.A2.ravel()
    rows = []
    for p in range(idx.shape[0]):
        vals = list(idx[p]) + list(f[p]) + list(eig[p]) + [v[p], H2[p], A2[p]]
        rows.append(dict(zip(cols, vals)))
    header = [("grid_shape", "x".join(str(k) for k in patch.grid.shape)),
              ("h", ",".join(repr(float(h)) for h in patch.grid.h)),
              ("periodic", ",".join(str(p).lower() for p in patch.grid.periodic)),
              ("ambient", patch.ambient.name), ("ambient_params", json.dumps(patch.ambient.params(), sort_keys=True)),
              ("s", repr(float(s))), ("step", int(step)), ("label", patch.label)]
    return write_rows(path, cols, rows, header)


def read_snapshot_header(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            out[key] = value
    return out


def read_matrix_csv(path):
    """Read a square matrix; an optional ``# signature: n,m`` line gives the signature.

    Returns ``(matrix, (n, m) or None)``.
    """
    sig = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, _, value = s.lstrip("# ").partition(":")
                if key.strip() == "signature":
                    a, b = value.split(",")
                    sig = (int(a), int(b))
                continue
            rows.append(next(csv.reader([s])))
    M = np.array([[float(x) for x in r] for r in rows], dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{path}: matrix must be square, got shape {M.shape}")
    return M, sig


def write_matrix_csv(path, M, sig=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if sig is not None:
            fh.write(f"# signature: {sig[0]},{sig[1]}\n")
        w = csv.writer(fh, lineterminator="\n")
        for r in np.asarray(M, dtype=float):
            w.writerow([repr(float(x)) for x in r])
    return path


def read_profile_csv(path):
    """Two-column ``R,H`` CSV with a header row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if rows and rows[0][0].strip() == "R":
        rows = rows[1:]
    data = np.array([[float(a), float(b)] for a, b in rows])
    return data[:, 0], data[:, 1]


def write_profile_csv(path, R, H):
    rows = [{"R": float(r), "H": float(h)} for r, h in zip(R, H)]
    return write_rows(path, ("R", "H"), rows)


def version_info() -> dict:
    return {"package": __version__, "python": sys.version.split()[0], "numpy": np.__version__,
            "kernel_backend": _kernels.BACKEND, "platform": platform.platform()}


def write_manifest(path, config: dict, outputs, timing: dict, extra: dict | None = None):
    """JSON manifest: resolved configuration, versions, outputs and timing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config": config, "versions": version_info(),
           "outputs": [str(Path(p).name) for p in outputs], "timing": timing}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
