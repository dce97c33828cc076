"""Run configuration: an INI file plus command-line overrides.

Sections and keys (all optional; defaults shown in :data:`SCHEMA`)::

    [run]        output, seed
    [ambient]    name (flat | neutral | product), n, m, time_warp,
                 factor1, factor2   (``sphere:<radius>`` or ``flat:<dim>``)
    [initial]    family (flat | affine | sine | boosted), N, eps, tilt,
                 slope, offset, angles
    [flow]       dt (blank for CFL), c_cfl, max_steps, s_end, snapshot_every,
                 integrator (euler | rk2), max_retries, monitors, area_sign,
                 k_min, k_max, k_points
    [radial]     profile (linear | cubic | bump | csv), a, c, amp, r_min, r_max,
                 h, steps, dt, c_cfl, profile_csv
    [tcc]        n_samples, n_points, min_gram_eig, region_lo, region_hi
    [decompose]  input, n, m

Unknown sections or keys are rejected with an explicit message.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flow import MONITORS, FlowConfig

__all__ = ["ConfigError", "SCHEMA", "RunConfig", "load_config", "parse_factor", "SUBCOMMANDS"]

SUBCOMMANDS = ("decompose", "flow", "radial", "tcc", "check")


class ConfigError(ValueError):
    """Invalid configuration file or override."""


def _float(s):
    return float(s)


def _opt_float(s):
    s = s.strip().lower()
    return None if s in ("", "none", "cfl") else float(s)


def _int(s):
    return int(s)


def _opt_int(s):
    s = s.strip().lower()
    return None if s in ("", "none") else int(s)


def _str(s):
    return s.strip()


def _opt_str(s):
    s = s.strip()
    return s or None


def _floats(s):
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _strs(s):
    return [x.strip() for x in s.split(",") if x.strip()]


SCHEMA = {
    "run": {"output": (_opt_str, ""), "seed": (_int, "0")},
    "ambient": {"name": (_str, "flat"), "n": (_int, "2"), "m": (_int, "1"), "time_warp": (_float, "0.0"),
                "factor1": (_str, "sphere:1.0"), "factor2": (_str, "flat:1")},
    "initial": {"family": (_str, "sine"), "N": (_int, "32"), "eps": (_float, "0.1"), "tilt": (_float, "0.0"),
                "slope": (_floats, "0.6"), "offset": (_float, "0.0"), "angles": (_floats, "0.5")},
    "flow": {"dt": (_opt_float, ""), "c_cfl": (_float, "0.2"), "max_steps": (_int, "100"),
             "s_end": (_opt_float, ""), "snapshot_every": (_int, "0"), "integrator": (_str, "euler"),
             "max_retries": (_int, "10"), "monitors": (_strs, ",".join(MONITORS)), "area_sign": (_float, "-1"),
             "k_min": (_float, "1e-2"), "k_max": (_float, "1e3"), "k_points": (_int, "60")},
    "radial": {"profile": (_str, "linear"), "a": (_float, "1.0"), "c": (_float, "1.0"), "amp": (_float, "0.1"),
               "r_min": (_float, "0.5"), "r_max": (_float, "2.0"), "h": (_float, "0.03125"),
               "steps": (_int, "100"), "dt": (_opt_float, ""), "c_cfl": (_float, "0.2"),
               "profile_csv": (_opt_str, "")},
    "tcc": {"n_samples": (_int, "100000"), "n_points": (_int, "32"), "min_gram_eig": (_float, "0.1"),
            "region_lo": (_floats, ""), "region_hi": (_floats, "")},
    "decompose": {"input": (_opt_str, ""), "n": (_opt_int, ""), "m": (_opt_int, "")},
}


def parse_factor(text: str) -> dict:
    """``sphere:<radius>`` or ``flat:<dim>`` to a factor dict."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "sphere":
        r = float(arg) if arg.strip() else 1.0
        if not r > 0:
            raise ConfigError("sphere radius must be positive")
        return {"kind": "sphere", "radius": r}
    if kind == "flat":
        return {"kind": "flat", "dim": int(arg) if arg.strip() else 1}
    raise ConfigError(f"unknown factor {text!r}; use sphere:<radius> or flat:<dim>")


@dataclass
class RunConfig:
    """Validated configuration of one CLI run."""

    subcommand: str
    sections: dict = field(default_factory=dict)
    source: str | None = None

    def get(self, section, key):
        return self.sections[section][key]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    def ambient_params(self) -> dict:
        a = self.sections["ambient"]
        name = a["name"]
        if name == "flat":
            return {"name": name, "n": a["n"], "m": a["m"], "time_warp": a["time_warp"]}
        if name == "neutral":
            return {"name": name, "n": a["n"]}
        if name == "product":
            return {"name": name, "factor1": parse_factor(a["factor1"]), "factor2": parse_factor(a["factor2"])}
        raise ConfigError(f"unknown ambient {name!r}; choose flat, neutral or product")

    def build_ambient(self):
        from .ambient import make_ambient
        params = self.ambient_params()
        name = params.pop("name")
        try:
            return make_ambient(name, **params)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def initial_params(self) -> dict:
        s = dict(self.sections["initial"])
        family = s.pop("family")
        N = s.pop("N")
        slope = s["slope"]
        s["slope"] = slope[0] if len(slope) == 1 else slope
        return {"family": family, "N": N, **s}

    def flow_config(self) -> FlowConfig:
        f = self.sections["flow"]
        k_grid = np.concatenate([[0.0], np.geomspace(f["k_min"], f["k_max"], f["k_points"])])
        try:
            return FlowConfig(dt=f["dt"], c_cfl=f["c_cfl"], max_steps=f["max_steps"],
                              s_end=math.inf if f["s_end"] is None else f["s_end"],
                              snapshot_every=f["snapshot_every"], integrator=f["integrator"],
                              max_retries=f["max_retries"], monitors=tuple(f["monitors"]),
                              k_grid=k_grid, area_sign=f["area_sign"])
        except ValueError as err:
            raise ConfigError(f"[flow] {err}") from err

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "source": self.source,
                "sections": {k: dict(v) for k, v in self.sections.items()}}


def load_config(subcommand: str, path=None, overrides: dict | None = None) -> RunConfig:
    """Read an optional INI file, apply ``{(section, key): text}`` overrides and validate.

    Raises
    ------
    ConfigError
        On unreadable files, unknown sections or keys, or unparsable values.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            parser.read(p)
        except configparser.Error as err:
            raise ConfigError(f"cannot parse {p}: {err}") from err
    raw = {sec: {k: v for k, (_, v) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; allowed: {', '.join(SCHEMA)}")
        for key, value in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; allowed: {', '.join(SCHEMA[sec])}")
            raw[sec][key] = value
    for (sec, key), value in (overrides or {}).items():
        if value is None:
            continue
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown override {sec}.{key}")
        raw[sec][key] = str(value)
    sections = {}
    for sec, keys in SCHEMA.items():
        sections[sec] = {}
        for key, (conv, _) in keys.items():
            try:
                sections[sec][key] = conv(raw[sec][key])
            except (TypeError, ValueError) as err:
                raise ConfigError(f"[{sec}] {key} = {raw[sec][key]!r}: {err}") from err
    cfg = RunConfig(subcommand, sections, None if path is None else str(path))
    if subcommand == "flow":
        cfg.ambient_params()
        cfg.flow_config()
        if sections["initial"]["N"] < 5:
            raise ConfigError("[initial] N must be at least 5")
    return cfg
