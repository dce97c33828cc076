import math

import pytest

from spacelike_mcf.ambient import FlatPseudoEuclidean, ProductMetric
from spacelike_mcf.config import ConfigError, load_config, parse_factor


def write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_defaults():
    cfg = load_config("flow")
    assert cfg.seed == 0
    assert isinstance(cfg.build_ambient(), FlatPseudoEuclidean)
    fc = cfg.flow_config()
    assert fc.dt is None and math.isinf(fc.s_end) and fc.max_steps == 100
    assert len(fc.k_grid) == 61


def test_file_and_override(tmp_path):
    p = write(tmp_path, "[ambient]\nname = product\nfactor1 = sphere:2.0\n[flow]\nmax_steps = 7\n")
    cfg = load_config("flow", p, {("flow", "max_steps"): "9"})
    assert cfg.flow_config().max_steps == 9
    amb = cfg.build_ambient()
    assert isinstance(amb, ProductMetric) and amb.f1.radius == 2.0
    assert cfg.to_dict()["source"] == str(p)


def test_unknown_section_and_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown section"):
        load_config("flow", write(tmp_path, "[solver]\nx = 1\n"))
    with pytest.raises(ConfigError, match="unknown key"):
        load_config("flow", write(tmp_path, "[flow]\nsteps = 1\n"))


def test_bad_values(tmp_path):
    with pytest.raises(ConfigError, match="max_steps"):
        load_config("flow", write(tmp_path, "[flow]\nmax_steps = many\n"))
    with pytest.raises(ConfigError, match="integrator"):
        load_config("flow", overrides={("flow", "integrator"): "rk4"})
    with pytest.raises(ConfigError, match="ambient"):
        load_config("flow", overrides={("ambient", "name"): "de_sitter"})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config("flow", tmp_path / "nope.ini")


def test_initial_params_slope():
    cfg = load_config("flow", overrides={("initial", "slope"): "0.1, 0.2"})
    assert cfg.initial_params()["slope"] == [0.1, 0.2]


def test_parse_factor():
    assert parse_factor("sphere:1.5") == {"kind": "sphere", "radius": 1.5}
    assert parse_factor("flat:2") == {"kind": "flat", "dim": 2}
    with pytest.raises(ConfigError):
        parse_factor("torus:1")
    with pytest.raises(ConfigError):
        parse_factor("sphere:-1")
