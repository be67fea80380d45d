import json
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dflab.io import (SCHEMA_VERSION, ConfigError, atomic_write, csv_text, dump_density,
                      dump_model, dumps_json, load_arrays, load_density, parse_config)
from dflab.model import ModelConfig, build_model
from dflab.params import PhysParams

GOOD = """
[model]
backend = synthetic
synth_dim = 12

[phys]
alpha = 0.5
c = 10
Z = 1
q = 2

[solver]
tol = 1e-8
R = auto

[sweep]
vary = alpha
values = 0.1, 0.2

[run]
seed = 4
workers = 2
"""


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.model.backend == "synthetic" and cfg.model.synth_dim == 12
    assert cfg.phys == PhysParams(0.5, 10.0, 1.0, 2)
    assert cfg.solver.tol == 1e-8 and cfg.solver.R is None
    assert cfg.sweep_vary == "alpha" and cfg.sweep_values == (0.1, 0.2)
    assert cfg.workers == 2 and cfg.seed == 4
    assert cfg.model.seed == 4 and cfg.solver.seed == 4
    assert cfg.resolved["phys"] == {"alpha": 0.5, "c": 10.0, "Z": 1.0, "q": 2}


def test_seed_override_reaches_every_consumer():
    cfg = parse_config(GOOD, seed=99)
    assert cfg.seed == cfg.model.seed == cfg.solver.seed == 99
    assert cfg.resolved["run"]["seed"] == 99


@pytest.mark.parametrize("text,line,needle", [
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\nspeed = 3\n", 6, "unknown key 'speed'"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[extra]\nx = 1\n", 6, "unknown section"),
    ("alpha = 1\n", 1, "missing section header"),
    ("[phys]\nalpha = one\nc = 2\nZ = 0\nq = 1\n", 2, "bad value"),
    ("[phys]\nalpha = 1\nalpha = 2\n", 3, "duplicate key"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[sweep]\nvary = Z\nvalues = 1\n", 7, "vary"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[run]\nworkers = 0\n", 7, "workers"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[verify]\nclaims = nope\n", 7, "unknown claim"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[verify]\nsample_size = 5\n", 7, "sample_size"),
    ("[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n[solver]\nstrategy = fast\n", 6, "strategy"),
    ("[model]\nN = 7\n[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\n", 1, "N must be"),
    ("[phys]\nalpha = -1\nc = 2\nZ = 0\nq = 1\n", 1, "alpha"),
])
def test_config_errors_carry_line_numbers(text, line, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "run.ini")
    msg = str(err.value)
    assert msg.startswith(f"run.ini:{line}:") and needle in msg


def test_missing_phys_section():
    with pytest.raises(ConfigError, match=r"\[phys\]"):
        parse_config("[model]\nN = 16\n")


def test_json_is_sorted_and_strict():
    text = dumps_json({"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)],
                       "c": float("inf"), "d": np.arange(2.0)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    obj = json.loads(text)
    assert obj == {"a": [2, True], "b": 1.5, "c": "inf", "d": [0.0, 1.0]}
    assert SCHEMA_VERSION == 1


def test_atomic_write_replaces_without_leftovers(tmp_path):
    target = tmp_path / "sub" / "x.json"
    atomic_write(target, "one")
    atomic_write(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["x.json"]


def test_csv_uses_round_trip_floats():
    text = csv_text([{"a": 0.1 + 0.2, "b": "x"}, {"a": 1.0, "c": True}])
    lines = text.splitlines()
    assert lines[0] == "a,b,c"
    assert float(lines[1].split(",")[0]) == 0.1 + 0.2


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_density_dump_roundtrip_is_exact(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = a + a.conj().T
    g = load_density(dump_density(a))
    assert np.array_equal(g.mat, a)


def test_model_dump_layout_and_roundtrip():
    p = PhysParams(0.1, 3.0, 0.5, 1)
    m = build_model(ModelConfig("dirac1d", N=8, box_len=4.0), p)
    text = dump_model(m)
    lines = text.splitlines()
    assert lines[0] == "dflab-dump 1"
    assert json.loads(lines[1])["dim"] == 16
    assert lines[2] == "grid real 8 1"
    arrays, header = load_arrays(text)
    assert header["c"] == 3.0
    for name in ("D_free", "V_mat", "beta_mat", "W_kernel"):
        assert np.array_equal(arrays[name], getattr(m, name))
    assert np.array_equal(arrays["grid"].ravel(), m.grid)


def test_load_rejects_foreign_text():
    with pytest.raises(ValueError):
        load_arrays("hello\n")
