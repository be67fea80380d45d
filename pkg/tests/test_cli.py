import json
import time

import numpy as np
import pytest

from dflab import cli
from dflab import verify as V
from dflab.io import load_arrays
from dflab.model import ModelConfig, build_model
from dflab.params import PhysParams

SYNTH = """
[model]
backend = synthetic
synth_dim = 12
seed = 2

[phys]
alpha = {alpha}
c = 10
Z = 0.5
q = 2

[sweep]
vary = alpha
values = 0.1, 0.2, 0.4

[run]
seed = 3
"""


def _cfg(tmp_path, alpha=0.3, text=None, name="run.ini"):
    path = tmp_path / name
    path.write_text(text if text is not None else SYNTH.format(alpha=alpha))
    return str(path)




def test_zero_alpha_report_is_linear_filling(tmp_path):
    cfg = _cfg(tmp_path, alpha=0.0)
    out = tmp_path / "out"
    assert cli.main(["solve-df", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "solve_df.json").read_text())
    m = build_model(ModelConfig("synthetic", synth_dim=12, seed=2), PhysParams(0.0, 10.0, 0.5, 2))
    vals = np.linalg.eigvalsh(m.D_free - m.V_mat)
    expected = float(np.sum(np.sort(vals[vals > 0])[:2] - 100.0))
    assert rep["report"]["energy"] == pytest.approx(expected, rel=1e-10)
    assert rep["schema_version"] == 1
    assert rep["config"]["phys"]["alpha"] == 0.0
    assert "assumption_1" in rep["assumption_status"]
    occ = (out / "solve_df_occupations.csv").read_text().splitlines()
    assert occ[0] == "index,occupation,orbital_energy,level"
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["exit_code"] == 0 and "solve_df.json" in meta["files"]


def _outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "metadata.json"}


@pytest.mark.parametrize("command", ["solve-df", "solve-ephf", "mittleman", "sweep", "dump-model"])
def test_reruns_are_byte_identical(tmp_path, command):
    cfg = _cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main([command, "--config", cfg, "--out", str(a)]) == 0
    assert cli.main([command, "--config", cfg, "--out", str(b)]) == 0
    assert _outputs(a) == _outputs(b) and _outputs(a)


def test_shipped_default_config_is_deterministic(tmp_path):
    import pathlib
    cfg = str(pathlib.Path(__file__).parents[1] / "configs" / "default.ini")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve-df", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["solve-df", "--config", cfg, "--out", str(b)]) == 0
    assert _outputs(a) == _outputs(b)


def test_malformed_config_exits_2_with_line(tmp_path, capsys):
    cfg = _cfg(tmp_path, text="[phys]\nalpha = 1\nc = 2\nZ = 0\nq = 1\nwhat = 3\n")
    assert cli.main(["solve-df", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "run.ini:6:" in capsys.readouterr().err
    assert cli.main(["solve-df", "--config", str(tmp_path / "missing.ini")]) == 2


def test_numeric_failure_exits_3(tmp_path):
    text = SYNTH.format(alpha=0.3) + "\n[solver]\nmax_iter = 1\ntol = 1e-15\n"
    out = tmp_path / "o"
    assert cli.main(["solve-df", "--config", _cfg(tmp_path, text=text), "--out", str(out)]) == 3
    rep = json.loads((out / "solve_df.json").read_text())
    assert rep["error"].startswith("SolverError") and "report" in rep


def test_sweep_rows_and_columns(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", _cfg(tmp_path), "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert {"E_q", "e_gstar", "delta"} <= set(header)
    assert len(lines) == 1 + 3
    alphas = [float(r.split(",")[header.index("alpha")]) for r in lines[1:]]
    assert alphas == [0.1, 0.2, 0.4]


def test_sweep_without_section_is_config_error(tmp_path):
    text = "[phys]\nalpha = 1\nc = 20\nZ = 0\nq = 1\n"
    assert cli.main(["sweep", "--config", _cfg(tmp_path, text=text)]) == 2


def test_mittleman_trajectory_csv(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["mittleman", "--config", _cfg(tmp_path), "--out", str(out)]) == 0
    lines = (out / "mittleman_trajectory.csv").read_text().splitlines()
    assert lines[0] == "step,energy,increment,monotone"
    assert all(r.endswith("True") for r in lines[1:])
    rep = json.loads((out / "mittleman.json").read_text())
    assert rep["mittleman"]["label"].startswith("lower estimate")


def test_verify_inequalities_on_tiny_model(tmp_path):
    out = tmp_path / "o"
    t0 = time.perf_counter()
    assert cli.main(["verify", "--config", _cfg(tmp_path), "--claims", "inequalities",
                     "--out", str(out)]) == 0
    assert time.perf_counter() - t0 < 60.0
    manifest = json.loads((out / "claims.json").read_text())
    assert manifest["all_passed"] and manifest["claims"][0]["claim_id"] == "inequalities"


def test_verify_failure_exits_4(tmp_path, monkeypatch):
    def failing(*a, **k):
        return V.ClaimResult("inequalities", {}, {}, {}, False, [("x", False, "forced")],
                             {"t": [{"c": 1.0, "v": 2.0}]})
    monkeypatch.setattr(V, "check_inequalities", failing)
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", _cfg(tmp_path), "--claims", "inequalities",
                     "--out", str(out)]) == 4
    assert (out / "claim_inequalities_t.csv").exists()
    assert not json.loads((out / "claims.json").read_text())["all_passed"]


def test_unknown_claim_flag_is_config_error(tmp_path):
    assert cli.main(["verify", "--config", _cfg(tmp_path), "--claims", "bogus"]) == 2


def test_output_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("OUTPUT_DIR", str(target))
    assert cli.main(["dump-model", "--config", _cfg(tmp_path)]) == 0
    arrays, header = load_arrays((target / "model.txt").read_text())
    assert header["dim"] == 12 and arrays["D_free"].shape == (12, 12)


def test_seed_flag_changes_synthetic_model(tmp_path):
    text = SYNTH.format(alpha=0.3).replace("seed = 2\n", "")
    cfg = _cfg(tmp_path, text=text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["dump-model", "--config", cfg, "--out", str(a), "--seed", "1"]) == 0
    assert cli.main(["dump-model", "--config", cfg, "--out", str(b), "--seed", "2"]) == 0
    assert (a / "model.txt").read_bytes() != (b / "model.txt").read_bytes()


def test_figures_are_opt_in(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", _cfg(tmp_path), "--out", str(a)]) == 0
    assert not list(a.glob("*.png"))
    assert cli.main(["sweep", "--config", _cfg(tmp_path), "--out", str(b), "--figures"]) == 0
    assert (b / "sweep_delta.png").stat().st_size > 0
