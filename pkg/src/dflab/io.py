"""Config parsing, deterministic report writing and the portable text dump."""

from __future__ import annotations

import configparser
import csv
import io as _io
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelSpace
from .params import PhysParams
from .solvers import SolveOptions

SCHEMA_VERSION = 1
DUMP_MAGIC = "dflab-dump 1"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in re.split(r"[,\s]+", s.strip()) if x)


def _words(s: str) -> tuple:
    return tuple(x for x in re.split(r"[,\s]+", s.strip()) if x)


SCHEMA = {
    "model": {"backend": str, "N": int, "box_len": float, "soften": _opt_float, "seed": int,
              "synth_gap": float, "synth_dim": int, "synth_frame": str},
    "phys": {"alpha": float, "c": float, "Z": float, "q": int},
    "solver": {"tol": float, "max_iter": int, "strategy": str, "ephf_path": str,
               "retract_tol": _opt_float, "R": _opt_float, "n_starts": int, "grad_step": float,
               "max_outer": int, "outer_tol": float, "mittleman_start": str, "ephf_sea": str},
    "sweep": {"vary": str, "values": _floats},
    "run": {"output_dir": str, "seed": int, "workers": int, "figures": _bool},
    "verify": {"claims": _words, "sample_size": int},
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    phys: PhysParams
    solver: SolveOptions
    ephf_sea: str = "df"
    sweep_vary: str | None = None
    sweep_values: tuple = ()
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1
    figures: bool = False
    claims: tuple = ()
    sample_size: int = 100
    resolved: dict = field(default_factory=dict)


def _line_index(text: str) -> dict:
    """Map (section, key) -> line number for error messages."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out[(section, None)] = n
        elif section is not None:
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            out[(section, key)] = n
    return out


def parse_config(text: str, source: str = "<config>", seed: int | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (N, Z, R)
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: missing section header") from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: duplicate key {exc.option!r}") from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: duplicate section {exc.section!r}") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()!r}") from exc
    lines = _line_index(text)
    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}:{lines.get((section, None), '?')}: unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            where = f"{source}:{lines.get((section, key), '?')}"
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc
    if "phys" not in values:
        raise ConfigError(f"{source}: missing required section [phys]")

    def at(section, key=None):
        return f"{source}:{lines.get((section, key), lines.get((section, None), '?'))}"

    run = values.get("run", {})
    run_seed = seed if seed is not None else run.get("seed", 0)
    mvals = dict(values.get("model", {}))
    if seed is not None or "seed" not in mvals:
        mvals["seed"] = run_seed
    try:
        model = ModelConfig(**mvals).validate()
    except ValueError as exc:
        raise ConfigError(f"{at('model')}: {exc}") from exc
    try:
        phys = PhysParams(**values["phys"])
    except TypeError as exc:
        raise ConfigError(f"{at('phys')}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{at('phys')}: {exc}") from exc
    svals = dict(values.get("solver", {}))
    ephf_sea = svals.pop("ephf_sea", "df")
    if ephf_sea not in ("df", "free"):
        raise ConfigError(f"{at('solver', 'ephf_sea')}: ephf_sea must be 'df' or 'free'")
    svals.setdefault("seed", run_seed)
    try:
        solver = SolveOptions(**svals).validate()
    except ValueError as exc:
        raise ConfigError(f"{at('solver')}: {exc}") from exc
    sweep = values.get("sweep", {})
    if sweep:
        if sweep.get("vary") not in ("c", "alpha"):
            raise ConfigError(f"{at('sweep', 'vary')}: vary must be 'c' or 'alpha'")
        if len(sweep.get("values", ())) < 1:
            raise ConfigError(f"{at('sweep', 'values')}: values must list at least one point")
    workers = run.get("workers", 1)
    if workers < 1:
        raise ConfigError(f"{at('run', 'workers')}: workers must be >= 1")
    ver = values.get("verify", {})
    if ver.get("sample_size", 100) < 100:
        raise ConfigError(f"{at('verify', 'sample_size')}: sample_size must be >= 100")
    from .verify import CLAIMS
    for cid in ver.get("claims", ()):
        if cid not in CLAIMS:
            raise ConfigError(f"{at('verify', 'claims')}: unknown claim {cid!r}")
    resolved = {
        "model": {k: getattr(model, k) for k in SCHEMA["model"]},
        "phys": phys.as_dict(),
        "solver": {**{k: getattr(solver, k) for k in SCHEMA["solver"] if k != "ephf_sea"},
                   "ephf_sea": ephf_sea},
        "sweep": {"vary": sweep.get("vary"), "values": list(sweep.get("values", ()))},
        "run": {"seed": run_seed, "workers": workers, "figures": run.get("figures", False)},
        "verify": {"claims": list(ver.get("claims", ())),
                   "sample_size": ver.get("sample_size", 100)},
    }
    return RunConfig(model, phys, solver, ephf_sea, sweep.get("vary"),
                     tuple(sweep.get("values", ())), run.get("output_dir", "out"), run_seed,
                     workers, run.get("figures", False), tuple(ver.get("claims", ())),
                     ver.get("sample_size", 100), resolved)


def load_config(path: str | os.PathLike, seed: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, str(path), seed)


# ---------------------------------------------------------------- output

def _default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats by strings so the JSON stays strict."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if np.isfinite(f) else str(f)
    return o


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, default=_default) + "\n"


def atomic_write(path: str | os.PathLike, data: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def write_csv(path, rows, columns=None) -> Path:
    return atomic_write(path, csv_text(rows, columns))


# ---------------------------------------------------------------- text dump

def _dump_matrix(name: str, a: np.ndarray) -> list[str]:
    a = np.asarray(a)
    cplx = np.iscomplexobj(a)
    shape = a.shape if a.ndim == 2 else (a.shape[0], 1)
    out = [f"{name} {'complex' if cplx else 'real'} {shape[0]} {shape[1]}"]
    for row in a.reshape(shape):
        if cplx:
            out.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
        else:
            out.append(" ".join(f"{x:.17g}" for x in row))
    return out


def dump_arrays(arrays: dict, header: dict) -> str:
    """Header line, JSON header, then per array: ``name kind rows cols`` and
    row-major entries (complex entries as re/im pairs)."""
    lines = [DUMP_MAGIC, json.dumps(header, sort_keys=True, default=_default)]
    for name, a in arrays.items():
        lines += _dump_matrix(name, a)
    return "\n".join(lines) + "\n"


def load_arrays(text: str) -> tuple[dict, dict]:
    lines = text.splitlines()
    if not lines or lines[0] != DUMP_MAGIC:
        raise ValueError("not a dump file")
    header = json.loads(lines[1])
    arrays, i = {}, 2
    while i < len(lines):
        name, kind, r, c = lines[i].split()
        r, c = int(r), int(c)
        vals = np.array([float(x) for ln in lines[i + 1:i + 1 + r] for x in ln.split()])
        a = vals[0::2] + 1j * vals[1::2] if kind == "complex" else vals
        arrays[name] = a.reshape(r, c)
        i += 1 + r
    return arrays, header


def dump_model(m: ModelSpace) -> str:
    header = {"backend": m.backend, "c": m.c, "Z": m.Z, "n_grid": m.n_grid,
              "n_spinor": m.n_spinor, "dim": m.dim, "dx": m.dx, "box_len": m.box_len}
    return dump_arrays({"grid": m.grid, "D_free": m.D_free, "V_mat": m.V_mat,
                        "beta_mat": m.beta_mat, "W_kernel": m.W_kernel,
                        "lap_eigs": m.lap_eigs}, header)


def dump_density(g) -> str:
    mat = g.mat if hasattr(g, "mat") else np.asarray(g)
    return dump_arrays({"gamma": mat}, {"dim": mat.shape[0]})


def load_density(text: str):
    from .density import DensityMatrix
    arrays, _ = load_arrays(text)
    return DensityMatrix(arrays["gamma"])
