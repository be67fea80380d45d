"""Command-line front end: ``dflab <command> --config run.ini``.

Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 claim failure.
Reports are JSON (sorted keys, ``schema_version``) plus CSV tables; wall-clock
data goes to ``metadata.json`` so the reports themselves are reproducible.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .io import (SCHEMA_VERSION, ConfigError, RunConfig, atomic_write, dump_density, dump_model,
                 load_config, write_csv, write_json)
from .meanfield import DegeneratePairError
from .model import GapCollapseError, build_model
from .params import DomainError, assumption_stamp, default_radius
from .retraction import RetractionError
from .solvers import SolveReport, SolverError, free_sea, mittleman, sea_of, solve_df, solve_ephf
from . import verify as V

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CLAIM = 0, 2, 3, 4
NUMERIC_ERRORS = (SolverError, RetractionError, GapCollapseError, DegeneratePairError,
                  DomainError, np.linalg.LinAlgError, FloatingPointError)
OCCUPATION_COLUMNS = ["index", "occupation", "orbital_energy", "level"]


class Run:
    """Output location plus the bits shared by every report."""

    def __init__(self, cfg: RunConfig, out: Path, command: str):
        self.cfg, self.out, self.command = cfg, out, command
        self.t0 = time.perf_counter()
        self.files: list[str] = []

    def report(self, body: dict, stamp: dict | None = None) -> dict:
        R = self.cfg.solver.R if self.cfg.solver.R is not None else default_radius(0.0, self.cfg.phys.q)
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.cfg.resolved,
            "assumption_status": stamp if stamp is not None else assumption_stamp(self.cfg.phys, R),
            **body,
        }

    def json(self, name: str, obj: dict):
        write_json(self.out / name, obj)
        self.files.append(name)

    def csv(self, name: str, rows, columns=None):
        write_csv(self.out / name, rows, columns)
        self.files.append(name)

    def text(self, name: str, data: str):
        atomic_write(self.out / name, data)
        self.files.append(name)

    def finish(self, code: int, note: str | None = None) -> int:
        meta = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "exit_code": code,
            "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_seconds": round(time.perf_counter() - self.t0, 3),
            "files": sorted(self.files),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "dflab": __version__,
        }
        if note:
            meta["note"] = note
        write_json(self.out / "metadata.json", meta)
        return code


def _occupation_rows(rep: SolveReport) -> list[dict]:
    """Row k: k-th largest eigenvalue of gamma, k-th lowest occupied orbital
    energy and k-th lowest positive level of the shell operator."""
    occ = np.sort(rep.occupations)[::-1]
    eps = np.sort(rep.orbital_energies)
    levels = rep.level_eigs[rep.level_eigs > 0]
    n = max(rep.gamma.mat.shape[0] // 2, eps.size)
    return [{"index": k, "occupation": float(occ[k]),
             "orbital_energy": float(eps[k]) if k < eps.size else "",
             "level": float(levels[k]) if k < levels.size else ""} for k in range(min(n, occ.size))]


def _residual_rows(rep: SolveReport) -> list[dict]:
    es = list(rep.energy_history)
    return [{"iteration": k, "residual": float(r), "energy": float(es[k]) if k < len(es) else ""}
            for k, r in enumerate(rep.residual_history)]


def _write_solve(run: Run, prefix: str, rep: SolveReport, extra: dict | None = None):
    run.json(f"{prefix}.json", run.report({"report": rep.as_dict(), **(extra or {})},
                                          rep.assumption_status))
    run.csv(f"{prefix}_occupations.csv", _occupation_rows(rep), OCCUPATION_COLUMNS)
    run.csv(f"{prefix}_residuals.csv", _residual_rows(rep), ["iteration", "residual", "energy"])
    run.text(f"{prefix}_gamma.txt", dump_density(rep.gamma))


def _failed(run: Run, prefix: str, exc: Exception) -> int:
    body = {"error": f"{type(exc).__name__}: {exc}"}
    rep = getattr(exc, "report", None)
    if isinstance(rep, SolveReport):
        body["report"] = rep.as_dict()
    trace = getattr(exc, "trace", None)
    if trace is not None:
        body["retraction"] = trace.as_dict()
    run.json(f"{prefix}.json", run.report(body))
    print(f"error: {body['error']}", file=sys.stderr)
    return run.finish(EXIT_NUMERIC, body["error"])


def cmd_solve_df(cfg: RunConfig, run: Run) -> int:
    m = build_model(cfg.model, cfg.phys)
    try:
        rep = solve_df(m, cfg.phys, opts=cfg.solver)
    except NUMERIC_ERRORS as exc:
        return _failed(run, "solve_df", exc)
    _write_solve(run, "solve_df", rep)
    print(f"E_q = {rep.energy:.12g}  filled_shell={rep.filled_shell}  iterations={rep.iterations}")
    return run.finish(EXIT_OK)


def cmd_solve_ephf(cfg: RunConfig, run: Run) -> int:
    m = build_model(cfg.model, cfg.phys)
    try:
        if cfg.ephf_sea == "df":
            df = solve_df(m, cfg.phys, opts=cfg.solver)
            sea = sea_of(df.gamma, m, cfg.phys)
        else:
            df, sea = None, free_sea(m)
        rep = solve_ephf(sea, m, cfg.phys, opts=cfg.solver,
                         warm=df.gamma if df is not None else None)
    except NUMERIC_ERRORS as exc:
        return _failed(run, "solve_ephf", exc)
    extra = {"sea": cfg.ephf_sea}
    if df is not None:
        extra["E_q"] = df.energy
        extra["delta"] = df.energy - rep.energy
    _write_solve(run, "solve_ephf", rep, extra)
    print(f"e_q(sea={cfg.ephf_sea}) = {rep.energy:.12g}")
    return run.finish(EXIT_OK)


def cmd_mittleman(cfg: RunConfig, run: Run) -> int:
    m = build_model(cfg.model, cfg.phys)
    try:
        res = mittleman(m, cfg.phys, opts=cfg.solver)
    except NUMERIC_ERRORS as exc:
        return _failed(run, "mittleman", exc)
    es = res.energies
    slack = 10.0 * cfg.solver.tol * max(1.0, m.c**2)
    rows = [{"step": k, "energy": float(e),
             "increment": float(e - es[k - 1]) if k else 0.0,
             "monotone": bool(k == 0 or e >= es[k - 1] - slack)} for k, e in enumerate(es)]
    body = {"mittleman": res.as_dict()}
    stamp = None
    if res.df_report is not None:
        body["E_q"] = res.df_report.energy
        body["gap_estimate"] = res.df_report.energy - res.estimate
        stamp = res.df_report.assumption_status
    run.json("mittleman.json", run.report(body, stamp))
    run.csv("mittleman_trajectory.csv", rows, ["step", "energy", "increment", "monotone"])
    print(f"e_q lower estimate = {res.estimate:.12g}  steps={len(es)}  monotone={res.monotone}")
    return run.finish(EXIT_OK)


def _run_claim(cid: str, cfg: RunConfig) -> V.ClaimResult:
    w = cfg.workers
    if cid == "e_minus_energy":
        return V.check_error_bound_scaling(workers=w)
    if cid == "second_order":
        return V.check_second_order_sweep(workers=w)
    if cid == "mittleman_gap":
        return V.check_mittleman_gap(workers=w, opts=cfg.solver)
    if cid == "no_unfilled_shells":
        return V.check_no_unfilled_shells(opts=cfg.solver)
    if cid == "inequalities":
        m = build_model(cfg.model, cfg.phys)
        return V.check_inequalities(m, cfg.phys, cfg.sample_size, cfg.seed)
    if cid == "orbital_bounds":
        return V.check_orbital_bounds(workers=w)
    if cid == "decomposition":
        return V.check_decomposition_sweep(workers=w)
    raise ConfigError(f"unknown claim {cid!r}")


def cmd_verify(cfg: RunConfig, run: Run, claims: tuple) -> int:
    results = []
    for cid in claims:
        try:
            res = _run_claim(cid, cfg)
        except (V.PreconditionError, V.TooFewPointsError, *NUMERIC_ERRORS) as exc:
            res = V.ClaimResult(cid, {"error": f"{type(exc).__name__}: {exc}"}, {}, {}, False,
                                [("completed", False, str(exc))])
        results.append(res)
        for table, rows in sorted(res.tables.items()):
            if rows:
                run.csv(f"claim_{cid}_{table}.csv", rows)
        print(f"{'PASS' if res.passed else 'FAIL'} {cid}")
        for name, ok, detail in res.checks:
            if not ok:
                print(f"    failed check {name}: {detail}")
    ok = all(r.passed for r in results)
    run.json("claims.json", run.report({"claims": [r.as_dict() for r in results],
                                        "all_passed": ok}))
    if cfg.figures:
        from .figures import render_claims
        run.files += render_claims(results, run.out)
    return run.finish(EXIT_OK if ok else EXIT_CLAIM)


def _sweep_point(args) -> dict:
    cfg, p = args
    m = build_model(cfg.model, p)
    df = solve_df(m, p, opts=cfg.solver)
    sea = sea_of(df.gamma, m, p) if cfg.ephf_sea == "df" else free_sea(m)
    eph = solve_ephf(sea, m, p, opts=cfg.solver, warm=df.gamma if cfg.ephf_sea == "df" else None)
    return {"alpha": p.alpha, "c": p.c, "Z": p.Z, "q": p.q, "E_q": df.energy,
            "e_gstar": eph.energy, "delta": df.energy - eph.energy,
            "filled_shell": df.filled_shell, "df_iterations": df.iterations,
            "ephf_iterations": eph.iterations}


SWEEP_COLUMNS = ["alpha", "c", "Z", "q", "E_q", "e_gstar", "delta", "filled_shell",
                 "df_iterations", "ephf_iterations"]


def cmd_sweep(cfg: RunConfig, run: Run) -> int:
    if cfg.sweep_vary is None:
        raise ConfigError("sweep needs a [sweep] section with vary and values")
    pts = [cfg.phys.replace(**{cfg.sweep_vary: v}) for v in sorted(cfg.sweep_values)]
    try:
        rows = V._map(_sweep_point, [(cfg, p) for p in pts], cfg.workers)
    except NUMERIC_ERRORS as exc:
        return _failed(run, "sweep", exc)
    rows.sort(key=lambda r: r[cfg.sweep_vary])
    run.json("sweep.json", run.report({"vary": cfg.sweep_vary, "points": rows}))
    run.csv("sweep.csv", rows, SWEEP_COLUMNS)
    if cfg.figures:
        from .figures import render_sweep
        run.files += render_sweep(rows, cfg.sweep_vary, run.out)
    for r in rows:
        print(f"{cfg.sweep_vary}={r[cfg.sweep_vary]:g}  E_q={r['E_q']:.12g}  delta={r['delta']:.3e}")
    return run.finish(EXIT_OK)


def cmd_dump_model(cfg: RunConfig, run: Run) -> int:
    m = build_model(cfg.model, cfg.phys)
    run.text("model.txt", dump_model(m))
    run.json("model.json", run.report({"dim": m.dim, "n_grid": m.n_grid, "dx": m.dx}))
    print(f"wrote model dump (dim={m.dim}) to {run.out / 'model.txt'}")
    return run.finish(EXIT_OK)


COMMANDS = {
    "solve-df": cmd_solve_df,
    "solve-ephf": cmd_solve_ephf,
    "mittleman": cmd_mittleman,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "dump-model": cmd_dump_model,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dflab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dflab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--workers", type=int, metavar="N")
        sp.add_argument("--figures", action="store_true",
                        help="also render PNG figures with matplotlib (verify, sweep)")
        if name == "verify":
            sp.add_argument("--claims", metavar="LIST",
                            help=f"comma-separated subset of: {', '.join(V.CLAIMS)}")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        overrides = {}
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            overrides["workers"] = args.workers
        if args.figures:
            overrides["figures"] = True
        if overrides:
            from dataclasses import replace
            cfg = replace(cfg, **overrides)
        claims = cfg.claims or V.CLAIMS
        if args.command == "verify" and args.claims:
            claims = tuple(c.strip() for c in args.claims.split(",") if c.strip())
            bad = [c for c in claims if c not in V.CLAIMS]
            if bad:
                raise ConfigError(f"unknown claim(s): {', '.join(bad)}")
        if args.command == "sweep" and cfg.sweep_vary is None:
            raise ConfigError(f"{args.config}: sweep needs a [sweep] section with vary and values")
        out = Path(args.out or os.environ.get("OUTPUT_DIR") or cfg.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(cfg, out, args.command)
    try:
        if args.command == "verify":
            return cmd_verify(cfg, run, claims)
        return COMMANDS[args.command](cfg, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, *NUMERIC_ERRORS) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return run.finish(EXIT_NUMERIC, str(exc))


if __name__ == "__main__":
    sys.exit(main())
