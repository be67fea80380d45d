"""Ground-state solvers for the DF and electron-positron HF problems.

All solvers work with dense matrices and are deterministic given their
inputs.  Energies exclude the rest mass (``-c^2 Tr gamma``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import linalg
from .density import DensityMatrix, _mat, in_gamma_q_g, in_gamma_q_plus
from .meanfield import (MeanField, energy, energy_difference, lowest_positive, mean_field,
                        mean_field_from_operator, operator_of, w_of)
from .model import ModelSpace
from .params import assumption_stamp, default_radius
from .retraction import RetractionError, retract, ur_certificate

log = logging.getLogger(__name__)

SHELL_TOL = 1e-8  # relative to c^2: levels closer than this form one shell
FILLED_TOL = 1e-7
ARMIJO = 1e-4
MIN_STEP = 2.0**-30


class SolverError(RuntimeError):
    def __init__(self, msg: str, report: "SolveReport | None" = None):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_iter: int = 300
    strategy: str = "aufbau"  # DF: aufbau | gradient
    ephf_path: str = "scf"  # ep-HF: scf | convex
    retract_tol: float | None = None
    R: float | None = None
    n_starts: int = 2  # symmetric Aufbau start plus one seeded random start
    seed: int = 0
    grad_step: float = 1e4
    max_outer: int = 30
    outer_tol: float = 1e-10
    mittleman_start: str = "df"  # df | free

    def validate(self) -> "SolveOptions":
        if self.strategy not in ("aufbau", "gradient"):
            raise ValueError(f"unknown DF strategy {self.strategy!r}")
        if self.ephf_path not in ("scf", "convex"):
            raise ValueError(f"unknown ep-HF path {self.ephf_path!r}")
        if self.mittleman_start not in ("df", "free"):
            raise ValueError(f"unknown Mittleman start {self.mittleman_start!r}")
        if not self.tol > 0 or self.max_iter < 1 or self.n_starts < 1 or self.max_outer < 1:
            raise ValueError("tolerances and iteration counts must be positive")
        return self


@dataclass(frozen=True, eq=False)
class SolveReport:
    energy: float
    gamma: DensityMatrix
    occupations: np.ndarray
    nu: float
    filled_shell: bool
    shell_error: float
    iterations: int
    residual_history: list
    energy_history: list
    converged: bool
    assumption_status: dict
    level_eigs: np.ndarray  # eigenvalues of the operator defining the shells
    orbitals: np.ndarray  # occupied eigenvectors of gamma
    orbital_energies: np.ndarray
    orbital_residual: float
    h1_max: float
    flags: dict = field(default_factory=dict)

    @property
    def trace(self) -> float:
        return self.gamma.trace

    def as_dict(self) -> dict:
        return {
            "energy": self.energy,
            "trace": self.trace,
            "nu": self.nu,
            "filled_shell": self.filled_shell,
            "shell_error": self.shell_error,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_history": [float(r) for r in self.residual_history],
            "energy_history": [float(e) for e in self.energy_history],
            "occupations": [float(x) for x in self.occupations],
            "orbital_energies": [float(x) for x in self.orbital_energies],
            "orbital_residual": self.orbital_residual,
            "h1_max": self.h1_max,
            "assumption_status": self.assumption_status,
            "flags": self.flags,
        }


def aufbau(mf: MeanField, q: int) -> np.ndarray:
    """Projector onto the q lowest positive levels (ties broken by index)."""
    return linalg.projector(lowest_positive(mf, q)[1])


def h1_norms(vecs: np.ndarray, m: ModelSpace) -> np.ndarray:
    op = m.op_power("one_minus_lap", 1.0)
    return np.sqrt(np.real(np.einsum("ij,ik,kj->j", vecs.conj(), op, vecs)))


def lower_component_norms(vecs: np.ndarray, m: ModelSpace) -> np.ndarray:
    """Norm of the beta = -1 part of each column."""
    lower = 0.5 * (np.eye(m.dim) - m.beta_mat)
    return np.linalg.norm(lower @ vecs, axis=0)


def shell_projector(vals: np.ndarray, vecs: np.ndarray, nu: float, c: float) -> np.ndarray:
    """1_{(0, nu]} of the operator with spectral data (vals, vecs)."""
    sel = (vals > 0) & (vals <= nu + SHELL_TOL * c * c)
    return linalg.projector(vecs[:, sel])


def _analyse(gamma: DensityMatrix, level_vals, level_vecs, op, m, p, q, opts, *, iters,
             res_hist, e_hist, converged, flags) -> SolveReport:
    occ, uvecs = gamma.eig
    pos = level_vals[level_vals > 0]
    nu = float(pos[q - 1]) if pos.size >= q else float("nan")
    shell = shell_projector(level_vals, level_vecs, nu, m.c)
    shell_err = linalg.op_norm(gamma.mat - shell)
    integral = bool(np.all(np.minimum(np.abs(occ), np.abs(1.0 - occ)) <= FILLED_TOL))
    filled = integral and shell_err <= FILLED_TOL
    occ_idx = np.flatnonzero(occ > 0.5)
    u = uvecs[:, occ_idx]
    eps = np.real(np.einsum("ij,ik,kj->j", u.conj(), op, u))
    resid = np.linalg.norm(op @ u - u * eps, axis=0)
    orb_res = float(resid.max() / m.c**2) if resid.size else 0.0
    h1 = h1_norms(u, m)
    h1_max = float(h1.max()) if h1.size else 0.0
    R = opts.R if opts.R is not None else default_radius(h1_max, q)
    stamp = assumption_stamp(p, R)
    flags = dict(flags)
    flags["eps_in_gap"] = bool(np.all((eps > 0) & (eps < m.c**2)))
    return SolveReport(energy(gamma, m, p), gamma, occ, nu, filled, shell_err, iters,
                       res_hist, e_hist, converged, stamp, level_vals, u, eps, orb_res, h1_max,
                       flags)


def _projected_occupations(vals: np.ndarray, q: float) -> tuple[np.ndarray, float]:
    """Clamp ``vals - mu`` to [0, 1] with the shift mu chosen so the sum is q."""
    def excess(mu):
        return np.clip(vals - mu, 0.0, 1.0).sum() - q

    lo, hi = vals.min() - 1.0, vals.max() + 1.0
    if excess(lo) < 0:
        raise ValueError(f"cannot reach trace {q} with {vals.size} levels")
    mu = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.clip(vals - mu, 0.0, 1.0), mu


def _initial_states(m: ModelSpace, p, q: int, opts: SolveOptions):
    mf0 = mean_field(np.zeros((m.dim, m.dim)), m, p)
    yield aufbau(mf0, q)
    rng = np.random.default_rng(opts.seed)
    _, vecs = mf0.positive()
    pool = vecs[:, : min(vecs.shape[1], 2 * q + 2)]
    for _ in range(opts.n_starts - 1):
        z = rng.standard_normal((pool.shape[1], q)) + 1j * rng.standard_normal((pool.shape[1], q))
        Q, _ = np.linalg.qr(z)
        yield linalg.projector(pool @ Q)


def _df_aufbau(g0, m, p, q, opts):
    cur = retract(g0, m, p, opts.retract_tol).theta
    e_cur = energy(cur, m, p)
    res_hist, e_hist, flags = [], [e_cur], {"step_shrinks": 0}
    converged = False
    floor = 1e-14 * m.c**2 * q
    for it in range(1, opts.max_iter + 1):
        mf = mean_field(cur, m, p)
        target = aufbau(mf, q)
        res = linalg.op_norm(cur.mat - target)
        res_hist.append(res)
        if res <= opts.tol:
            converged = True
            break
        d = target - cur.mat
        slope = float(np.trace(mf.d_gamma @ d).real - m.c**2 * np.trace(d).real)
        t = 1.0
        while True:
            try:
                cand = retract((1.0 - t) * cur.mat + t * target, m, p, opts.retract_tol).theta
                de = energy_difference(cur, cand, m, p, mf)
                if de <= ARMIJO * t * min(slope, 0.0) + floor:
                    break
            except RetractionError:
                pass
            t *= 0.5
            flags["step_shrinks"] += 1
            if t < MIN_STEP:
                flags["line_search_failed"] = True
                break
        if flags.get("line_search_failed"):
            break
        if t < 1.0:
            flags["damped"] = True
        cur = cand
        e_cur = energy(cur, m, p)
        e_hist.append(e_cur)
    return cur, mf, res_hist, e_hist, converged, it, flags


def _project_positive(y: np.ndarray, basis: np.ndarray, q: int) -> np.ndarray:
    small = linalg.herm(basis.conj().T @ y @ basis)
    vals, vecs = linalg.eigh(small)
    occ, _ = _projected_occupations(vals, q)
    return basis @ linalg.from_eig(occ, vecs) @ basis.conj().T


def _df_gradient(g0, m, p, q, opts):
    cur = retract(g0, m, p, opts.retract_tol).theta
    res_hist, e_hist, flags = [], [energy(cur, m, p)], {"step_shrinks": 0}
    converged = False
    s = opts.grad_step / m.c**2
    floor = 1e-14 * m.c**2 * q
    for it in range(1, opts.max_iter + 1):
        mf = mean_field(cur, m, p)
        res = linalg.op_norm(cur.mat - aufbau(mf, q))
        res_hist.append(res)
        if res <= opts.tol:
            converged = True
            break
        basis = mf.positive()[1]
        grad = mf.d_gamma - m.c**2 * np.eye(m.dim)
        step = s
        while True:
            trial = _project_positive(cur.mat - step * grad, basis, q)
            d = trial - cur.mat
            slope = float(np.trace(grad @ d).real)
            try:
                cand = retract(trial, m, p, opts.retract_tol).theta
                de = energy_difference(cur, cand, m, p, mf)
                if de <= ARMIJO * min(slope, 0.0) + floor:
                    break
            except RetractionError:
                pass
            step *= 0.5
            flags["step_shrinks"] += 1
            if step < MIN_STEP * s:
                flags["line_search_failed"] = True
                break
        if flags.get("line_search_failed"):
            break
        cur = cand
        e_hist.append(energy(cur, m, p))
    return cur, mf, res_hist, e_hist, converged, it, flags


def solve_df(m: ModelSpace, p, q: int | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Minimise the DF energy over self-consistently positive states."""
    q = p.q if q is None else int(q)
    opts = (opts or SolveOptions()).validate()
    if 4 * q > m.dim:
        raise ValueError(f"q={q} too large for dim={m.dim}")
    run = _df_aufbau if opts.strategy == "aufbau" else _df_gradient
    best = None
    for g0 in _initial_states(m, p, q, opts):
        cur, _, res_hist, e_hist, converged, iters, flags = run(g0, m, p, q, opts)
        if best is None or (converged and e_hist[-1] < best[3][-1]) or (converged and not best[4]):
            best = (cur, res_hist, iters, e_hist, converged, flags)
    cur, res_hist, iters, e_hist, converged, flags = best
    mf = mean_field(cur, m, p)
    rep = _analyse(cur, mf.eigs, mf.vecs, mf.d_gamma, m, p, q, opts, iters=iters,
                   res_hist=res_hist, e_hist=e_hist, converged=converged,
                   flags=dict(flags, strategy=opts.strategy))
    mem = in_gamma_q_plus(cur, mf, q)
    cert = ur_certificate(cur, m, p, rep.assumption_status["assumption_1"]["R"])
    rep.flags.update(in_gamma_q_plus=bool(mem), ur_member=cert.member,
                     ur_certificate=cert.as_dict(),
                     trace_ok=abs(rep.trace - q) <= 1e-8)
    if not converged:
        raise SolverError(f"DF solver ({opts.strategy}) did not converge: "
                          f"residual {res_hist[-1]:.3e}", rep)
    return rep


def sea_of(g, m: ModelSpace, p) -> tuple[np.ndarray, np.ndarray]:
    """(P+_g, P-_g) of the mean-field operator of ``g``."""
    mf = mean_field(g, m, p)
    return mf.p_plus, mf.p_minus


def free_sea(m: ModelSpace) -> tuple[np.ndarray, np.ndarray]:
    mf = mean_field_from_operator(m.D_free, m.c)
    return mf.p_plus, mf.p_minus


def _range_basis(P: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(P)
    return vecs[:, vals > 0.5]


def _ephf_fill(U, m, p, q):
    def fill(g):
        d = operator_of(g, m, p)
        vals, vecs = linalg.eigh(U.conj().T @ d @ U)
        pos = np.flatnonzero(vals > 0)
        if pos.size < q:
            raise SolverError("compressed operator has fewer than q positive levels")
        return U @ linalg.projector(vecs[:, pos[:q]]) @ U.conj().T, d
    return fill


def _ephf_starts(g_proj, m, p, q, opts, warm):
    """Symmetric start, optional warm start, then seeded random subspaces."""
    U = _range_basis(g_proj[0])
    if U.shape[1] < q:
        raise ValueError(f"rank(P+_g) = {U.shape[1]} < q = {q}")
    fill = _ephf_fill(U, m, p, q)
    yield fill(np.zeros((m.dim, m.dim)))[0]
    if warm is not None:
        w = DensityMatrix.clamped(g_proj[0] @ _mat(warm) @ g_proj[0]).mat
        tr = np.trace(w).real
        yield w * (q / tr) if tr > q else w
    vals, vecs = linalg.eigh(U.conj().T @ operator_of(np.zeros((m.dim, m.dim)), m, p) @ U)
    pool = U @ vecs[:, np.flatnonzero(vals > 0)[: 2 * q + 2]]
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.n_starts - 1):
        z = rng.standard_normal((pool.shape[1], q)) + 1j * rng.standard_normal((pool.shape[1], q))
        Q, _ = np.linalg.qr(z)
        yield linalg.projector(pool @ Q)


def _ephf_scf(g_proj, m, p, q, opts, g0):
    fill = _ephf_fill(_range_basis(g_proj[0]), m, p, q)
    cur = np.array(g0, complex)
    res_hist, e_hist, flags = [], [energy(cur, m, p)], {}
    converged = False
    for it in range(1, opts.max_iter + 1):
        target, d_op = fill(cur)
        res = linalg.op_norm(cur - target)
        res_hist.append(res)
        if res <= opts.tol:
            converged = True
            break
        cur, damped = _exact_line_step(cur, target - cur, d_op, m, p)
        flags["damped"] = flags.get("damped", False) or damped
        e_hist.append(energy(cur, m, p))
    return DensityMatrix(cur), res_hist, e_hist, converged, it, flags


def _exact_line_step(cur, d, d_op, m, p):
    """Minimise the quadratic energy along cur + t d over t in [0, 1]."""
    b = float(np.trace(d_op @ d).real - m.c**2 * np.trace(d).real)
    a = 0.5 * p.alpha * float(np.trace(w_of(d, m) @ d).real)
    t = 1.0
    if abs(b) < 1e-13 * m.c**2 * max(1.0, np.trace(cur).real):
        # slope is below rounding: the undamped step is the only informed move
        return cur + d, False
    if a > 0.0:
        t = min(1.0, max(0.0, -b / (2.0 * a)))
    elif b > 0.0:
        t = 0.0
    return cur + t * d, t < 1.0


def _project_sea_set(y, Up, Um, q):
    """Frobenius projection onto {-P- <= g <= P+, P+ g P- = 0, Tr g <= q}."""
    yp = linalg.herm(Up.conj().T @ y @ Up)
    ym = linalg.herm(Um.conj().T @ y @ Um)
    vp, Vp = linalg.eigh(yp)
    vm, Vm = linalg.eigh(ym)

    def parts(mu):
        return np.clip(vp - mu, 0.0, 1.0), np.clip(vm - mu, -1.0, 0.0)

    def excess(mu):
        a, b = parts(mu)
        return a.sum() + b.sum() - q

    mu = 0.0
    if excess(0.0) > 0.0:
        hi = max(vp.max(), vm.max()) + 2.0
        mu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    a, b = parts(mu)
    return (Up @ linalg.from_eig(a, Vp) @ Up.conj().T
            + Um @ linalg.from_eig(b, Vm) @ Um.conj().T)


def _ephf_convex(g_proj, m, p, q, opts, g0):
    Up, Um = _range_basis(g_proj[0]), _range_basis(g_proj[1])
    s = opts.grad_step / m.c**2
    cur = np.array(g0, complex)
    res_hist, e_hist, flags = [], [energy(cur, m, p)], {}
    converged = False
    for it in range(1, opts.max_iter + 1):
        d_op = operator_of(cur, m, p)
        grad = d_op - m.c**2 * np.eye(m.dim)
        target = _project_sea_set(cur - s * grad, Up, Um, q)
        d = target - cur
        # projected-gradient map residual, scaled back to density units
        res = linalg.op_norm(d)
        res_hist.append(res)
        if res <= opts.tol:
            converged = True
            break
        cur, damped = _exact_line_step(cur, d, d_op, m, p)
        flags["damped"] = flags.get("damped", False) or damped
        e_hist.append(energy(cur, m, p))
    return DensityMatrix(cur), res_hist, e_hist, converged, it, flags


def solve_ephf(g_proj, m: ModelSpace, p, q: int | None = None,
               opts: SolveOptions | None = None, warm=None) -> SolveReport:
    """Minimise the DF functional over states compatible with the sea ``g_proj``.

    ``warm`` is an optional extra starting state (compressed into the sea).
    """
    q = p.q if q is None else int(q)
    opts = (opts or SolveOptions()).validate()
    run = _ephf_scf if opts.ephf_path == "scf" else _ephf_convex
    best = None
    for g0 in _ephf_starts(g_proj, m, p, q, opts, warm):
        out = run(g_proj, m, p, q, opts, g0)
        e, conv = out[2][-1], out[3]
        if best is None or (conv and not best[3]) or (conv and e < best[2][-1]):
            best = out
    gamma, res_hist, e_hist, converged, iters, flags = best
    pp = g_proj[0]
    d = operator_of(gamma, m, p)
    comp = linalg.herm(pp @ d @ pp)
    vals, vecs = linalg.eigh(comp)
    rep = _analyse(gamma, vals, vecs, comp, m, p, q, opts, iters=iters, res_hist=res_hist,
                   e_hist=e_hist, converged=converged, flags=dict(flags, path=opts.ephf_path))
    electronic = linalg.op_norm(pp @ gamma.mat @ pp - gamma.mat)
    rep.flags.update(purely_electronic=bool(electronic <= 1e-8), electronic_residual=electronic,
                     in_gamma_q_g=bool(in_gamma_q_g(gamma, g_proj, q)))
    if not converged:
        raise SolverError(f"ep-HF solver ({opts.ephf_path}) did not converge: "
                          f"residual {res_hist[-1]:.3e}", rep)
    return rep


@dataclass(frozen=True, eq=False)
class MittlemanResult:
    estimate: float  # lower estimate of the sup over seas
    trajectory: list  # (g_k as DensityMatrix or None for the free sea, e_k)
    monotone: bool
    converged: bool
    df_report: SolveReport | None

    @property
    def energies(self) -> list:
        return [e for _, e in self.trajectory]

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "energies": [float(e) for e in self.energies],
                "monotone": self.monotone, "converged": self.converged,
                "label": "lower estimate of the sup over Dirac seas"}


def mittleman(m: ModelSpace, p, q: int | None = None, opts: SolveOptions | None = None,
              df_report: SolveReport | None = None) -> MittlemanResult:
    """Outer loop g_{k+1} = ep-HF minimiser for the sea of g_k."""
    q = p.q if q is None else int(q)
    opts = (opts or SolveOptions()).validate()
    if opts.mittleman_start == "df":
        if df_report is None:
            df_report = solve_df(m, p, q, opts)
        g = df_report.gamma
        proj = sea_of(g, m, p)
    else:
        g = None
        proj = free_sea(m)
    traj = []
    converged = False
    tol = opts.outer_tol * max(1.0, m.c**2)
    for _ in range(opts.max_outer):
        try:
            rep = solve_ephf(proj, m, p, q, opts, warm=g)
        except SolverError as exc:
            raise SolverError(f"inner ep-HF failed after {len(traj)} outer steps: {exc}",
                              exc.report) from exc
        traj.append((g, rep.energy))
        if len(traj) > 1 and abs(traj[-1][1] - traj[-2][1]) <= tol:
            converged = True
            break
        g = rep.gamma
        proj = sea_of(g, m, p)
    es = [e for _, e in traj]
    slack = 10.0 * opts.tol * max(1.0, m.c**2)
    monotone = all(b >= a - slack for a, b in zip(es, es[1:]))
    return MittlemanResult(float(max(es)), traj, monotone, converged, df_report)


@dataclass(frozen=True, eq=False)
class ShellSwap:
    h: np.ndarray
    a_idx: int
    b_idx: int
    mu_a: float
    mu_b: float
    t_max: float


def shell_swap_direction(report: SolveReport, m: ModelSpace, p) -> ShellSwap | None:
    """Swap weight between the least and most occupied Fermi-level orbitals."""
    g = report.gamma
    mf = mean_field(g, m, p)
    near = np.abs(mf.eigs - report.nu) < SHELL_TOL * m.c**2
    E = mf.vecs[:, near]
    if E.shape[1] < 2:
        return None
    w, Y = linalg.eigh(E.conj().T @ g.mat @ E)
    if w.min() >= 1.0 - FILLED_TOL or w.max() <= FILLED_TOL:
        return None  # shell entirely filled or entirely empty
    a, b = 0, w.size - 1  # eigh sorts ascending
    psi_a, psi_b = E @ Y[:, a], E @ Y[:, b]
    h = np.outer(psi_a, psi_a.conj()) - np.outer(psi_b, psi_b.conj())
    t_max = float(min(1.0 - w[a], w[b]))
    return ShellSwap(linalg.herm(h), a, b, float(w[a]), float(w[b]), t_max)


def with_options(opts: SolveOptions, **kw) -> SolveOptions:
    return replace(opts, **kw)
