"""Projector retraction onto self-consistently positive states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .density import DensityMatrix, in_gamma_q_plus, xc_norm
from .meanfield import MeanField, energy, energy_difference, mean_field
from .model import ModelSpace
from .params import derive_constants

MAX_ITER = 200
STAGNATION_EPS = 1e-12


class RetractionError(RuntimeError):
    def __init__(self, msg: str, trace: "RetractionTrace"):
        super().__init__(msg)
        self.trace = trace


def default_tol(m: ModelSpace, p) -> float:
    return 1e-10 * m.c**2 * p.q


def t_map(g, m: ModelSpace, p, mf: MeanField | None = None) -> DensityMatrix:
    mf = mf if mf is not None else mean_field(g, m, p)
    a = g.mat if isinstance(g, DensityMatrix) else np.asarray(g)
    return DensityMatrix(mf.p_plus @ a @ mf.p_plus)


@dataclass(frozen=True, eq=False)
class RetractionTrace:
    residuals: list
    ratio_obs: float
    converged: bool
    theta: DensityMatrix
    n_steps: int
    tol: float
    first: DensityMatrix  # T(gamma), kept for error splits
    a_posteriori: float
    member_residual: float
    stagnated: bool = False
    iterates: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "residuals": [float(r) for r in self.residuals],
            "ratio_obs": self.ratio_obs,
            "converged": self.converged,
            "n_steps": self.n_steps,
            "tol": self.tol,
            "a_posteriori": self.a_posteriori,
            "member_residual": self.member_residual,
            "stagnated": self.stagnated,
        }


def _ratio(residuals, floor: float) -> float:
    ratios = [b / a for a, b in zip(residuals, residuals[1:]) if a > floor and b > floor]
    return float(max(ratios)) if ratios else 0.0


def retract(g, m: ModelSpace, p, tol_fixed: float | None = None, max_iter: int = MAX_ITER,
            store: bool = False) -> RetractionTrace:
    """Iterate ``T`` from ``g`` until the X_c step size drops below ``tol_fixed``.

    If the residual stops decreasing once it is within a few orders of the
    rounding floor the iteration is declared converged and ``stagnated`` is
    set; tolerances below what double precision can resolve are not errors.
    """
    tol = default_tol(m, p) if tol_fixed is None else float(tol_fixed)
    floor = STAGNATION_EPS * m.c**2 * max(p.q, 1)
    cur = g if isinstance(g, DensityMatrix) else DensityMatrix(g)
    residuals: list[float] = []
    iterates = [cur] if store else []
    first = None
    converged = stagnated = False
    for _ in range(max_iter):
        nxt = t_map(cur, m, p)
        if first is None:
            first = nxt
        r = xc_norm(nxt.mat - cur.mat, m)
        residuals.append(r)
        cur = nxt
        if store:
            iterates.append(cur)
        if r <= tol:
            converged = True
            break
        if len(residuals) > 2 and r <= floor and r >= residuals[-2]:
            converged = stagnated = True
            break
    ratio = _ratio(residuals, floor)
    tail = residuals[-1] * ratio / (1.0 - ratio) if ratio < 1.0 else float("inf")
    mem = in_gamma_q_plus(cur, mean_field(cur, m, p))
    trace = RetractionTrace(residuals, ratio, converged, cur, len(residuals), tol, first,
                            tail, float(mem.residuals["block"]), stagnated, iterates)
    if not converged:
        raise RetractionError(
            f"retraction did not converge in {max_iter} steps "
            f"(last residual {residuals[-1]:.3e}, ratio {ratio:.3f})", trace)
    return trace


@dataclass(frozen=True)
class URCertificate:
    term1: float
    term2: float
    R: float
    member: bool

    def as_dict(self) -> dict:
        return {"term1": self.term1, "term2": self.term2, "R": self.R, "member": self.member}


def ur_certificate(g, m: ModelSpace, p, R: float) -> URCertificate:
    a = g.mat if isinstance(g, DensityMatrix) else np.asarray(g)
    term1 = linalg.trace_norm(a @ m.op_power("absD", 0.5), hermitian=False) / m.c
    A = derive_constants(p, R).A_const
    step = xc_norm(t_map(a, m, p).mat - a, m)
    term2 = A * step / m.c**2 if step > 0.0 else 0.0
    member = bool(np.isfinite(term2) and term1 + term2 < R)
    return URCertificate(float(term1), float(term2), float(R), member)


def df_energy(g, m: ModelSpace, p, tol: float | None = None) -> tuple[float, RetractionTrace]:
    tr = retract(g, m, p, tol_fixed=tol)
    return energy(tr.theta, m, p), tr


def e_minus_energy(g, m: ModelSpace, p, trace: RetractionTrace) -> float:
    """E(g) - Energy(g) split as [Energy(T g) - Energy(g)] + [Energy(theta) - Energy(T g)]."""
    a = g.mat if isinstance(g, DensityMatrix) else np.asarray(g)
    return (energy_difference(a, trace.first.mat, m, p)
            + energy_difference(trace.first.mat, trace.theta.mat, m, p))
