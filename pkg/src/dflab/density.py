"""Density matrices, constraint sets and the trace-class norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .model import ModelSpace

EIG_TOL = 1e-9
BLOCK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Immutable Hermitian one-body density matrix.

    The eigendecomposition is computed on first use; since ``mat`` is
    read-only the cached value never goes stale.
    """

    mat: np.ndarray

    def __post_init__(self):
        a = np.array(self.mat, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {a.shape}")
        a = linalg.herm(a)
        a.flags.writeable = False
        object.__setattr__(self, "mat", a)

    @classmethod
    def zeros(cls, dim: int) -> "DensityMatrix":
        return cls(np.zeros((dim, dim), complex))

    @classmethod
    def from_orbitals(cls, vecs: np.ndarray, occ=None) -> "DensityMatrix":
        vecs = np.asarray(vecs, complex)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        occ = np.ones(vecs.shape[1]) if occ is None else np.asarray(occ, float)
        return cls((vecs * occ) @ vecs.conj().T)

    @classmethod
    def clamped(cls, mat: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> "DensityMatrix":
        vals, vecs = linalg.eigh(np.asarray(mat, complex))
        return cls(linalg.from_eig(np.clip(vals, lo, hi), vecs))

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return linalg.eigh(self.mat)

    @property
    def occupations(self) -> np.ndarray:
        return self.eig[0]

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def __add__(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(self.mat + _mat(other))

    def __sub__(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(self.mat - _mat(other))

    def __mul__(self, t: float) -> "DensityMatrix":
        return DensityMatrix(t * self.mat)

    __rmul__ = __mul__


def _mat(g) -> np.ndarray:
    return g.mat if isinstance(g, DensityMatrix) else np.asarray(g)


@dataclass(frozen=True)
class NormReport:
    sigma1: float
    x_norm: float
    y_norm: float
    xc_norm: float

    def as_dict(self) -> dict:
        return {"sigma1": self.sigma1, "x_norm": self.x_norm,
                "y_norm": self.y_norm, "xc_norm": self.xc_norm}


def sandwich_norm(g, S: np.ndarray) -> float:
    return linalg.trace_norm(S @ _mat(g) @ S)


def sigma1(g) -> float:
    return linalg.trace_norm(_mat(g))


def x_norm(g, m: ModelSpace) -> float:
    return sandwich_norm(g, m.op_power("one_minus_lap", 0.25))


def y_norm(g, m: ModelSpace) -> float:
    return sandwich_norm(g, m.op_power("one_minus_lap", 0.5))


def xc_norm(g, m: ModelSpace) -> float:
    return sandwich_norm(g, m.op_power("absD", 0.5))


def norms(g, m: ModelSpace) -> NormReport:
    return NormReport(sigma1(g), x_norm(g, m), y_norm(g, m), xc_norm(g, m))


def site_occupations(g, m: ModelSpace) -> np.ndarray:
    """Spinor-summed diagonal, one entry per site (matrix units)."""
    d = np.real(np.diagonal(_mat(g)))
    return d.reshape(m.n_grid, m.n_spinor).sum(axis=1)


def density_profile(g, m: ModelSpace) -> np.ndarray:
    return site_occupations(g, m) / m.dx


@dataclass(frozen=True)
class Membership:
    ok: bool
    residuals: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def in_gamma(g, tol: float = EIG_TOL) -> Membership:
    ev = np.linalg.eigvalsh(_mat(g))
    lo, hi = float(ev[0]), float(ev[-1])
    return Membership(lo >= -tol and hi <= 1.0 + tol, {"eig_min": lo, "eig_max": hi})


def in_gamma_q(g, q: float, tol: float = EIG_TOL) -> Membership:
    base = in_gamma(g, tol)
    tr = float(np.trace(_mat(g)).real)
    res = dict(base.residuals, trace=tr)
    return Membership(base.ok and -tol <= tr <= q + tol, res)


def in_gamma_q_plus(g, mf, q: float | None = None, tol: float = BLOCK_TOL) -> Membership:
    """Gamma_q membership plus ``P+ g P+ = g`` for the mean field ``mf``."""
    a = _mat(g)
    block = linalg.op_norm(mf.p_plus @ a @ mf.p_plus - a)
    base = in_gamma_q(g, q if q is not None else np.inf)
    res = dict(base.residuals, block=block)
    return Membership(base.ok and block <= tol, res)


def in_gamma_q_g(g, g_proj, q: float, tol: float = BLOCK_TOL) -> Membership:
    """Membership in ``{-P-_g <= g <= P+_g, P+_g g P-_g = 0, 0 <= Tr g <= q}``."""
    pp, pm = g_proj
    a = _mat(g)
    upper = linalg.psd_diff_min(pp, a)
    lower = linalg.psd_diff_min(a, -pm)
    off = linalg.op_norm(pp @ a @ pm)
    tr = float(np.trace(a).real)
    ok = upper >= -EIG_TOL and lower >= -EIG_TOL and off <= tol and -tol <= tr <= q + tol
    return Membership(ok, {"upper": upper, "lower": lower, "off_block": off, "trace": tr})
