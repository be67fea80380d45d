"""Mean-field operator, DF energy functional and projector derivatives.

Matrix-unit conventions: with ``n_j`` the spinor-summed diagonal of gamma at
site ``j``, the interaction operator is

    W_gamma = diag_i(sum_j W_ij n_j) (x) 1_2  -  (W (x) ones(2, 2)) o gamma

where ``o`` is the entrywise product.  The exchange part uses full 2x2
spinor blocks, so ``W_{|u><u|} u = 0`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .density import DensityMatrix, _mat, site_occupations
from .model import GapCollapseError, ModelSpace

GAP_TOL = 1e-8
DEGENERATE_TOL = 1e-10


class DegeneratePairError(RuntimeError):
    pass


def _exchange_kernel(m: ModelSpace) -> np.ndarray:
    k = m._cache.get("exchange_kernel")
    if k is None:
        k = np.kron(m.W_kernel, np.ones((m.n_spinor, m.n_spinor)))
        k.flags.writeable = False
        m._cache["exchange_kernel"] = k
    return k


def w_of(g, m: ModelSpace) -> np.ndarray:
    """Hartree minus exchange operator of ``g`` (linear in ``g``)."""
    a = _mat(g)
    hartree = m.W_kernel @ site_occupations(a, m)
    out = -_exchange_kernel(m) * a
    out[np.diag_indices_from(out)] += np.repeat(hartree, m.n_spinor)
    return linalg.herm(out)


@dataclass(frozen=True, eq=False)
class MeanField:
    d_gamma: np.ndarray
    eigs: np.ndarray
    vecs: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    gap: float
    nu_levels: np.ndarray
    c: float

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.eigs > 0))

    def positive(self) -> tuple[np.ndarray, np.ndarray]:
        """Positive eigenvalues (ascending) and their eigenvectors."""
        sel = self.eigs > 0
        return self.eigs[sel], self.vecs[:, sel]


def operator_of(g, m: ModelSpace, p) -> np.ndarray:
    return m.D_free - m.V_mat + p.alpha * w_of(g, m)


def mean_field_from_operator(d: np.ndarray, c: float) -> MeanField:
    vals, vecs = linalg.eigh(d)
    gap = float(np.min(np.abs(vals)))
    if gap < GAP_TOL * c * c:
        raise GapCollapseError(f"mean-field operator has eigenvalue {gap:.3e} within the gap tolerance")
    pos = vals > 0
    pp = linalg.projector(vecs[:, pos])
    pm = linalg.projector(vecs[:, ~pos])
    nu = vals[pos & (vals <= c * c)]
    for a in (vals, vecs, pp, pm, nu):
        a.flags.writeable = False
    return MeanField(d, vals, vecs, pp, pm, gap, nu, c)


def mean_field(g, m: ModelSpace, p) -> MeanField:
    return mean_field_from_operator(linalg.herm(operator_of(g, m, p)), m.c)


def lowest_positive(mf: MeanField, q: int) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = mf.positive()
    if vals.size < q:
        raise ValueError(f"only {vals.size} positive levels, need {q}")
    return vals[:q], vecs[:, :q]


def pair_term(g, m: ModelSpace) -> float:
    """sum_ij W_ij [n_i n_j - tr_spin(g_ij g_ji)] by direct summation."""
    a = _mat(g)
    n = site_occupations(a, m)
    return float(n @ m.W_kernel @ n - np.sum(_exchange_kernel(m) * np.abs(a) ** 2))


def energy(g, m: ModelSpace, p) -> float:
    a = _mat(g)
    one_body = np.trace((m.D_free - m.V_mat) @ a).real - m.c**2 * np.trace(a).real
    return float(one_body + 0.5 * p.alpha * pair_term(a, m))


def energy_alt(g, m: ModelSpace, p) -> float:
    """Same functional written as Tr(D_g g) - (alpha/2) Tr(W_g g) - c^2 Tr g."""
    a = _mat(g)
    wg = w_of(a, m)
    dg = m.D_free - m.V_mat + p.alpha * wg
    return float(np.trace(dg @ a).real - 0.5 * p.alpha * np.trace(wg @ a).real
                 - m.c**2 * np.trace(a).real)


def energy_difference(g_from, g_to, m: ModelSpace, p, mf: MeanField | None = None) -> float:
    """E(g_to) - E(g_from) from the exact quadratic expansion around g_from.

    Avoids subtracting two energies of size ~q c^2 when the states are close.
    """
    a = _mat(g_from)
    h = _mat(g_to) - a
    d = mf.d_gamma if mf is not None else operator_of(a, m, p)
    lin = np.trace(d @ h).real - m.c**2 * np.trace(h).real
    quad = 0.5 * p.alpha * np.trace(w_of(h, m) @ h).real
    return float(lin + quad)


def dp_plus(g, h, mf: MeanField, m: ModelSpace, p) -> np.ndarray:
    """Derivative of ``P+`` along ``g -> g + t h`` via divided differences."""
    del g  # mf already encodes the base point
    mu, v = mf.eigs, mf.vecs
    M = v.conj().T @ (p.alpha * w_of(h, m)) @ v
    pos = (mu > 0).astype(float)
    dmu = mu[:, None] - mu[None, :]
    cross = pos[:, None] != pos[None, :]
    if np.any(np.abs(dmu[cross]) < DEGENERATE_TOL * mf.c**2):
        raise DegeneratePairError("cross-gap eigenvalue pair is degenerate")
    F = np.zeros_like(dmu)
    F[cross] = (pos[:, None] - pos[None, :])[cross] / dmu[cross]
    return linalg.herm(v @ (M * F) @ v.conj().T)


def beta_commutator(h, m: ModelSpace) -> tuple[np.ndarray, float]:
    wh = w_of(h, m)
    com = wh @ m.beta_mat - m.beta_mat @ wh
    return com, linalg.op_norm(com)
