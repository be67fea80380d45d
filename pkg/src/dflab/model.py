"""Finite-dimensional Dirac models.

Two backends build a :class:`ModelSpace`:

``dirac1d``
    Two-component spinors on a periodic grid of ``N`` points.  The kinetic
    term ``-i c sigma_1 d/dx`` uses the Fourier derivative (Nyquist mode
    zeroed) so there is no fermion doubling, the mass term is
    ``c^2 sigma_3`` and therefore ``beta = sigma_3``.  The Laplacian used by
    the norms is the square of the same derivative, which makes
    ``D_free^2 = c^4 - c^2 Lap`` hold to rounding.

``synthetic``
    A random-frame Dirac-like operator ``c^2 beta + c K0`` with ``K0``
    coupling upper to lower spinor entries only, so ``beta`` anticommutes
    with the kinetic part and the spectrum is ``+-sqrt(c^4 + c^2 k^2)``.
    ``-Lap`` is defined as ``K0^2``.  Intended for property tests over many
    random instances.

Index layout is spatial-major, spinor-minor: entry ``2*i + s`` is spinor
component ``s`` at site ``i``.  Vectors are in matrix units: a normalised
orbital has unit Euclidean norm, the density at site ``i`` is the diagonal
block trace divided by ``dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

BACKENDS = ("dirac1d", "synthetic")

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])


class ConfigError(ValueError):
    pass


class GapCollapseError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    backend: str = "dirac1d"
    N: int = 128
    box_len: float = 20.0
    soften: float | None = None  # defaults to one grid spacing
    seed: int = 0
    synth_gap: float = 1.0  # mean spacing of synthetic momenta
    synth_dim: int = 16
    synth_frame: str = "random"  # or "diagonal"

    def validate(self) -> "ModelConfig":
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.backend == "dirac1d":
            if self.N < 8:
                raise ConfigError(f"N must be >= 8, got {self.N}")
            if self.N % 2:
                raise ConfigError(f"N must be even, got {self.N}")
            if not self.box_len > 0:
                raise ConfigError(f"box_len must be > 0, got {self.box_len}")
            if self.soften is not None and not self.soften > 0:
                raise ConfigError(f"soften must be > 0, got {self.soften}")
        else:
            if self.synth_dim < 4 or self.synth_dim % 2:
                raise ConfigError(f"synth_dim must be even and >= 4, got {self.synth_dim}")
            if not self.synth_gap > 0:
                raise ConfigError(f"synth_gap must be > 0, got {self.synth_gap}")
            if self.synth_frame not in ("random", "diagonal"):
                raise ConfigError(f"unknown synth_frame {self.synth_frame!r}")
        return self

    @property
    def soften_value(self) -> float:
        return self.soften if self.soften is not None else self.box_len / self.N


@dataclass(frozen=True, eq=False)
class ModelSpace:
    backend: str
    c: float
    Z: float
    n_grid: int
    n_spinor: int
    dim: int
    dx: float
    grid: np.ndarray
    box_len: float
    D_free: np.ndarray
    V_mat: np.ndarray
    beta_mat: np.ndarray
    W_kernel: np.ndarray
    lap_eigs: np.ndarray  # eigenvalues of -Lap, >= 0
    lap_vecs: np.ndarray
    d_eigs: np.ndarray
    d_vecs: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kinetic(self) -> np.ndarray:
        """D_free - c^2 beta."""
        return self.D_free - self.c**2 * self.beta_mat

    def op_power(self, which: str, s: float) -> np.ndarray:
        return op_power(self, which, s)


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def softened_coulomb(r: np.ndarray, a: float) -> np.ndarray:
    return 1.0 / np.sqrt(r * r + a * a)


def _fourier_basis(N: int, dx: float):
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=dx)
    k_deriv = k.copy()
    k_deriv[N // 2] = 0.0  # Nyquist mode carries no derivative
    # unitary plane-wave basis: columns e^{i k x_j} / sqrt(N)
    F = np.fft.ifft(np.eye(N), axis=0, norm="ortho")
    return k_deriv, F


def _build_dirac1d(cfg: ModelConfig, c: float, Z: float) -> ModelSpace:
    N = cfg.N
    L = float(cfg.box_len)
    dx = L / N
    x = -0.5 * L + dx * np.arange(N)
    k, F = _fourier_basis(N, dx)
    # F[:, m] ~ exp(+2 pi i m j / N), so F diag(i k) F^* is d/dx
    deriv = np.real(F @ np.diag(1j * k) @ F.conj().T)
    p_op = -1j * deriv
    D = c * np.kron(p_op, SIGMA1) + c * c * np.kron(np.eye(N), SIGMA3)
    D = linalg.herm(D)
    beta = np.kron(np.eye(N), SIGMA3).astype(complex)

    a = cfg.soften_value
    r = x[:, None] - x[None, :]
    r = r - L * np.round(r / L)  # minimum image
    W = softened_coulomb(r, a)
    vnuc = Z * softened_coulomb(x - L * np.round(x / L), a)
    V = np.kron(np.diag(vnuc), np.eye(2)).astype(complex)

    lap_eigs = np.repeat(k * k, 2)
    lap_vecs = np.kron(F, np.eye(2))
    d_eigs, d_vecs = linalg.eigh(D)
    return ModelSpace("dirac1d", c, Z, N, 2, 2 * N, dx, x, L, D, V, beta, W,
                      lap_eigs, lap_vecs, d_eigs, d_vecs)


def _haar(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _build_synthetic(cfg: ModelConfig, c: float, Z: float) -> ModelSpace:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.synth_dim // 2
    dim = 2 * n
    kvals = cfg.synth_gap * np.cumsum(rng.uniform(0.5, 1.5, size=n))
    up = np.arange(0, dim, 2)
    lo = up + 1
    if cfg.synth_frame == "random":
        U, Vh = _haar(rng, n), _haar(rng, n)
        B = (U * kvals) @ Vh.conj().T
        K0 = np.zeros((dim, dim), complex)
        K0[np.ix_(up, lo)] = B
        K0[np.ix_(lo, up)] = B.conj().T
        beta = np.kron(np.eye(n), SIGMA3).astype(complex)
        D = linalg.herm(c * K0 + c * c * beta)
        neg_lap = linalg.herm(K0 @ K0)
        lap_eigs, lap_vecs = linalg.eigh(neg_lap)
        lap_eigs = np.clip(lap_eigs, 0.0, None)
    else:
        kk = np.repeat(kvals, 2)
        sign = np.tile([1.0, -1.0], n)
        D = np.diag(sign * np.sqrt(c**4 + c * c * kk * kk)).astype(complex)
        beta = np.diag(sign).astype(complex)
        lap_eigs = kk * kk
        lap_vecs = np.eye(dim, dtype=complex)

    G = rng.standard_normal((n, n))
    W = G @ G.T / n
    W = 0.5 * (W + W.T)
    hardy = float(kvals.max())
    v = rng.uniform(0.2, 1.0, size=n)
    v = Z * hardy * v / v.max()
    V = np.kron(np.diag(v), np.eye(2)).astype(complex)
    d_eigs, d_vecs = linalg.eigh(D)
    grid = np.arange(n, dtype=float)
    return ModelSpace("synthetic", c, Z, n, 2, dim, 1.0, grid, float(n), D, V, beta, W,
                      lap_eigs, lap_vecs, d_eigs, d_vecs)


def build_model(cfg: ModelConfig, p) -> ModelSpace:
    """Build the model for ``cfg`` at the speed of light / charge of ``p``."""
    cfg.validate()
    if cfg.backend == "dirac1d":
        m = _build_dirac1d(cfg, float(p.c), float(p.Z))
    else:
        m = _build_synthetic(cfg, float(p.c), float(p.Z))
    _freeze(m.grid, m.D_free, m.V_mat, m.beta_mat, m.W_kernel, m.lap_eigs, m.lap_vecs,
            m.d_eigs, m.d_vecs)
    return m


def free_projectors(m: ModelSpace) -> tuple[np.ndarray, np.ndarray]:
    ev, vecs = m.d_eigs, m.d_vecs
    if np.any(np.abs(ev) < 1e-8 * m.c**2):
        raise GapCollapseError("free Dirac operator has an eigenvalue near 0")
    lp = linalg.projector(vecs[:, ev > 0])
    return lp, np.eye(m.dim) - lp


def op_power(m: ModelSpace, which: str, s: float) -> np.ndarray:
    """Hermitian power of |D|, (1 - Lap) or (c^4 - c^2 Lap)."""
    key = (which, float(s))
    hit = m._cache.get(key)
    if hit is not None:
        return hit
    if which == "absD":
        vals, vecs = np.abs(m.d_eigs), m.d_vecs
    elif which == "one_minus_lap":
        vals, vecs = 1.0 + m.lap_eigs, m.lap_vecs
    elif which == "c4_minus_c2_lap":
        vals, vecs = m.c**4 + m.c**2 * m.lap_eigs, m.lap_vecs
    else:
        raise ValueError(f"unknown operator {which!r}")
    if s != int(s) and np.any(vals <= 0):
        raise ValueError(f"{which} is not positive definite; fractional power undefined")
    out = linalg.herm(linalg.from_eig(vals**s, vecs))
    out.flags.writeable = False
    m._cache[key] = out
    return out
