"""Small dense Hermitian helpers shared by every module."""

from __future__ import annotations

import numpy as np


def herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(herm(a))


def from_eig(vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return (vecs * vals) @ vecs.conj().T


def trace_norm(a: np.ndarray, hermitian: bool = True) -> float:
    """Sum of singular values; Hermitian input takes the eigenvalue route."""
    if hermitian:
        return float(np.abs(np.linalg.eigvalsh(herm(a))).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def op_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


def projector(vecs: np.ndarray) -> np.ndarray:
    return vecs @ vecs.conj().T


def psd_diff_min(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest eigenvalue of a - b (>= 0 means a >= b)."""
    return float(np.linalg.eigvalsh(herm(a - b))[0])
