import numpy as np
from hypothesis import given, strategies as st

from dflab import linalg
from conftest import random_herm


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_trace_norm_matches_singular_values(seed, n):
    rng = np.random.default_rng(seed)
    a = random_herm(rng, n)
    sv = np.linalg.svd(a, compute_uv=False).sum()
    assert np.isclose(linalg.trace_norm(a), sv, rtol=1e-12)
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    assert np.isclose(linalg.trace_norm(b, hermitian=False),
                      np.linalg.svd(b, compute_uv=False).sum(), rtol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_projector_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3)))
    p = linalg.projector(q)
    assert np.allclose(p @ p, p, atol=1e-13)
    assert np.isclose(np.trace(p).real, 3.0)


def test_from_eig_roundtrip(rng):
    a = random_herm(rng, 6)
    vals, vecs = linalg.eigh(a)
    assert np.allclose(linalg.from_eig(vals, vecs), a, atol=1e-13)


def test_op_norm_and_psd_diff(rng):
    a = random_herm(rng, 5)
    assert np.isclose(linalg.op_norm(a), np.abs(np.linalg.eigvalsh(a)).max())
    assert np.isclose(linalg.psd_diff_min(a + 10 * np.eye(5), a), 10.0)
