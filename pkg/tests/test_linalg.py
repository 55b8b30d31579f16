import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from nvpol.linalg import (
    DimensionError,
    NotHermitianError,
    dag,
    devectorize,
    eigh,
    expm,
    is_hermitian,
    kron,
    partial_trace,
    vectorize,
)

seeds = st.integers(0, 2**31 - 1)


def rand_c(rng, *shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def rand_herm(rng, n):
    a = rand_c(rng, n, n)
    return 0.5 * (a + dag(a))


def brute_kron(a, b):
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


@given(seeds, st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_kron_matches_elementwise_definition(seed, ra, ca, rb, cb):
    rng = np.random.default_rng(seed)
    a, b = rand_c(rng, ra, ca), rand_c(rng, rb, cb)
    assert np.allclose(kron(a, b), brute_kron(a, b), atol=1e-12)


def test_kron_mixed_product():
    rng = np.random.default_rng(0)
    a, b, c, d = (rand_c(rng, 3, 3) for _ in range(4))
    assert np.allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d))


def test_dag_and_hermitian_check():
    rng = np.random.default_rng(1)
    a = rand_c(rng, 4, 4)
    assert np.array_equal(dag(dag(a)), a)
    assert is_hermitian(a + dag(a))
    assert not is_hermitian(a)


# -- expm -------------------------------------------------------------------


@settings(max_examples=60)
@given(seeds, st.integers(1, 12), st.floats(1e-3, 50.0))
def test_expm_matches_scipy(seed, n, norm):
    rng = np.random.default_rng(seed)
    a = rand_c(rng, n, n)
    a *= norm / np.linalg.norm(a, 1)
    ref = scipy.linalg.expm(a)
    assert np.allclose(expm(a), ref, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(ref).max()))


def test_expm_basic_identities():
    rng = np.random.default_rng(2)
    a = rand_c(rng, 6, 6)
    assert np.allclose(expm(np.zeros((5, 5))), np.eye(5))
    assert np.allclose(expm(a) @ expm(-a), np.eye(6), atol=1e-10)
    assert np.allclose(expm(a, scale=0.3), expm(0.3 * a))
    d = np.diag([0.1, -2.0, 3.0j])
    assert np.allclose(expm(d), np.diag(np.exp(np.diag(d))))


def test_expm_of_antihermitian_is_unitary():
    rng = np.random.default_rng(3)
    u = expm(-1j * rand_herm(rng, 8) * 5.0)
    assert np.allclose(u @ dag(u), np.eye(8), atol=1e-12)


def test_expm_rejects_non_square():
    with pytest.raises(DimensionError):
        expm(np.zeros((2, 3)))


# -- eigh -------------------------------------------------------------------


@given(seeds, st.integers(1, 10))
def test_eigh_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    h = rand_herm(rng, n)
    vals, vecs = eigh(h)
    assert np.all(np.diff(vals) >= 0)
    assert np.allclose(dag(vecs) @ vecs, np.eye(n), atol=1e-10)
    assert np.allclose(vecs @ np.diag(vals) @ dag(vecs), h, atol=1e-10)


def test_eigh_degenerate_cluster_orthonormal_and_phase_fixed():
    rng = np.random.default_rng(4)
    q, _ = np.linalg.qr(rand_c(rng, 5, 5))
    h = q @ np.diag([1.0, 1.0, 1.0, 2.0, 3.0]) @ dag(q)
    vals, vecs = eigh(h)
    assert np.allclose(vals, [1, 1, 1, 2, 3])
    assert np.allclose(dag(vecs) @ vecs, np.eye(5), atol=1e-10)
    for k in range(5):
        v = vecs[:, k]
        first = v[np.flatnonzero(np.abs(v) > 1e-8)[0]]
        assert abs(first.imag) < 1e-12 and first.real > 0


def test_eigh_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        eigh(np.array([[0, 1], [0, 0]], dtype=complex))


# -- partial trace / vectorization ----------------------------------------


def test_partial_trace_of_product_state():
    rng = np.random.default_rng(5)
    a, b = rand_herm(rng, 3), rand_herm(rng, 2)
    rho = kron(a, b)
    assert np.allclose(partial_trace(rho, (3, 2), keep=0), a * np.trace(b))
    assert np.allclose(partial_trace(rho, (3, 2), keep="B"), b * np.trace(a))


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6), (4, 2))


def test_vectorize_is_column_stacking():
    m = np.arange(6).reshape(2, 3)
    assert list(vectorize(m)) == [0, 3, 1, 4, 2, 5]


@given(seeds, st.integers(1, 5))
def test_vec_sandwich_identity(seed, n):
    rng = np.random.default_rng(seed)
    a, x, b = (rand_c(rng, n, n) for _ in range(3))
    assert np.allclose(vectorize(a @ x @ b), kron(b.T, a) @ vectorize(x))
    assert np.array_equal(devectorize(vectorize(x)), x)


def test_devectorize_rejects_non_square_length():
    with pytest.raises(DimensionError):
        devectorize(np.zeros(5))
