"""Dense complex linear algebra used throughout the simulator.

Operators, density matrices and superoperators are plain ``numpy`` arrays of
dtype ``complex128``. Vectorization uses column stacking, so that
``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

__all__ = [
    "DimensionError",
    "NotHermitianError",
    "kron",
    "dag",
    "expm",
    "eigh",
    "partial_trace",
    "vectorize",
    "devectorize",
    "is_hermitian",
]


class DimensionError(ValueError):
    """Raised when matrix shapes are incompatible with an operation."""


class NotHermitianError(ValueError):
    """Raised when a Hermitian matrix was required but not supplied."""


def kron(a, b):
    """Kronecker product of two matrices, shape ``(ra*rb, ca*cb)``."""
    return np.kron(np.asarray(a), np.asarray(b))


def dag(a):
    return np.conj(np.asarray(a)).T


def is_hermitian(m, rtol=1e-10):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = 1.0 + (np.max(np.abs(m)) if m.size else 0.0)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) < rtol * scale)


# Higham (2005) Pade coefficients for degree 13 and the 1-norm thresholds
# below which a lower degree is accurate to double precision.
_B13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_B3 = (120.0, 60.0, 12.0, 1.0)
_B5 = (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0)
_B7 = (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0)
_B9 = (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
       2162160.0, 110880.0, 3960.0, 90.0, 1.0)
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_low(a, ident, b):
    # u: odd powers, v: even powers
    a2 = a @ a
    powers = [ident, a2]
    while len(powers) < (len(b) + 1) // 2:
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * j + 1] * p for j, p in enumerate(powers))
    v = sum(b[2 * j] * p for j, p in enumerate(powers))
    return a @ u, v


def _pade13(a, ident):
    b = _B13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def expm(m, scale=1.0):
    """Matrix exponential ``exp(scale * m)``.

    Scaling and squaring with a diagonal Pade approximant (degrees 3 to 13,
    chosen from the 1-norm).

    Parameters
    ----------
    m : array_like
        Square matrix.
    scale : float
        Multiplier applied to ``m`` before exponentiation, typically a time.

    Returns
    -------
    numpy.ndarray
        ``exp(scale * m)`` as complex128.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expm needs a square matrix, got shape {m.shape}")
    if not np.isfinite(scale):
        raise ValueError("scale must be finite")
    a = np.asarray(scale * m, dtype=complex)
    n = a.shape[0]
    ident = np.eye(n, dtype=complex)
    norm1 = np.max(np.sum(np.abs(a), axis=0), initial=0.0)
    if norm1 == 0.0:
        return ident

    squarings = 0
    for degree, coeffs in ((3, _B3), (5, _B5), (7, _B7), (9, _B9)):
        if norm1 <= _THETA[degree]:
            u, v = _pade_low(a, ident, coeffs)
            break
    else:
        squarings = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
        a = a / 2.0**squarings
        u, v = _pade13(a, ident)

    r = lu_solve(lu_factor(v - u), v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def eigh(m, tol=1e-10):
    """Eigen-decomposition of a Hermitian matrix.

    Eigenvalues come back ascending. Within a cluster of (numerically)
    degenerate eigenvalues the eigenvectors are re-orthonormalized by a
    Gram-Schmidt pass, and every vector gets a fixed phase (its first
    significant component real and positive) so results are reproducible.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eigh needs a square matrix, got shape {m.shape}")
    if not is_hermitian(m, tol):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    m = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(m)
    vecs = np.array(vecs, dtype=complex)

    scale = max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    start = 0
    n = len(vals)
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[start] < 1e-9 * scale:
            stop += 1
        if stop - start > 1:
            vecs[:, start:stop] = _gram_schmidt(vecs[:, start:stop])
        start = stop

    for k in range(n):
        v = vecs[:, k]
        idx = np.flatnonzero(np.abs(v) > 1e-8)[0]
        vecs[:, k] = v * (np.abs(v[idx]) / v[idx])
    return vals, vecs


def _gram_schmidt(cols):
    out = np.zeros_like(cols)
    for j in range(cols.shape[1]):
        v = cols[:, j].copy()
        for i in range(j):
            v -= np.vdot(out[:, i], v) * out[:, i]
        out[:, j] = v / np.linalg.norm(v)
    return out


def partial_trace(rho, dims, keep=0):
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    rho : array_like
        Operator on ``A (x) B`` with shape ``(dA*dB, dA*dB)``.
    dims : tuple of int
        ``(dA, dB)``.
    keep : {0, 1, "A", "B"}
        Subsystem that survives.
    """
    rho = np.asarray(rho)
    d_a, d_b = (int(d) for d in dims)
    if rho.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"operator shape {rho.shape} does not match dims {dims}")
    keep = {"A": 0, "B": 1}.get(keep, keep)
    r = rho.reshape(d_a, d_b, d_a, d_b)
    if keep == 0:
        return np.einsum("ijkj->ik", r)
    if keep == 1:
        return np.einsum("ijil->jl", r)
    raise ValueError(f"keep must be 0/1 or 'A'/'B', got {keep!r}")


def vectorize(rho):
    """Stack the columns of ``rho`` (left to right) into a 1-D vector."""
    rho = np.asarray(rho)
    if rho.ndim != 2:
        raise DimensionError("vectorize expects a matrix")
    return rho.reshape(-1, order="F")


def devectorize(col, n=None):
    """Inverse of :func:`vectorize`."""
    col = np.asarray(col).reshape(-1)
    if n is None:
        n = int(round(np.sqrt(col.size)))
    if n * n != col.size:
        raise DimensionError(f"length {col.size} is not {n}**2")
    return col.reshape(n, n, order="F")
