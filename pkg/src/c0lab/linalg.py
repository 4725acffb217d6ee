"""Dense linear-algebra helpers with one uniform rank policy.

All kernel/rank decisions in the package go through the relative
singular-value cutoff ``RANK_RTOL * sigma_max`` defined here.
"""

from __future__ import annotations

import numpy as np

from .errors import IllConditionedGroupError

RANK_RTOL = 1e-10


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def spectral_norm(A) -> float:
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def rank(A) -> int:
    s = np.linalg.svd(as_matrix(A), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


def null_space(A) -> np.ndarray:
    """Orthonormal basis of the kernel (columns), rank policy as above."""
    A = as_matrix(A)
    _, s, vh = np.linalg.svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(A.shape[1], dtype=complex)
    mask = s <= RANK_RTOL * s[0]
    return vh[len(s) - int(np.count_nonzero(mask)):].conj().T


def smallest_nonzero_singular_value(A) -> float:
    """Smallest singular value above the rank cutoff; 0 for the zero matrix."""
    s = np.linalg.svd(as_matrix(A), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    above = s[s > RANK_RTOL * s[0]]
    return float(above[-1])


def polar_unitary(A) -> np.ndarray:
    """Unitary factor of the polar decomposition A = U |A|."""
    w, _, vh = np.linalg.svd(as_matrix(A))
    return w @ vh


def hermitian_sqrt_with_inverse(Y, *, floor: float = 1e-12):
    """Positive square root and its inverse via eigendecomposition.

    Raises IllConditionedGroupError when the smallest eigenvalue drops
    to ``floor`` or below, since a symmetrizer then has no meaning.
    """
    Y = as_matrix(Y)
    vals, vecs = np.linalg.eigh(0.5 * (Y + Y.conj().T))
    if vals.min() <= floor:
        raise IllConditionedGroupError(
            f"averaged matrix has eigenvalue {vals.min():.3e} <= {floor:.1e}")
    root = np.sqrt(vals)
    X = (vecs * root) @ vecs.conj().T
    X_inv = (vecs / root) @ vecs.conj().T
    return X, X_inv


def krylov_rank(T, *, trials: int = 3, seed: int = 7) -> int:
    """Maximal dimension of a Krylov space span{x, Tx, ...} over seeded trials."""
    T = as_matrix(T)
    n = T.shape[0]
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(trials):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        cols = [x]
        for _ in range(n - 1):
            cols.append(T @ cols[-1])
        K = np.stack(cols, axis=1)
        scale = np.linalg.norm(K, axis=0)
        scale[scale == 0.0] = 1.0
        best = max(best, rank(K / scale))
        if best == n:
            break
    return best


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_similarity(dim: int, cond: float, rng: np.random.Generator) -> np.ndarray:
    """Random invertible matrix with condition number ``cond`` and unit top singular value."""
    if cond < 1.0:
        raise ValueError("condition number must be >= 1")
    U = random_unitary(dim, rng)
    V = random_unitary(dim, rng)
    if dim == 1:
        s = np.ones(1)
    else:
        s = np.logspace(0.0, -np.log10(cond), dim)
    return (U * s) @ V


def matrix_to_json(A) -> dict:
    """Row-major list of {re, im} entries plus the shape."""
    A = np.asarray(A, dtype=complex)
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "entries": [{"re": float(v.real), "im": float(v.imag)} for v in A.ravel()],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    data = np.array([complex(e["re"], e["im"]) for e in obj["entries"]], dtype=complex)
    return data.reshape(obj["rows"], obj["cols"])
