"""Explicit similarity constructions with machine-checkable certificates.

Three constructions are composed here:

1. exact averaging over the finite abelian group generated by a
   partition of the identity into idempotents (the symmetrizer makes
   every group element unitary at once);
2. the canonical-orbit similarity taking a multiplicity-free nilpotent
   contraction of full order to the Jordan cell, with the norm
   certificate ||X|| <= 1 and ||X^{-1}|| <= eps^{-2(n-1)};
3. per-block Moebius alignment landing each block on the compressed
   shift of b_lam^m.

Every operation returns a ``SimilarityCertificate`` whose invariants can
be re-checked without re-running the construction.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .blaschke import BlaschkeProduct, ZeroSet, pseudo_distance
from .errors import (
    AnnihilationError,
    CertificateError,
    CombinatorialLimitError,
    MultiplicityError,
    NilpotentStructureError,
    NotDiagonalizableError,
    PartitionError,
    StageError,
)
from .interpolation import flattening_interpolant
from .linalg import (
    as_matrix,
    hermitian_sqrt_with_inverse,
    krylov_rank,
    matrix_to_json,
    null_space,
    polar_unitary,
    smallest_nonzero_singular_value,
    spectral_norm,
)
from .model_space import (
    ANNIHILATION_TOL,
    apply_blaschke,
    crown_alignment,
    hermite_calculus,
    jordan_block_matrix,
    nilpotent_jordan_cell,
)

GROUP_SIZE_GUARD = 16
GROUP_MATERIALIZE_LIMIT = 10
PARTITION_TOL = 1e-8
UNITARITY_TOL = 1e-9
DIAGONAL_TOL = 1e-8
BLOCK_TOL = 1e-8
NILPOTENT_TOL = 1e-9
INVERSE_PAIR_TOL = 1e-10
PREDICTED_BOUND_SLACK = 1e-8


@dataclass(frozen=True)
class SimilarityCertificate:
    """Invertible X with measured norms, residual and an optional bound."""

    X: np.ndarray
    X_inv: np.ndarray
    residual: float
    norm_X: float
    norm_X_inv: float
    residual_tol: float
    predicted_bound: float | None = None
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Re-check the three certificate invariants; raises on violation."""
        n = self.X.shape[0]
        pair = spectral_norm(self.X @ self.X_inv - np.eye(n))
        if pair > INVERSE_PAIR_TOL:
            raise CertificateError(f"X X_inv deviates from identity by {pair:.3e}")
        if self.residual > self.residual_tol:
            raise CertificateError(
                f"residual {self.residual:.3e} exceeds tolerance {self.residual_tol:.1e}")
        if self.predicted_bound is not None:
            if self.norm_X_inv > self.predicted_bound * (1.0 + PREDICTED_BOUND_SLACK):
                raise CertificateError(
                    f"norm_X_inv {self.norm_X_inv:.6e} exceeds predicted bound "
                    f"{self.predicted_bound:.6e}")

    def to_json_obj(self) -> dict:
        obj = {
            "X": matrix_to_json(self.X),
            "X_inv": matrix_to_json(self.X_inv),
            "residual": self.residual,
            "norm_X": self.norm_X,
            "norm_X_inv": self.norm_X_inv,
            "residual_tol": self.residual_tol,
            "predicted_bound": self.predicted_bound,
            "meta": {k: v for k, v in self.meta.items()},
        }
        return obj


def _certificate(X, X_inv, residual, tol, predicted=None, **meta) -> SimilarityCertificate:
    return SimilarityCertificate(
        X=X, X_inv=X_inv, residual=float(residual),
        norm_X=spectral_norm(X), norm_X_inv=spectral_norm(X_inv),
        residual_tol=float(tol), predicted_bound=predicted, meta=meta)


# -- the finite abelian group of signed idempotent sums -----------------------

@dataclass(frozen=True)
class GroupRep:
    """Group {g_A = 2 P_A - I} indexed by subsets of the idempotent list.

    The empty set gives -I and the full set gives +I; the product law is
    g_A g_B = g_{(A & B) | (~A & ~B)}.  Elements are materialized for
    small n and synthesized on demand above that.
    """

    projections: tuple
    elements: dict | None

    @property
    def n_generators(self) -> int:
        return len(self.projections)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[0]

    def __len__(self) -> int:
        return 2 ** self.n_generators

    def subsets(self) -> Iterator[frozenset]:
        n = self.n_generators
        for mask in range(2 ** n):
            yield frozenset(j for j in range(n) if mask >> j & 1)

    def element(self, subset: Iterable[int]) -> np.ndarray:
        key = frozenset(int(j) for j in subset)
        if self.elements is not None and key in self.elements:
            return self.elements[key]
        acc = -np.eye(self.dim, dtype=complex)
        for j in key:
            acc = acc + 2.0 * self.projections[j]
        return acc


def build_group(projections: Sequence[np.ndarray]) -> GroupRep:
    """Validate a partition of the identity and wrap it as a group."""
    P = tuple(as_matrix(p) for p in projections)
    n = len(P)
    if n == 0:
        raise ValueError("at least one idempotent required")
    if n > GROUP_SIZE_GUARD:
        raise CombinatorialLimitError(f"{n} generators exceed the 2^{GROUP_SIZE_GUARD} guard")
    dim = P[0].shape[0]
    for j, proj in enumerate(P):
        if proj.shape != (dim, dim):
            raise PartitionError("idempotents must share one dimension")
        defect = spectral_norm(proj @ proj - proj)
        if defect > PARTITION_TOL:
            raise PartitionError(f"P_{j} idempotency defect {defect:.3e}")
    total = spectral_norm(sum(P) - np.eye(dim))
    if total > PARTITION_TOL:
        raise PartitionError(f"sum of idempotents misses identity by {total:.3e}")
    for i in range(n):
        for j in range(n):
            if i != j:
                cross = spectral_norm(P[i] @ P[j])
                if cross > PARTITION_TOL:
                    raise PartitionError(
                        f"P_{i} P_{j} has norm {cross:.3e}")
    elements = None
    if n <= GROUP_MATERIALIZE_LIMIT:
        elements = {}
        eye = np.eye(dim, dtype=complex)
        for mask in range(2 ** n):
            acc = -eye
            for j in range(n):
                if mask >> j & 1:
                    acc = acc + 2.0 * P[j]
            elements[frozenset(j for j in range(n) if mask >> j & 1)] = acc
    return GroupRep(projections=P, elements=elements)


def dixmier_symmetrizer(group: GroupRep) -> SimilarityCertificate:
    """Square root of the group average of g* g.

    Averaging over the full finite group is exact: conjugation by the
    root makes every element unitary, hence every conjugated idempotent
    self-adjoint.  The certificate residual is the worst unitarity
    defect over all 2^n elements.
    """
    dim = group.dim
    acc = np.zeros((dim, dim), dtype=complex)
    max_norm = 0.0
    for subset in group.subsets():
        g = group.element(subset)
        acc += g.conj().T @ g
        max_norm = max(max_norm, spectral_norm(g))
    Y = acc / len(group)
    X, X_inv = hermitian_sqrt_with_inverse(Y)
    residual = 0.0
    eye = np.eye(dim)
    for subset in group.subsets():
        h = X @ group.element(subset) @ X_inv
        residual = max(residual, spectral_norm(h.conj().T @ h - eye))
    return _certificate(X, X_inv, residual, UNITARITY_TOL,
                        kind="dixmier_symmetrizer",
                        max_group_norm=max_norm, group_size=len(group))


# -- spectral splitting shared by the diagonal and block constructions --------

def _indicator_spec(zeros: ZeroSet, index: int, order: int):
    values = [1.0 if j == index else 0.0 for j in range(len(zeros.entries))]
    return flattening_interpolant(zeros, values, order).as_function_spec()


def _calculus_idempotents(T, theta: BlaschkeProduct) -> list:
    order = max(1, theta.zeros.max_multiplicity)
    return [hermite_calculus(T, theta, _indicator_spec(theta.zeros, j, order))
            for j in range(len(theta.zeros.entries))]


def _orthogonalizing_map(T, idempotents, expected_dims, error_cls):
    """Symmetrize the idempotents, then rotate their ranges onto
    coordinate blocks ordered like the zero list."""
    group = build_group(idempotents)
    base = dixmier_symmetrizer(group)
    X1, X1_inv = base.X, base.X_inv
    columns = []
    for j, proj in enumerate(idempotents):
        R = X1 @ proj @ X1_inv
        u, s, _ = np.linalg.svd(R)
        dim_j = int(np.count_nonzero(s > 0.5))
        if dim_j != expected_dims[j]:
            raise error_cls(
                f"component {j} has dimension {dim_j}, expected {expected_dims[j]}")
        columns.append(u[:, :dim_j])
    U0 = np.hstack(columns)
    if U0.shape[0] != U0.shape[1]:
        raise error_cls("component dimensions do not fill the space")
    U = polar_unitary(U0)
    X = U.conj().T @ X1
    X_inv = X1_inv @ U
    return X, X_inv, base


def diagonalize(T, zeros: ZeroSet, psi_images: Sequence[np.ndarray] | None = None
                ) -> SimilarityCertificate:
    """Similarity taking an operator annihilated by a simple-zero product
    to the diagonal of its eigenvalues (in zero-list order).

    ``psi_images``: optional precomputed idempotent images of the node
    indicators under a calculus for T; by default they are produced by
    the Hermite calculus from exact indicator node data.
    """
    T = as_matrix(T)
    if any(m != 1 for m in zeros.multiplicities):
        raise ValueError("diagonalize expects simple zeros")
    b = BlaschkeProduct(zeros)
    ann = spectral_norm(apply_blaschke(b, T))
    if ann > ANNIHILATION_TOL:
        raise AnnihilationError(ann, ANNIHILATION_TOL)
    n = T.shape[0]
    lam = np.array(zeros.points, dtype=complex)
    if len(lam) != n:
        raise NotDiagonalizableError(
            f"{len(lam)} simple zeros cannot span dimension {n}")

    eigenspaces = [null_space(T - l * np.eye(n)) for l in lam]
    dims = [E.shape[1] for E in eigenspaces]
    if any(d != 1 for d in dims) or sum(dims) != n:
        raise NotDiagonalizableError(f"eigenspace dimensions {dims} are defective")

    if psi_images is None:
        psi_images = _calculus_idempotents(T, b)
    X, X_inv, base = _orthogonalizing_map(
        T, list(psi_images), [1] * n, NotDiagonalizableError)

    D = X @ T @ X_inv
    target = np.diag(lam)
    residual = spectral_norm(D - target)
    if residual > DIAGONAL_TOL:
        raise NotDiagonalizableError(
            f"diagonalization residual {residual:.3e} exceeds {DIAGONAL_TOL:.1e}")

    # Mutual orthogonality of the transported eigenspaces.
    images = []
    for E in eigenspaces:
        Q, _ = np.linalg.qr(X @ E)
        images.append(Q)
    worst_cos = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            worst_cos = max(worst_cos, spectral_norm(images[i].conj().T @ images[j]))
    if worst_cos > np.sin(1e-6):
        raise NotDiagonalizableError(
            f"transported eigenspaces deviate from orthogonality (cos {worst_cos:.3e})")

    return _certificate(X, X_inv, residual, DIAGONAL_TOL,
                        kind="diagonalize",
                        annihilation_norm=ann,
                        symmetrizer_residual=base.residual,
                        max_principal_cosine=worst_cos)


@dataclass(frozen=True)
class BlockDecomposition:
    """Certificate plus the diagonal blocks it produces, in zero order."""

    certificate: SimilarityCertificate
    blocks: tuple
    ranges: tuple
    zeros: ZeroSet


def orthogonalize_blocks(T, theta: BlaschkeProduct) -> BlockDecomposition:
    """Split an operator annihilated by ``theta`` into blocks of sizes m_j.

    The idempotents come from flattened node indicators; the spectral
    pivot (the calculus image of the flattened identity function) has
    the kernels ker b_{lam_j}^{m_j}(T) as eigenspaces, which the
    symmetrizer renders mutually orthogonal.
    """
    T = as_matrix(T)
    ann = spectral_norm(apply_blaschke(theta, T))
    if ann > ANNIHILATION_TOL:
        raise AnnihilationError(ann, ANNIHILATION_TOL)
    zeros = theta.zeros
    mults = list(zeros.multiplicities)
    n = T.shape[0]
    if sum(mults) != n:
        raise MultiplicityError(f"degree {sum(mults)} does not match dimension {n}")

    for j, (point, m) in enumerate(zeros.entries):
        power = BlaschkeProduct.from_points([point], [m])
        dim_ker = null_space(apply_blaschke(power, T)).shape[1]
        if dim_ker != m:
            raise MultiplicityError(
                f"ker b^{m}(T) at zero {j} has dimension {dim_ker}, expected {m}")

    idempotents = _calculus_idempotents(T, theta)
    order = max(1, zeros.max_multiplicity)
    pivot_values = list(zeros.points)
    pivot = flattening_interpolant(zeros, pivot_values, order).as_function_spec()
    W = hermite_calculus(T, theta, pivot)
    pivot_defect = spectral_norm(
        W - sum(l * Pj for l, Pj in zip(pivot_values, idempotents)))

    X, X_inv, base = _orthogonalizing_map(T, idempotents, mults, MultiplicityError)
    B = X @ T @ X_inv
    blocks = []
    ranges = []
    start = 0
    mask = np.zeros_like(B)
    for m in mults:
        stop = start + m
        blocks.append(B[start:stop, start:stop].copy())
        ranges.append((start, stop))
        mask[start:stop, start:stop] = B[start:stop, start:stop]
        start = stop
    residual = spectral_norm(B - mask)
    if residual > BLOCK_TOL:
        raise MultiplicityError(
            f"off-block mass {residual:.3e} exceeds {BLOCK_TOL:.1e}")
    cert = _certificate(X, X_inv, residual, BLOCK_TOL,
                        kind="orthogonalize_blocks",
                        annihilation_norm=ann,
                        symmetrizer_residual=base.residual,
                        spectral_pivot_defect=pivot_defect)
    return BlockDecomposition(certificate=cert, blocks=tuple(blocks),
                              ranges=tuple(ranges), zeros=zeros)


# -- nilpotent contractions to Jordan cells ------------------------------------

def nilpotent_similarity(N, n: int) -> SimilarityCertificate:
    """Similarity from a multiplicity-free nilpotent contraction of order n
    to the Jordan cell, following the canonical-orbit construction.

    A cyclic vector is taken as the top right singular vector of
    N^{n-1}, rescaled so the last orbit vector is a unit vector, then
    corrected by a triangular solve so the last orbit vector is
    orthogonal to all earlier ones.  The certificate carries
    ||X|| <= 1 + 1e-10 and the bound ||X^{-1}|| <= eps^{-2(n-1)} with
    eps the smallest singular value of N on the complement of its
    kernel.
    """
    N = as_matrix(N)
    if N.shape[0] != n:
        raise NilpotentStructureError("dimension must equal the nilpotency order",
                                      N.shape[0])
    top = spectral_norm(N)
    if top > 1.0 + 1e-10:
        raise NilpotentStructureError("matrix is not a contraction", top)
    n_power = spectral_norm(np.linalg.matrix_power(N, n))
    if n_power > 1e-10:
        raise NilpotentStructureError("N^n is not numerically zero", n_power)
    last = np.linalg.matrix_power(N, n - 1)
    sigma_last = spectral_norm(last)
    if sigma_last < 1e-8:
        raise NilpotentStructureError("N^{n-1} vanishes; order below n", sigma_last)

    if n == 1:
        eye = np.eye(1, dtype=complex)
        return _certificate(eye, eye, float(abs(N[0, 0])), NILPOTENT_TOL,
                            predicted=1.0, kind="nilpotent_similarity",
                            epsilon=1.0, order=1)

    eps = smallest_nonzero_singular_value(N)
    _, s, vh = np.linalg.svd(last)
    xi = vh[0].conj() / s[0]
    # Deterministic phase: largest component of the cyclic vector real positive.
    pivot = xi[np.argmax(np.abs(xi))]
    xi = xi * (np.conj(pivot) / abs(pivot))

    orbit = [xi]
    for _ in range(n - 1):
        orbit.append(N @ orbit[-1])
    y = np.array([np.vdot(orbit[-1], v) for v in orbit], dtype=complex)

    # Forward substitution for the coefficients that orthogonalize the
    # last orbit vector against the earlier ones (unit diagonal since
    # ||N^{n-1} xi|| = 1).
    b = np.zeros(n - 1, dtype=complex)
    for t in range(1, n):
        acc = y[n - 1 - t]
        for s_idx in range(1, t):
            acc -= b[s_idx - 1] * y[n - 1 - t + s_idx]
        b[t - 1] = acc
    coeff = np.conj(b)  # coeff[t-1] = a_{n-1-t}

    xi_corr = orbit[0].copy()
    for t in range(1, n):
        xi_corr = xi_corr - coeff[t - 1] * orbit[t]
    basis = [xi_corr]
    for _ in range(n - 1):
        basis.append(N @ basis[-1])
    V = np.stack(basis, axis=1)
    X = np.linalg.inv(V)
    J = nilpotent_jordan_cell(n)
    residual = spectral_norm(X @ N @ V - J)
    predicted = float(eps) ** (-2 * (n - 1))
    return _certificate(X, V, residual, NILPOTENT_TOL, predicted=predicted,
                        kind="nilpotent_similarity", epsilon=float(eps), order=n)


# -- full pipeline -------------------------------------------------------------

@dataclass(frozen=True)
class JordanSimilarityResult:
    """Outcome of the Jordan-model pipeline."""

    certificate: SimilarityCertificate
    jordan_block_certificate: SimilarityCertificate | None
    model: np.ndarray
    block_sizes: tuple
    stage_residuals: dict
    block_map_norms: tuple
    sweep_margin: float
    warnings: tuple


def _stage(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False
    return _Ctx()


def _block_target(zeros: ZeroSet) -> np.ndarray:
    parts = [jordan_block_matrix(BlaschkeProduct.from_points([p], [m])).matrix
             for p, m in zeros.entries]
    n = sum(p.shape[0] for p in parts)
    out = np.zeros((n, n), dtype=complex)
    start = 0
    for p in parts:
        stop = start + p.shape[0]
        out[start:stop, start:stop] = p
        start = stop
    return out


def _to_jordan_model(T, theta: BlaschkeProduct):
    """Core pipeline: conjugate T to the direct sum of compressed shifts."""
    timings = {}
    t0 = time.perf_counter()
    with _stage("orthogonalize"):
        decomposition = orthogonalize_blocks(T, theta)
    timings["orthogonalize"] = time.perf_counter() - t0
    X0 = decomposition.certificate.X
    X0_inv = decomposition.certificate.X_inv

    block_maps = []
    block_maps_inv = []
    block_residuals = []
    nil_certs = []
    t0 = time.perf_counter()
    for j, ((point, m), block) in enumerate(
            zip(theta.zeros.entries, decomposition.blocks)):
        with _stage(f"block[{j}]"):
            factor = BlaschkeProduct.from_points([point])
            power = factor.pow(m)
            nil = hermite_calculus(block, power, factor)
            cert = nilpotent_similarity(nil, m)
            nil_certs.append(cert)
            U, crown_dist = crown_alignment(point.value, m)
            Yj = U @ cert.X
            Yj_inv = cert.X_inv @ U.conj().T
            target_j = jordan_block_matrix(power).matrix
            block_residuals.append(
                spectral_norm(Yj @ block @ Yj_inv - target_j))
            block_maps.append(Yj)
            block_maps_inv.append(Yj_inv)
    timings["blocks"] = time.perf_counter() - t0

    n = T.shape[0]
    Y = np.zeros((n, n), dtype=complex)
    Y_inv = np.zeros((n, n), dtype=complex)
    for (start, stop), Bj, Bj_inv in zip(decomposition.ranges, block_maps,
                                         block_maps_inv):
        Y[start:stop, start:stop] = Bj
        Y_inv[start:stop, start:stop] = Bj_inv
    X = Y @ X0
    X_inv = X0_inv @ Y_inv
    model = _block_target(theta.zeros)
    residual = spectral_norm(X @ T @ X_inv - model)
    stage_residuals = {
        "orthogonalize": decomposition.certificate.residual,
        "blocks": tuple(block_residuals),
        "nilpotent": tuple(c.residual for c in nil_certs),
        "block_map_condition": spectral_norm(Y) * spectral_norm(Y_inv),
    }
    norms = tuple(sorted({
        "max_block_norm": max(spectral_norm(B) for B in block_maps),
        "max_block_inverse_norm": max(spectral_norm(B) for B in block_maps_inv),
    }.items()))
    return X, X_inv, model, residual, stage_residuals, norms, timings


def jordan_model_similarity(T, theta: BlaschkeProduct,
                            *, with_jordan_block: bool = True
                            ) -> JordanSimilarityResult:
    """Similarity from a multiplicity-free T annihilated by ``theta`` to the
    direct sum of the elementary compressed shifts, with the closed-range
    hypothesis checked (never assumed) via an exhaustive divisor sweep.

    A second certificate conjugating T to the compressed shift of theta
    itself is produced by running the same pipeline on that shift and
    composing through the common model.
    """
    from .diagnostics import divisor_sweep  # local import keeps modules acyclic

    T = as_matrix(T)
    with _stage("hypotheses"):
        ann = spectral_norm(apply_blaschke(theta, T))
        if ann > ANNIHILATION_TOL:
            raise AnnihilationError(ann, ANNIHILATION_TOL)
        if krylov_rank(T) != T.shape[0]:
            raise MultiplicityError("no cyclic vector found (Krylov rank deficient)")
        sweep = divisor_sweep(theta, T)
    warnings = []
    if sweep.margin <= 0.0:
        warnings.append(
            f"closed-range hypothesis violated: sweep margin {sweep.margin}")

    X, X_inv, model, residual, stage_residuals, norms, timings = \
        _to_jordan_model(T, theta)
    cert = _certificate(X, X_inv, residual, BLOCK_TOL,
                        kind="jordan_model_similarity",
                        stage_residuals=stage_residuals,
                        stage_timings=timings,
                        sweep_margin=sweep.margin,
                        sweep_witness=sweep.witness)

    jordan_cert = None
    if with_jordan_block:
        with _stage("jordan_block_composition"):
            S = jordan_block_matrix(theta).matrix
            XS, XS_inv, _, res_S, _, _, _ = _to_jordan_model(S, theta)
            Xf = XS_inv @ X
            Xf_inv = X_inv @ XS
            res_f = spectral_norm(Xf @ T @ Xf_inv - S)
            tol_f = max(BLOCK_TOL,
                        (residual + res_S) * spectral_norm(XS_inv) *
                        spectral_norm(XS) * 1.01)
            jordan_cert = _certificate(Xf, Xf_inv, res_f, tol_f,
                                       kind="jordan_block_similarity",
                                       model_residual=residual,
                                       shift_pipeline_residual=res_S)

    return JordanSimilarityResult(
        certificate=cert,
        jordan_block_certificate=jordan_cert,
        model=model,
        block_sizes=tuple(theta.zeros.multiplicities),
        stage_residuals=stage_residuals,
        block_map_norms=norms,
        sweep_margin=sweep.margin,
        warnings=tuple(warnings),
    )
