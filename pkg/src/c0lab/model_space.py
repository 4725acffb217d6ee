"""Model spaces of finite Blaschke products and their compressed shifts.

The model space of a degree-n product is realized through the
Takenaka-Malmquist orthonormal basis over the multiplicity-expanded zero
list.  The compressed multiplication-by-z operator is computed by exact
polynomial algebra in numerator coordinates (boundary quadrature is kept
as an independent verification route, see ``boundary_gram``).

The functional calculus for a matrix annihilated by a product is the
Hermite interpolating polynomial on the confluent node list: whenever
``theta(T) = 0``, any function agreeing with u to order m_j - 1 at each
zero produces the same operator, so u(T) := p(T) is well defined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .blaschke import (
    BlaschkeProduct,
    ZeroSet,
    blaschke_factor,
    involution_residual,
    taylor_jet,
)
from .errors import (
    AnnihilationError,
    CombinatorialLimitError,
    UnsupportedFunctionError,
    UnsupportedOrderError,
    WorkbenchError,
)
from .linalg import (
    RANK_RTOL,
    as_matrix,
    krylov_rank,
    matrix_to_json,
    null_space,
    polar_unitary,
    spectral_norm,
)

ANNIHILATION_TOL = 1e-8
DIVISOR_LATTICE_LIMIT = 2 ** 16
BOUNDARY_GRID = 4096


# -- model basis -------------------------------------------------------------

@dataclass(frozen=True)
class ModelBasis:
    """Takenaka-Malmquist basis of the model space of ``theta``."""

    theta: BlaschkeProduct
    node_order: tuple

    @property
    def basis_dim(self) -> int:
        return len(self.node_order)

    def evaluate(self, k: int, z):
        """Value of the k-th basis element at ``z`` (scalar or array)."""
        w = self.node_order
        z = np.asarray(z, dtype=complex)
        wk = w[k]
        out = math.sqrt(1.0 - abs(wk) ** 2) / (1.0 - np.conj(wk) * z)
        for wi in w[:k]:
            out = out * blaschke_factor(wi, z)
        if out.ndim == 0:
            return complex(out)
        return out

    def evaluate_all(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.stack([self.evaluate(k, z) for k in range(self.basis_dim)])

    def numerator_coefficients(self) -> np.ndarray:
        """Columns: monomial coefficients of each basis numerator over the
        common denominator prod (1 - conj(w_i) z)."""
        w = self.node_order
        n = len(w)
        E = np.zeros((n, n), dtype=complex)
        for k, wk in enumerate(w):
            coeffs = np.array([math.sqrt(1.0 - abs(wk) ** 2)], dtype=complex)
            for wi in w[:k]:
                gamma = -1.0 if wi == 0 else np.conj(wi) / abs(wi)
                coeffs = P.polymul(coeffs, np.array([gamma * wi, -gamma]))
            for wi in w[k + 1:]:
                coeffs = P.polymul(coeffs, np.array([1.0, -np.conj(wi)]))
            E[: len(coeffs), k] = coeffs
        return E


def model_basis(theta: BlaschkeProduct) -> ModelBasis:
    if theta.degree < 1:
        raise ValueError("model space requires degree >= 1")
    return ModelBasis(theta=theta, node_order=theta.zeros.expanded())


def boundary_gram(basis: ModelBasis, n_nodes: int = BOUNDARY_GRID) -> np.ndarray:
    """Gram matrix by uniform boundary quadrature; the orthonormality oracle."""
    nodes = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    V = basis.evaluate_all(nodes)
    return (V @ V.conj().T) / n_nodes


# -- compressed shift --------------------------------------------------------

@dataclass(frozen=True)
class CompressedShift:
    """Matrix of the compression of multiplication-by-z to the model space."""

    theta: BlaschkeProduct
    matrix: np.ndarray

    def validate(self) -> dict:
        """Measure the contraction/annihilation/cyclicity invariants."""
        top = spectral_norm(self.matrix)
        ann = spectral_norm(apply_blaschke(self.theta, self.matrix))
        cyclic = krylov_rank(self.matrix) == self.matrix.shape[0]
        return {"largest_singular_value": top, "annihilation_norm": ann,
                "cyclic": cyclic}

    def to_json_obj(self) -> dict:
        return {"theta": self.theta.zeros.to_json_obj(),
                "matrix": matrix_to_json(self.matrix)}


def jordan_block_matrix(theta: BlaschkeProduct) -> CompressedShift:
    """Compressed shift in the Takenaka-Malmquist basis.

    Works in numerator coordinates: multiplication by z followed by
    degree reduction modulo the numerator of theta is the compression,
    and the basis change back to the orthonormal basis is a linear solve.
    """
    basis = model_basis(theta)
    w = basis.node_order
    n = len(w)
    E = basis.numerator_coefficients()

    # z * z^(n-1) reduces by the monic-up-to-sign product prod (w_i - z).
    prod = np.array([1.0], dtype=complex)
    for wi in w:
        prod = P.polymul(prod, np.array([wi, -1.0]))
    sign = (-1.0) ** n
    Mz = np.zeros((n, n), dtype=complex)
    for a in range(n - 1):
        Mz[a + 1, a] = 1.0
    Mz[:, n - 1] = -sign * prod[:n]

    S = np.linalg.solve(E, Mz @ E)
    return CompressedShift(theta=theta, matrix=S)


def apply_blaschke(product: BlaschkeProduct, T) -> np.ndarray:
    """Evaluate a finite Blaschke product at a square matrix.

    Uses the Moebius factor form ``gamma (lam - T)(1 - conj(lam) T)^{-1}``
    directly; all factors commute, so the order is immaterial.
    """
    T = as_matrix(T)
    n = T.shape[0]
    eye = np.eye(n, dtype=complex)
    out = product.unimodular_constant * eye
    for point, mult in product.zeros.entries:
        lam = point.value
        if lam == 0:
            factor = T
        else:
            gamma = np.conj(lam) / abs(lam)
            factor = gamma * np.linalg.solve(eye - np.conj(lam) * T, lam * eye - T)
        out = out @ np.linalg.matrix_power(factor, mult)
    return out


# -- function specifications --------------------------------------------------

def _poly_value(coeffs, z):
    return P.polyval(np.asarray(z, dtype=complex), np.asarray(coeffs, dtype=complex))

def _poly_jet(coeffs, z0: complex, order: int) -> np.ndarray:
    p = np.asarray(coeffs, dtype=complex)
    jet = np.zeros(order + 1, dtype=complex)
    jet[0] = P.polyval(z0, p)
    d = p
    for k in range(1, order + 1):
        d = P.polyder(d)
        jet[k] = P.polyval(z0, d) / math.factorial(k)
    return jet


def _jet_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    order = len(num) - 1
    if den[0] == 0:
        raise ZeroDivisionError("denominator vanishes at the expansion point")
    q = np.zeros(order + 1, dtype=complex)
    for k in range(order + 1):
        acc = num[k]
        for i in range(k):
            acc -= q[i] * den[k - i]
        q[k] = acc / den[0]
    return q


@dataclass(frozen=True)
class FunctionSpec:
    """Function usable in the calculus: value and derivatives anywhere inside.

    One of three shapes: a polynomial, a Blaschke subproduct, or a
    rational function whose poles stay outside the closed disk.
    """

    kind: str
    numerator: tuple = ()
    denominator: tuple = (1.0,)
    product: BlaschkeProduct | None = None

    POLE_MARGIN = 1e-8

    @classmethod
    def from_polynomial(cls, coeffs: Sequence[complex]) -> "FunctionSpec":
        coeffs = tuple(complex(c) for c in coeffs) or (0.0 + 0.0j,)
        return cls(kind="polynomial", numerator=coeffs)

    @classmethod
    def from_blaschke(cls, product: BlaschkeProduct) -> "FunctionSpec":
        return cls(kind="blaschke", product=product)

    @classmethod
    def from_rational(cls, numerator: Sequence[complex],
                      denominator: Sequence[complex]) -> "FunctionSpec":
        num = tuple(complex(c) for c in numerator) or (0.0 + 0.0j,)
        den = tuple(complex(c) for c in denominator)
        if not den or all(c == 0 for c in den):
            raise ValueError("denominator must be nonzero")
        if len(den) > 1:
            roots = np.roots(np.asarray(den[::-1], dtype=complex))
            if roots.size and np.min(np.abs(roots)) < 1.0 + cls.POLE_MARGIN:
                raise ValueError(
                    f"denominator root of modulus {np.min(np.abs(roots)):.6f} "
                    f"inside the closed disk (margin {cls.POLE_MARGIN})")
        return cls(kind="rational", numerator=num, denominator=den)

    def value(self, z):
        if self.kind == "polynomial":
            return _poly_value(self.numerator, z)
        if self.kind == "rational":
            return _poly_value(self.numerator, z) / _poly_value(self.denominator, z)
        return self.product.evaluate(z)

    def jet(self, z, order: int) -> np.ndarray:
        """Taylor coefficients at ``z`` through ``order``."""
        if order > 64:
            raise UnsupportedOrderError(f"jet order {order} unsupported")
        z0 = complex(z)
        if self.kind == "polynomial":
            return _poly_jet(self.numerator, z0, order)
        if self.kind == "rational":
            return _jet_divide(_poly_jet(self.numerator, z0, order),
                               _poly_jet(self.denominator, z0, order))
        if self.kind == "blaschke":
            return taylor_jet(self.product, z0, order)
        raise UnsupportedFunctionError(f"kind {self.kind!r} has no jet")

    def derivative(self, z, p: int):
        return complex(self.jet(z, p)[p] * math.factorial(p))


def as_function_spec(u) -> FunctionSpec:
    if isinstance(u, FunctionSpec):
        return u
    if isinstance(u, BlaschkeProduct):
        return FunctionSpec.from_blaschke(u)
    raise UnsupportedFunctionError(f"cannot interpret {type(u).__name__} as a function")


# -- Hermite functional calculus ----------------------------------------------

def _confluent_newton_coefficients(zeros: ZeroSet, u: FunctionSpec):
    """Newton coefficients of the Hermite interpolant of u on the zero set,
    nodes grouped by zero in entry order."""
    nodes = []
    for point, mult in zeros.entries:
        nodes.extend([point.value] * mult)
    n = len(nodes)
    jets = {point.value: u.jet(point.value, mult - 1)
            for point, mult in zeros.entries}
    table = np.zeros((n, n), dtype=complex)
    table[:, 0] = [jets[x][0] for x in nodes]
    for j in range(1, n):
        for i in range(n - j):
            if nodes[i + j] == nodes[i]:
                table[i, j] = jets[nodes[i]][j]
            else:
                table[i, j] = (table[i + 1, j - 1] - table[i, j - 1]) / (nodes[i + j] - nodes[i])
    return np.array(nodes, dtype=complex), table[0, :].copy()


def hermite_calculus(T, theta: BlaschkeProduct, u,
                     *, annihilation_tol: float = ANNIHILATION_TOL) -> np.ndarray:
    """u(T) for a matrix T annihilated by ``theta``.

    Returns p(T) for the unique polynomial p of degree < deg(theta)
    matching u to order m_j - 1 at each zero; u - p is then divisible by
    theta, so the value does not depend on the representative.
    """
    T = as_matrix(T)
    u = as_function_spec(u)
    if theta.degree < 1:
        raise ValueError("theta must have degree >= 1")
    residual = spectral_norm(apply_blaschke(theta, T))
    if residual > annihilation_tol:
        raise AnnihilationError(residual, annihilation_tol)
    nodes, coeffs = _confluent_newton_coefficients(theta.zeros, u)
    n = T.shape[0]
    eye = np.eye(n, dtype=complex)
    out = coeffs[-1] * eye
    for k in range(len(coeffs) - 2, -1, -1):
        out = out @ (T - nodes[k] * eye) + coeffs[k] * eye
    return out


# -- divisor lattice ----------------------------------------------------------

def divisor_count(theta: BlaschkeProduct) -> int:
    count = 1
    for m in theta.zeros.multiplicities:
        count *= m + 1
    return count


def inner_divisors(theta: BlaschkeProduct,
                   with_exponents: bool = False) -> Iterator:
    """All sub-divisors of ``theta``, from the trivial one up to theta itself.

    Enumeration order is the lexicographic order of exponent vectors, so
    sweeps over it are reproducible.
    """
    total = divisor_count(theta)
    if total > DIVISOR_LATTICE_LIMIT:
        raise CombinatorialLimitError(
            f"{total} divisors exceed the limit {DIVISOR_LATTICE_LIMIT}")
    ranges = [range(m + 1) for m in theta.zeros.multiplicities]
    for exps in itertools.product(*ranges):
        div = BlaschkeProduct(theta.zeros.with_exponents(exps))
        yield (exps, div) if with_exponents else div


# -- partial isometry and crown alignment -------------------------------------

def partial_isometry_defect(A) -> float:
    """Spectral norm of A A* A - A; zero exactly for partial isometries."""
    A = as_matrix(A)
    return spectral_norm(A @ A.conj().T @ A - A)


def nilpotent_jordan_cell(m: int) -> np.ndarray:
    """Matrix of the compressed shift of z^m: e_k -> e_{k+1}, e_{m-1} -> 0."""
    J = np.zeros((m, m), dtype=complex)
    for k in range(m - 1):
        J[k + 1, k] = 1.0
    return J


def crown_alignment(lam, m: int):
    """Unitary U with U* b_lam(S(b_lam^m)) U = S(z^m), plus the residual.

    The candidate basis change sends the canonical orbit of a top
    singular vector to the coordinate basis; its polar factor is the
    alignment unitary.
    """
    factor = BlaschkeProduct.from_points([lam])
    cell = jordan_block_matrix(factor.pow(m)).matrix
    A = apply_blaschke(factor, cell)
    J = nilpotent_jordan_cell(m)
    if m == 1:
        return np.eye(1, dtype=complex), abs(complex(A[0, 0]))
    _, _, vh = np.linalg.svd(np.linalg.matrix_power(A, m - 1))
    xi = vh[0].conj()
    cols = [xi]
    for _ in range(m - 1):
        cols.append(A @ cols[-1])
    U = polar_unitary(np.stack(cols, axis=1))
    dist = spectral_norm(U.conj().T @ A @ U - J)
    return U, dist


def crown_equivalence_check(lam, m: int) -> float:
    """Aligned distance between b_lam(S(b_lam^m)) and S(z^m).

    Also replays the Moebius involution b_lam(b_lam(z)) = z on a
    100-point grid; a residual above 1e-12 signals a broken factor
    convention and raises.
    """
    if not 1 <= m <= 12:
        raise ValueError("multiplicity must lie in [1, 12]")
    inv = involution_residual(lam, 100)
    if inv > 1e-12:
        raise WorkbenchError(f"involution residual {inv:.3e} exceeds 1e-12")
    _, dist = crown_alignment(lam, m)
    return dist
