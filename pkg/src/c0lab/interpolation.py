"""Minimal-norm disk interpolation through the Pick matrix.

The extremal interpolant at the minimal norm is built from a kernel
vector of the critical Pick matrix: with kernel vector v, nodes lam_j
and targets w_j, the function

    f(z) = c^2 * sum_j v_j k_j(z) / sum_j v_j conj(w_j) k_j(z),
    k_j(z) = 1 / (1 - conj(lam_j) z),

interpolates the data and has constant modulus c on the circle.  Norms
are certified on a uniform 4096-point boundary grid with a documented
1e-6 slack; no exact optimization is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Collection, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .blaschke import DiskPoint, ZeroSet
from .errors import DegenerateKernelError
from .model_space import FunctionSpec
from .linalg import spectral_norm

BOUNDARY_GRID = 4096
NORM_SLACK = 1e-6
VALUE_TOL = 1e-9
KERNEL_GAP = 1e-12
POLE_MARGIN = 1e-8
HERMITE_SIZE_LIMIT = 64


@dataclass(frozen=True)
class PickProblem:
    """Distinct interpolation nodes with complex targets."""

    nodes: tuple
    targets: tuple

    def __post_init__(self):
        nodes = tuple(p if isinstance(p, DiskPoint) else DiskPoint(complex(p))
                      for p in self.nodes)
        targets = tuple(complex(w) for w in self.targets)
        if len(nodes) != len(targets):
            raise ValueError("nodes and targets must have the same length")
        if len(nodes) == 0:
            raise ValueError("at least one node required")
        values = [p.value for p in nodes]
        if len(set(values)) != len(values):
            raise ValueError("nodes must be distinct")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "targets", targets)

    @property
    def node_values(self) -> np.ndarray:
        return np.array([p.value for p in self.nodes], dtype=complex)

    @property
    def target_values(self) -> np.ndarray:
        return np.array(self.targets, dtype=complex)

    def to_json_obj(self) -> dict:
        return {
            "nodes": [{"re": p.value.real, "im": p.value.imag} for p in self.nodes],
            "targets": [{"re": w.real, "im": w.imag} for w in self.targets],
        }


@dataclass(frozen=True)
class Interpolant:
    """Rational interpolant with a boundary-grid norm certificate."""

    numerator: tuple
    denominator: tuple
    certified_norm: float
    achieved_values: tuple
    grid_size: int = BOUNDARY_GRID
    norm_slack: float = NORM_SLACK

    def __post_init__(self):
        num = tuple(complex(c) for c in self.numerator) or (0j,)
        den = tuple(complex(c) for c in self.denominator) or (1.0 + 0j,)
        if all(c == 0 for c in den):
            raise ValueError("denominator must be nonzero")
        if len(den) > 1:
            roots = np.roots(np.asarray(den[::-1], dtype=complex))
            if roots.size and np.min(np.abs(roots)) < 1.0 + POLE_MARGIN:
                raise ValueError(
                    f"denominator root of modulus {np.min(np.abs(roots)):.8f} "
                    f"inside the closed disk")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)
        object.__setattr__(self, "achieved_values",
                           tuple(complex(v) for v in self.achieved_values))

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        out = P.polyval(z, np.asarray(self.numerator)) / \
            P.polyval(z, np.asarray(self.denominator))
        if out.ndim == 0:
            return complex(out)
        return out

    def as_function_spec(self) -> FunctionSpec:
        if len(self.denominator) == 1:
            return FunctionSpec.from_polynomial(
                tuple(c / self.denominator[0] for c in self.numerator))
        return FunctionSpec.from_rational(self.numerator, self.denominator)

    def to_json_obj(self) -> dict:
        return {
            "numerator": [{"re": c.real, "im": c.imag} for c in self.numerator],
            "denominator": [{"re": c.real, "im": c.imag} for c in self.denominator],
            "certified_norm": self.certified_norm,
            "achieved_values": [{"re": v.real, "im": v.imag} for v in self.achieved_values],
            "grid_size": self.grid_size,
            "norm_slack": self.norm_slack,
        }


def _boundary_nodes(n: int = BOUNDARY_GRID) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


def _grid_norm(num, den, n: int = BOUNDARY_GRID) -> float:
    zs = _boundary_nodes(n)
    vals = P.polyval(zs, np.asarray(num, dtype=complex)) / \
        P.polyval(zs, np.asarray(den, dtype=complex))
    return float(np.max(np.abs(vals)))


def pick_matrix(problem: PickProblem, c: float) -> np.ndarray:
    """Hermitian matrix with entries (c^2 - w_i conj(w_j)) / (1 - lam_i conj(lam_j))."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    lam = problem.node_values
    w = problem.target_values
    return (c ** 2 - np.outer(w, w.conj())) / (1.0 - np.outer(lam, lam.conj()))


def _is_psd(M: np.ndarray) -> bool:
    vals = np.linalg.eigvalsh(M)
    n = M.shape[0]
    floor = -1e-12 * max(abs(float(np.trace(M).real)) / n, 1e-30)
    return bool(vals.min() >= floor)


def minimal_norm(problem: PickProblem) -> float:
    """Smallest c with a positive semidefinite Pick matrix.

    Bisection to relative width 1e-10; the lower endpoint max |w_j| is
    forced by the diagonal, so constant data short-circuits.
    """
    w = problem.target_values
    lo = float(np.max(np.abs(w)))
    if lo == 0.0:
        return 0.0
    if _is_psd(pick_matrix(problem, lo)):
        return lo
    hi = 2.0 * lo
    for _ in range(200):
        if _is_psd(pick_matrix(problem, hi)):
            break
        hi *= 2.0
    else:
        raise RuntimeError("could not bracket the minimal norm")
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if _is_psd(pick_matrix(problem, mid)):
            hi = mid
        else:
            lo = mid
    return hi


def _constant_interpolant(problem: PickProblem, value: complex) -> Interpolant:
    achieved = tuple(value for _ in problem.nodes)
    return Interpolant(numerator=(value,), denominator=(1.0,),
                       certified_norm=abs(value), achieved_values=achieved)


def _deflate_common_disk_roots(num: np.ndarray, den: np.ndarray):
    """Cancel denominator roots inside the disk against matching numerator roots."""
    num = np.asarray(num, dtype=complex)
    den = np.asarray(den, dtype=complex)
    while len(den) > 1:
        roots = np.roots(den[::-1])
        inside = roots[np.abs(roots) < 1.0 + POLE_MARGIN]
        if inside.size == 0:
            break
        r = inside[0]
        num_val = P.polyval(r, num)
        scale = max(np.max(np.abs(num)), 1.0)
        if abs(num_val) > 1e-6 * scale:
            break  # genuine pole; the Interpolant constructor will object
        factor = np.array([-r, 1.0], dtype=complex)
        num = P.polydiv(num, factor)[0]
        den = P.polydiv(den, factor)[0]
    return num, den


def degenerate_interpolant(problem: PickProblem) -> Interpolant:
    """Extremal interpolant from the kernel of the critical Pick matrix."""
    w = problem.target_values
    lam = problem.node_values
    if np.all(w == w[0]):
        return _constant_interpolant(problem, complex(w[0]))
    c = minimal_norm(problem)
    M = pick_matrix(problem, c)
    vals, vecs = np.linalg.eigh(M)
    scale = max(float(np.max(np.abs(vals))), 1.0)
    if len(vals) > 1 and abs(vals[1] - vals[0]) <= KERNEL_GAP * scale:
        raise DegenerateKernelError(
            f"two smallest Pick eigenvalues within {KERNEL_GAP:.0e} relative "
            f"({vals[0]:.3e}, {vals[1]:.3e}); perturb the data")
    v = vecs[:, 0]

    # Common denominator prod (1 - conj(lam_j) z) clears the kernel sums.
    n = len(lam)
    num = np.zeros(n, dtype=complex)
    den = np.zeros(n, dtype=complex)
    for j in range(n):
        other = np.array([1.0], dtype=complex)
        for i in range(n):
            if i != j:
                other = P.polymul(other, np.array([1.0, -np.conj(lam[i])]))
        num[: len(other)] += (c ** 2) * v[j] * other
        den[: len(other)] += v[j] * np.conj(w[j]) * other
    num, den = _deflate_common_disk_roots(num, den)

    achieved = P.polyval(lam, num) / P.polyval(lam, den)
    if np.max(np.abs(achieved - w)) > VALUE_TOL * max(1.0, float(np.max(np.abs(w)))):
        raise DegenerateKernelError(
            "extremal construction missed the targets; perturb the data")
    norm = _grid_norm(num, den)
    return Interpolant(numerator=tuple(num), denominator=tuple(den),
                       certified_norm=norm,
                       achieved_values=tuple(achieved))


def indicator_interpolant(zeros: ZeroSet, indices: Collection[int]) -> Interpolant:
    """Extremal function taking value 1 on the chosen nodes and 0 elsewhere."""
    if any(m != 1 for m in zeros.multiplicities):
        raise ValueError("indicator interpolants require simple zeros")
    chosen = set(int(i) for i in indices)
    if not chosen <= set(range(len(zeros.entries))):
        raise ValueError("indices outside the zero set")
    targets = [1.0 if j in chosen else 0.0 for j in range(len(zeros.entries))]
    problem = PickProblem(nodes=zeros.points, targets=tuple(targets))
    return degenerate_interpolant(problem)


def flattening_interpolant(zeros: ZeroSet, values: Sequence[complex],
                           order: int) -> Interpolant:
    """Hermite polynomial with prescribed node values and flat derivatives.

    Matches values[j] at each zero and forces derivatives 1..order to
    vanish there; ``order`` must dominate every multiplicity so the
    result is usable wherever a representative modulo the product is
    needed.  No norm bound is claimed; the boundary-grid norm is
    recorded as measured.
    """
    values = [complex(v) for v in values]
    if len(values) != len(zeros.entries):
        raise ValueError("one value per zero required")
    if zeros.entries and order < zeros.max_multiplicity:
        raise ValueError(
            f"order {order} below the maximal multiplicity {zeros.max_multiplicity}")
    n_conditions = len(zeros.entries) * (order + 1)
    if n_conditions > HERMITE_SIZE_LIMIT:
        raise ValueError(
            f"{n_conditions} Hermite conditions exceed the limit {HERMITE_SIZE_LIMIT}")
    if len(set(values)) == 1:
        return _constant_interpolant(
            PickProblem(nodes=zeros.points, targets=tuple(values)), values[0])

    # Confluent Newton table: each node repeated order+1 times with jet
    # (value, 0, ..., 0).
    nodes: list = []
    data: list = []
    for (point, _), val in zip(zeros.entries, values):
        nodes.extend([point.value] * (order + 1))
        data.append(val)
    nodes_arr = np.array(nodes, dtype=complex)
    N = len(nodes_arr)
    table = np.zeros((N, N), dtype=complex)
    jet_of = {point.value: val for (point, _), val in zip(zeros.entries, values)}
    table[:, 0] = [jet_of[x] for x in nodes_arr]
    for j in range(1, N):
        for i in range(N - j):
            if nodes_arr[i + j] == nodes_arr[i]:
                table[i, j] = 0.0  # repeated node: prescribed derivative is zero
            else:
                table[i, j] = (table[i + 1, j - 1] - table[i, j - 1]) / \
                    (nodes_arr[i + j] - nodes_arr[i])
    coeffs_newton = table[0, :]

    # Expand the Newton form into monomial coefficients.
    poly = np.array([0.0], dtype=complex)
    basis = np.array([1.0], dtype=complex)
    for k in range(N):
        poly = P.polyadd(poly, coeffs_newton[k] * basis)
        basis = P.polymul(basis, np.array([-nodes_arr[k], 1.0]))
    num = tuple(poly)

    achieved = tuple(P.polyval(np.array(zeros.points, dtype=complex),
                               np.asarray(num, dtype=complex)))
    norm = _grid_norm(num, (1.0,))
    return Interpolant(numerator=num, denominator=(1.0,),
                       certified_norm=norm, achieved_values=achieved)


def empirical_interpolation_constant(zeros: ZeroSet,
                                     subsets: Sequence[Collection[int]] | None = None):
    """Max certified norm of indicator interpolants over index subsets.

    With ``subsets=None`` all 2^n subsets are swept (n <= 12); the two
    trivial subsets contribute norms 0 and 1 without a Pick solve.
    """
    n = len(zeros.entries)
    if subsets is None:
        if n > 12:
            raise ValueError("exhaustive sweep limited to 12 zeros; pass subsets")
        subsets = [[j for j in range(n) if mask >> j & 1] for mask in range(2 ** n)]
    best = 0.0
    argmax: tuple = ()
    for subset in subsets:
        subset = tuple(sorted(subset))
        if len(subset) == 0:
            norm = 0.0
        elif len(subset) == n:
            norm = 1.0
        else:
            norm = indicator_interpolant(zeros, subset).certified_norm
        if norm > best:
            best, argmax = norm, subset
    return best, argmax
