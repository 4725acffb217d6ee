"""Hyperbolic disk geometry and finite Blaschke products.

Conventions used throughout the package:

* a Blaschke factor is normalized so that ``b_lam(0) = |lam|``, and the
  factor at the origin is the identity function ``b_0(z) = z``;
* the order of a ``ZeroSet`` is the partial-product order, with
  multiplicities expanded in place;
* an empty ``ZeroSet`` is permitted and denotes the trivial divisor
  (the constant-one product), which the divisor lattice needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import UnsupportedOrderError

MAX_DERIVATIVE_ORDER = 12


@dataclass(frozen=True)
class DiskPoint:
    """A point strictly inside the open unit disk."""

    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not abs(v) < 1.0:
            raise ValueError(f"{v!r} is not strictly inside the unit disk")
        object.__setattr__(self, "value", v)


def _point_value(p) -> complex:
    if isinstance(p, DiskPoint):
        return p.value
    return DiskPoint(complex(p)).value


@dataclass(frozen=True)
class ZeroSet:
    """Ordered zeros with positive integer multiplicities.

    The entry order fixes how partial products interleave; concatenation
    preserves order.
    """

    entries: tuple

    def __post_init__(self):
        norm = []
        for point, mult in self.entries:
            if not isinstance(point, DiskPoint):
                point = DiskPoint(complex(point))
            mult = int(mult)
            if mult < 1:
                raise ValueError("multiplicities must be positive integers")
            norm.append((point, mult))
        values = [p.value for p, _ in norm]
        if len(set(values)) != len(values):
            raise ValueError("zero points must be pairwise distinct")
        object.__setattr__(self, "entries", tuple(norm))

    @classmethod
    def from_points(cls, points: Iterable, multiplicities: Sequence[int] | None = None) -> "ZeroSet":
        points = list(points)
        if multiplicities is None:
            multiplicities = [1] * len(points)
        if len(points) != len(multiplicities):
            raise ValueError("points and multiplicities must have the same length")
        return cls(tuple((p, m) for p, m in zip(points, multiplicities)))

    @property
    def points(self) -> tuple:
        return tuple(p.value for p, _ in self.entries)

    @property
    def multiplicities(self) -> tuple:
        return tuple(m for _, m in self.entries)

    @property
    def degree(self) -> int:
        return sum(self.multiplicities)

    @property
    def max_multiplicity(self) -> int:
        return max(self.multiplicities) if self.entries else 0

    def expanded(self) -> tuple:
        """Zeros repeated by multiplicity, in entry order."""
        out = []
        for point, mult in self.entries:
            out.extend([point.value] * mult)
        return tuple(out)

    def concat(self, other: "ZeroSet") -> "ZeroSet":
        return ZeroSet(self.entries + other.entries)

    def without_entry(self, index: int) -> "ZeroSet":
        if not 0 <= index < len(self.entries):
            raise IndexError(index)
        return ZeroSet(self.entries[:index] + self.entries[index + 1:])

    def with_exponents(self, exponents: Sequence[int]) -> "ZeroSet":
        """Sub-divisor with multiplicities replaced by ``exponents`` (zeros dropped)."""
        if len(exponents) != len(self.entries):
            raise ValueError("one exponent per zero required")
        kept = []
        for (point, mult), k in zip(self.entries, exponents):
            k = int(k)
            if not 0 <= k <= mult:
                raise ValueError(f"exponent {k} outside [0, {mult}]")
            if k > 0:
                kept.append((point, k))
        return ZeroSet(tuple(kept))

    def to_json_obj(self) -> list:
        return [
            {"re": p.value.real, "im": p.value.imag, "mult": m}
            for p, m in self.entries
        ]

    @classmethod
    def from_json_obj(cls, obj: list) -> "ZeroSet":
        return cls(tuple((complex(e["re"], e["im"]), int(e["mult"])) for e in obj))


@dataclass(frozen=True)
class BlaschkeProduct:
    """Finite Blaschke product with an optional unimodular front constant."""

    zeros: ZeroSet
    unimodular_constant: complex = 1.0

    def __post_init__(self):
        c = complex(self.unimodular_constant)
        if abs(abs(c) - 1.0) > 1e-12:
            raise ValueError(f"constant {c!r} is not unimodular")
        object.__setattr__(self, "unimodular_constant", c)

    @classmethod
    def one(cls) -> "BlaschkeProduct":
        return cls(ZeroSet(()))

    @classmethod
    def from_points(cls, points, multiplicities=None) -> "BlaschkeProduct":
        return cls(ZeroSet.from_points(points, multiplicities))

    @property
    def degree(self) -> int:
        return self.zeros.degree

    def evaluate(self, z):
        return evaluate(self, z)

    def derivative(self, z, order: int):
        return derivative(self, z, order)

    def pow(self, k: int) -> "BlaschkeProduct":
        if k < 0:
            raise ValueError("nonnegative powers only")
        if k == 0:
            return BlaschkeProduct.one()
        zs = ZeroSet(tuple((p, m * k) for p, m in self.zeros.entries))
        return BlaschkeProduct(zs, self.unimodular_constant ** k)


def blaschke_factor(lam, z):
    """Single factor ``b_lam`` evaluated at ``z`` (scalar or array).

    ``b_0(z) = z``; otherwise the normalization makes ``b_lam(0) = |lam|``.
    """
    lam = _point_value(lam)
    z = np.asarray(z, dtype=complex)
    if lam == 0:
        out = z
    else:
        out = (np.conj(lam) / abs(lam)) * (lam - z) / (1.0 - np.conj(lam) * z)
    if out.ndim == 0:
        return complex(out)
    return out


def pseudo_distance(x, y) -> float:
    """Pseudohyperbolic distance |b_x(y)|; symmetric, zero iff the points agree."""
    x = _point_value(x)
    y = _point_value(y)
    if x == y:
        return 0.0
    return abs(blaschke_factor(x, y))


def partial_evaluate(product: BlaschkeProduct, m: int, z):
    """Product of the first ``m`` factors (multiplicity-expanded order).

    ``m = 0`` is the empty product.  The unimodular constant multiplies
    every partial product, so the full partial equals ``evaluate``.
    """
    factors = product.zeros.expanded()
    if not 0 <= m <= len(factors):
        raise ValueError(f"m={m} outside [0, {len(factors)}]")
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, product.unimodular_constant, dtype=complex)
    for lam in factors[:m]:
        out = out * blaschke_factor(lam, z)
    if out.ndim == 0:
        return complex(out)
    return out


def evaluate(product: BlaschkeProduct, z):
    """Value of the full product at ``z`` (scalar or array)."""
    return partial_evaluate(product, product.degree, z)


def carleson_constant(zeros: ZeroSet) -> float:
    """Separation constant min_k prod_{j != k} |b_{lam_j}(lam_k)|.

    Defined for simple zeros only; a single point has constant 1 (empty
    product).
    """
    if any(m != 1 for m in zeros.multiplicities):
        raise ValueError("Carleson constant is defined for simple zeros only")
    pts = zeros.points
    if len(pts) == 0:
        raise ValueError("at least one point required")
    best = math.inf
    for k, target in enumerate(pts):
        prod = 1.0
        for j, lam in enumerate(pts):
            if j != k:
                prod *= pseudo_distance(lam, target)
        best = min(best, prod)
    return best


# -- Taylor jets -------------------------------------------------------------
#
# Derivatives of products of Blaschke factors are computed exactly by
# combining per-factor Taylor expansions (closed forms) with Cauchy
# products; no finite differences anywhere.

def _factor_jet(lam: complex, z0: complex, order: int) -> np.ndarray:
    jet = np.zeros(order + 1, dtype=complex)
    if lam == 0:
        jet[0] = z0
        if order >= 1:
            jet[1] = 1.0
        return jet
    u = lam - z0
    v = 1.0 - np.conj(lam) * z0
    gamma = np.conj(lam) / abs(lam)
    t = np.conj(lam) / v
    jet[0] = gamma * u / v
    tk = 1.0
    for k in range(1, order + 1):
        jet[k] = (gamma / v) * (u * t * tk - tk)
        tk *= t
    return jet


def jet_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    order = len(a) - 1
    return np.convolve(a, b)[: order + 1]


def taylor_jet(product: BlaschkeProduct, z, order: int) -> np.ndarray:
    """Taylor coefficients of the product at ``z`` up to ``order``."""
    z0 = complex(z)
    jet = np.zeros(order + 1, dtype=complex)
    jet[0] = product.unimodular_constant
    for point, mult in product.zeros.entries:
        fj = _factor_jet(point.value, z0, order)
        for _ in range(mult):
            jet = jet_multiply(jet, fj)
    return jet


def derivative(product: BlaschkeProduct, z, order: int):
    """Exact ``order``-th derivative of the product at ``z``."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"order {order} exceeds the supported maximum {MAX_DERIVATIVE_ORDER}")
    if order == 0:
        return evaluate(product, z)
    jet = taylor_jet(product, z, order)
    return complex(jet[order] * math.factorial(order))


def involution_residual(lam, n_points: int = 100) -> float:
    """Max of |b_lam(b_lam(z)) - z| over a deterministic interior grid."""
    lam = _point_value(lam)
    n_r = max(2, int(round(math.sqrt(n_points))))
    n_a = max(2, n_points // n_r)
    radii = np.linspace(0.05, 0.95, n_r)
    angles = np.linspace(0.0, 2.0 * np.pi, n_a, endpoint=False)
    zs = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    back = blaschke_factor(lam, blaschke_factor(lam, zs))
    return float(np.max(np.abs(back - zs)))


# -- scenario generation -----------------------------------------------------

@dataclass(frozen=True)
class SequenceSpec:
    """Description of a generated zero configuration.

    kinds:
      * ``exponential``       -- lam_j = 1 - param**j, j = 1..count
      * ``clustered_pairs``   -- count/2 well-spread cluster centers, each
                                 with a partner at radial offset ``param``
      * ``uniform_hyperbolic``-- seeded rejection sampling with pairwise
                                 pseudo-distance floor ``param``
    """

    kind: str
    count: int
    param: float
    seed: int | None = None
    multiplicity_pattern: tuple = (1,)

    def __post_init__(self):
        if self.kind not in ("exponential", "clustered_pairs", "uniform_hyperbolic"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        object.__setattr__(self, "multiplicity_pattern",
                           tuple(int(m) for m in self.multiplicity_pattern))

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "count": self.count,
            "param": self.param,
            "seed": self.seed,
            "multiplicity_pattern": list(self.multiplicity_pattern),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SequenceSpec":
        return cls(
            kind=obj["kind"],
            count=int(obj["count"]),
            param=float(obj["param"]),
            seed=None if obj.get("seed") is None else int(obj["seed"]),
            multiplicity_pattern=tuple(obj.get("multiplicity_pattern", [1])),
        )


_CLUSTER_RADIUS = 0.85


def generate_zero_set(spec: SequenceSpec) -> ZeroSet:
    """Deterministic point generation; the seed fixes all randomness."""
    if spec.kind == "exponential":
        r = spec.param
        if not 0.0 < r < 1.0:
            raise ValueError("exponential ratio must lie in (0, 1)")
        points = [1.0 - r ** j for j in range(1, spec.count + 1)]
    elif spec.kind == "clustered_pairs":
        if spec.count % 2 != 0:
            raise ValueError("clustered_pairs needs an even count")
        gap = spec.param
        if not 0.0 < gap < 1.0 - _CLUSTER_RADIUS:
            raise ValueError("gap must keep partners inside the disk")
        n_pairs = spec.count // 2
        points = []
        for i in range(n_pairs):
            center = _CLUSTER_RADIUS * np.exp(2j * np.pi * i / n_pairs)
            points.append(complex(center))
            points.append(complex(center * (1.0 + gap / _CLUSTER_RADIUS)))
    else:  # uniform_hyperbolic
        floor = spec.param
        rng = np.random.default_rng(spec.seed)
        points: list = []
        attempts = 0
        while len(points) < spec.count:
            attempts += 1
            if attempts > 20000:
                raise ValueError(
                    f"could not place {spec.count} points with separation {floor}")
            radius = 0.85 * math.sqrt(rng.uniform())
            cand = radius * np.exp(2j * np.pi * rng.uniform())
            if all(pseudo_distance(cand, p) >= floor for p in points):
                points.append(complex(cand))
    mults = [spec.multiplicity_pattern[i % len(spec.multiplicity_pattern)]
             for i in range(len(points))]
    return ZeroSet.from_points(points, mults)
