"""
Enumeration Module
==================
Exhaustive periodic orbit enumeration and the functionals evaluated on orbits.

Features:
- All periodic orbits of period <= N, canonical and duplicate free
- Ratio averages, brute force beta over orbits
- Gap D(O) and alpha-deviation d_{alpha,Z}(O)
- Entropy of shifts (power iteration), shortest cycles, decay scans
"""

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..errors import EnumerationCapError, KindMismatchError, ValidationError
from .dynamics import (
    CirclePoint,
    Point,
    SymbolPoint,
    SystemDescriptor,
    SystemKind,
    TorusPoint,
    apply,
    canonical_rotation,
    check_point,
    distance,
    format_word,
    path_between,
    point_key,
    primitive_root,
    truncated_distance,
)
from .observables import FLOAT_TOL, Observable, Weight, power

logger = structlog.get_logger("Enumeration")

Real = Union[Fraction, float]

DEFAULT_ENUM_BUDGET = 2 ** 20

# Depth allowed when the entropy is zero (no exponential growth).
ZERO_ENTROPY_MAX_DEPTH = 64


# =============================================================================
# ORBITS
# =============================================================================

@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit stored from its canonical representative."""
    representative: Point
    period: int
    points: Tuple[Point, ...]

    @property
    def sort_key(self) -> Tuple:
        return (self.period, point_key(self.representative))

    def contains(self, point: Point) -> bool:
        return point in self.points

    def label(self) -> str:
        if isinstance(self.representative, SymbolPoint):
            return str(self.representative)
        return "{" + ", ".join(str(p) for p in self.points) + "}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "period": self.period,
            "representative": self.representative.to_dict(),
            "label": self.label(),
        }

    def __str__(self) -> str:
        return self.label()


def orbit_of(system: SystemDescriptor, point: Point) -> PeriodicOrbit:
    """The orbit of a periodic point, with its canonical representative first."""
    check_point(system, point)
    if isinstance(point, SymbolPoint):
        if point.prefix:
            raise ValidationError(f"{point} is not periodic")
        word = canonical_rotation(point.period)
        points = tuple(SymbolPoint(word[i:] + word[:i]) for i in range(len(word)))
        return PeriodicOrbit(points[0], len(word), points)
    seen = [point]
    current = apply(system, point)
    while current != point:
        if len(seen) > 10 ** 7:
            raise ValidationError(f"{point} is not periodic")
        seen.append(current)
        current = apply(system, current)
    start = min(range(len(seen)), key=lambda i: point_key(seen[i]))
    points = tuple(seen[start:] + seen[:start])
    return PeriodicOrbit(points[0], len(points), points)


def orbit_from_word(system: SystemDescriptor, word: Sequence[int]) -> PeriodicOrbit:
    return orbit_of(system, SymbolPoint(tuple(word)))


# =============================================================================
# ENTROPY AND CAPS
# =============================================================================

def sft_entropy(system: SystemDescriptor, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """log of the Perron root of the transition matrix, by power iteration."""
    if not system.is_shift:
        raise KindMismatchError("symbolic system", system.kind.value)
    return matrix_entropy(system.transitions, tol, max_iter)


def matrix_entropy(matrix: Sequence[Sequence[int]], tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """log of the Perron root of a 0/1 matrix (0 when the root is <= 1)."""
    # A + I has the same Perron vector and is aperiodic, so the iteration converges.
    M = np.array(matrix, dtype=float) + np.eye(len(matrix))
    v = np.ones(M.shape[0]) / M.shape[0]
    rho = 0.0
    for _ in range(max_iter):
        w = M @ v
        rho_new = float(w.sum() / v.sum())
        v = w / w.sum()
        if rho and abs(rho_new - rho) <= tol * rho_new * 1e-2:
            rho = rho_new
            break
        rho = rho_new
    perron = rho - 1.0
    return math.log(perron) if perron > 1 + 1e-12 else 0.0


@lru_cache(maxsize=256)
def topological_entropy(system: SystemDescriptor) -> float:
    if system.kind == SystemKind.CIRCLE:
        return math.log(system.k)
    if system.kind == SystemKind.TORUS_CAT:
        return system.asp.lam
    return sft_entropy(system)


def enumeration_budget() -> int:
    raw = os.environ.get("PERMIN_ENUM_BUDGET")
    return int(raw) if raw else DEFAULT_ENUM_BUDGET


def enumeration_cap(system: SystemDescriptor, budget: Optional[int] = None) -> int:
    """Largest N with N * h <= ln(budget)."""
    budget = budget or enumeration_budget()
    h = topological_entropy(system)
    if h <= 1e-12:
        return ZERO_ENTROPY_MAX_DEPTH
    return max(1, math.floor(math.log(budget) / h + 1e-9))


def shortest_cycle_length(system: SystemDescriptor) -> int:
    """Length of the shortest cycle of the transition graph."""
    if not system.is_shift:
        raise KindMismatchError("symbolic system", system.kind.value)
    best = None
    for s in range(len(system.transitions)):
        path = path_between(system, s, s)
        if path is not None and (best is None or len(path) < best):
            best = len(path)
    if best is None:
        raise ValidationError("transition graph has no cycle")
    return best


def cycle_length_bound(system: SystemDescriptor) -> float:
    """1 + M e^(1-h): bound on the shortest period of an SFT with M symbols."""
    return 1 + len(system.transitions) * math.exp(1 - sft_entropy(system))


# =============================================================================
# ENUMERATION
# =============================================================================

def _lyndon_words(system: SystemDescriptor, N: int) -> List[Tuple[int, ...]]:
    """Admissible cyclic Lyndon words of length <= N (pruned prenecklace tree)."""
    m = len(system.transitions)
    out: List[Tuple[int, ...]] = []
    a = [0] * (N + 1)

    def grow(t: int, p: int) -> None:
        # a[1..t] is an admissible prenecklace whose Lyndon prefix has length p
        if p == t and system.allowed(a[t], a[1]):
            out.append(tuple(a[1:t + 1]))
        if t == N:
            return
        start = a[t + 1 - p]
        for j in range(start, m):
            if not system.allowed(a[t], j):
                continue
            a[t + 1] = j
            grow(t + 1, p if j == start else t + 1)

    for s in range(m):
        a[1] = s
        grow(1, 1)
    return out


def _circle_orbits(system: SystemDescriptor, N: int) -> List[PeriodicOrbit]:
    k = system.k
    full = SystemDescriptor.full_shift(k)
    orbits = []
    for word in _lyndon_words(full, N):
        if word == (k - 1,):
            continue  # 0.(k-1)(k-1)... = 1 = 0
        n = len(word)
        B = 0
        for d in word:
            B = B * k + d
        q = k ** n - 1
        points = []
        for i in range(n):
            rotated = word[i:] + word[:i]
            Bi = 0
            for d in rotated:
                Bi = Bi * k + d
            points.append(CirclePoint(Fraction(Bi, q)))
        orbits.append(PeriodicOrbit(points[0], n, tuple(points)))
    return orbits


def _hermite_2x2(B: Tuple[Tuple[int, int], Tuple[int, int]]) -> Tuple[int, int, int]:
    """(g, e, f) with B Z^2 = [[g, 0], [e, f]] Z^2, g, f > 0 and 0 <= e < f."""
    (a, b), (c, d) = B

    def ext_gcd(x: int, y: int) -> Tuple[int, int, int]:
        if y == 0:
            return (abs(x), 1 if x >= 0 else -1, 0)
        g, s, t = ext_gcd(y, x % y)
        return g, t, s - (x // y) * t

    g, s, t = ext_gcd(a, b)
    # column operations [s, -b/g; t, a/g] are unimodular
    e = c * s + d * t
    f = c * (-b // g) + d * (a // g)
    if f < 0:
        f = -f
    e %= f
    return g, e, f


def _torus_orbits(system: SystemDescriptor, N: int) -> List[PeriodicOrbit]:
    A = system.matrix
    power_n = ((1, 0), (0, 1))
    seen = set()
    orbits = []
    for n in range(1, N + 1):
        (p, q), (r, s) = power_n
        (a, b), (c, d) = A
        power_n = ((p * a + q * c, p * b + q * d), (r * a + s * c, r * b + s * d))
        B = ((power_n[0][0] - 1, power_n[0][1]), (power_n[1][0], power_n[1][1] - 1))
        det = B[0][0] * B[1][1] - B[0][1] * B[1][0]
        g, _, f = _hermite_2x2(B)
        for i in range(g):
            for j in range(f):
                # x = B^{-1} (i, j)
                x = Fraction(B[1][1] * i - B[0][1] * j, det)
                y = Fraction(-B[1][0] * i + B[0][0] * j, det)
                point = TorusPoint(x, y)
                if point in seen:
                    continue
                orbit = orbit_of(system, point)
                seen.update(orbit.points)
                orbits.append(orbit)
    return orbits


@lru_cache(maxsize=64)
def _enumerate_cached(system: SystemDescriptor, N: int) -> Tuple[PeriodicOrbit, ...]:
    if system.kind == SystemKind.CIRCLE:
        orbits = _circle_orbits(system, N)
    elif system.kind == SystemKind.TORUS_CAT:
        orbits = _torus_orbits(system, N)
    else:
        orbits = []
        for word in _lyndon_words(system, N):
            points = tuple(SymbolPoint(word[i:] + word[:i]) for i in range(len(word)))
            orbits.append(PeriodicOrbit(points[0], len(word), points))
    orbits.sort(key=lambda o: o.sort_key)
    logger.info("orbits_enumerated", kind=system.kind.value, N=N, count=len(orbits))
    return tuple(orbits)


def enumerate_orbits(system: SystemDescriptor, N: int, budget: Optional[int] = None) -> List[PeriodicOrbit]:
    """All periodic orbits of period <= N, sorted by (period, representative)."""
    if N < 1:
        raise ValidationError("N must be >= 1", N=N)
    cap = enumeration_cap(system, budget)
    if N > cap:
        raise EnumerationCapError(N, cap)
    return list(_enumerate_cached(system, N))


def necklace_count(m: int, N: int) -> int:
    """Number of primitive necklaces of length <= N over m letters (Möbius formula)."""

    def mobius(n: int) -> int:
        result, p = 1, 2
        while p * p <= n:
            if n % p == 0:
                n //= p
                if n % p == 0:
                    return 0
                result = -result
            p += 1
        return -result if n > 1 else result

    total = 0
    for n in range(1, N + 1):
        total += sum(mobius(d) * m ** (n // d) for d in range(1, n + 1) if n % d == 0) // n
    return total


# =============================================================================
# ORBIT FUNCTIONALS
# =============================================================================

def _psi_of(weight: Union[Weight, Observable]) -> Observable:
    return weight.psi if isinstance(weight, Weight) else weight


def orbit_sum(u: Observable, system: SystemDescriptor, orbit: PeriodicOrbit) -> Real:
    total: Real = Fraction(0)
    for x in orbit.points:
        total += u.value(system, x)
    return total


def orbit_ratio_average(
    u: Observable, weight: Union[Weight, Observable], orbit: PeriodicOrbit, system: SystemDescriptor
) -> Real:
    """(sum_O u) / (sum_O psi)."""
    psi_sum = orbit_sum(_psi_of(weight), system, orbit)
    if psi_sum <= 0:
        raise ValidationError("weight sum over the orbit must be positive", orbit=orbit.label())
    return orbit_sum(u, system, orbit) / psi_sum


def gap(system: SystemDescriptor, orbit: PeriodicOrbit) -> Fraction:
    """D(O): delta for fixed points, else the least truncated pairwise distance."""
    delta = system.asp.delta
    if orbit.period == 1:
        return delta
    best = delta
    pts = orbit.points
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = min(best, truncated_distance(system, pts[i], pts[j]))
    return best


def distance_to_set(system: SystemDescriptor, x: Point, Z: Sequence[Point]) -> Fraction:
    return min(distance(system, x, z) for z in Z)


def deviation(system: SystemDescriptor, orbit: PeriodicOrbit, Z: Sequence[Point], alpha: Real = Fraction(1)) -> Real:
    """d_{alpha,Z}(O) = sum over x in O of d(x, Z)^alpha."""
    if not Z:
        raise ValidationError("reference set Z is empty")
    total: Real = Fraction(0)
    for x in orbit.points:
        total += power(distance_to_set(system, x, Z), alpha)
    return total


def points_of(orbits: Iterable[PeriodicOrbit]) -> List[Point]:
    """Flatten orbits into a duplicate free point list."""
    seen = set()
    out = []
    for orbit in orbits:
        for p in orbit.points:
            if p not in seen:
                seen.add(p)
                out.append(p)
    return out


@dataclass(frozen=True)
class OrbitStatistics:
    orbit: PeriodicOrbit
    u_sum: Real
    psi_sum: Real
    ratio_average: Real
    gap: Fraction
    deviation: Optional[Real] = None

    def to_row(self) -> List[Any]:
        return [
            self.orbit.period,
            self.orbit.label(),
            self.u_sum,
            self.psi_sum,
            self.ratio_average,
            self.gap,
            "" if self.deviation is None else self.deviation,
        ]


ORBIT_COLUMNS = ["period", "representative", "u_sum", "psi_sum", "ratio", "gap", "deviation"]


def orbit_statistics(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    orbit: PeriodicOrbit,
    Z: Optional[Sequence[Point]] = None,
    alpha: Real = Fraction(1),
) -> OrbitStatistics:
    u_sum = orbit_sum(u, system, orbit)
    psi_sum = orbit_sum(_psi_of(weight), system, orbit)
    return OrbitStatistics(
        orbit=orbit,
        u_sum=u_sum,
        psi_sum=psi_sum,
        ratio_average=u_sum / psi_sum,
        gap=gap(system, orbit),
        deviation=deviation(system, orbit, Z, alpha) if Z else None,
    )


# =============================================================================
# BRUTE FORCE BETA
# =============================================================================

@dataclass(frozen=True)
class BetaResult:
    value: Real
    argmin: Tuple[PeriodicOrbit, ...]
    N: int
    orbits_checked: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta_N": self.value,
            "argmin": [o.label() for o in self.argmin],
            "N": self.N,
            "orbits_checked": self.orbits_checked,
        }


def ties(a: Real, b: Real) -> bool:
    """Equality, exact for rationals and relative FLOAT_TOL otherwise."""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(a - b) <= FLOAT_TOL * max(1.0, abs(float(b)))


def beta_bruteforce(
    u: Observable,
    weight: Union[Weight, Observable],
    system: SystemDescriptor,
    N: int,
    budget: Optional[int] = None,
) -> BetaResult:
    """Least ratio average over all orbits of period <= N, with every minimizer."""
    orbits = enumerate_orbits(system, N, budget)
    psi = _psi_of(weight)
    best: Optional[Real] = None
    argmin: List[PeriodicOrbit] = []
    for orbit in orbits:
        r = orbit_ratio_average(u, psi, orbit, system)
        if best is None or (r < best and not ties(r, best)):
            best, argmin = r, [orbit]
        elif ties(r, best):
            argmin.append(orbit)
            if r < best:
                best = r
    logger.info("beta_bruteforce", N=N, beta=str(best), argmin=[o.label() for o in argmin])
    return BetaResult(value=best, argmin=tuple(argmin), N=N, orbits_checked=len(orbits))


# =============================================================================
# DECAY SCAN
# =============================================================================

def bq_decay_scan(
    system: SystemDescriptor,
    Z: Sequence[Point],
    alpha: Real = Fraction(1),
    k: int = 2,
    n_values: Iterable[int] = range(2, 13),
    budget: Optional[int] = None,
) -> List[Dict[str, Any]]:
    """
    a_n = n^k * min d_{alpha,Z}(O) over orbits of period <= n not contained in Z.
    """
    zset = set(Z)
    rows = []
    for n in n_values:
        best: Optional[Real] = None
        best_orbit = None
        for orbit in enumerate_orbits(system, n, budget):
            if all(p in zset for p in orbit.points):
                continue
            dev = deviation(system, orbit, Z, alpha)
            if best is None or dev < best:
                best, best_orbit = dev, orbit
        if best is None:
            continue
        rows.append({"n": n, "a_n": n ** k * best, "min_deviation": best,
                     "orbit": best_orbit.label()})
    logger.info("bq_decay_scan", rows=len(rows), k=k)
    return rows
