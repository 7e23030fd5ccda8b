"""
Dynamics Module
===============
Concrete hyperbolic systems (X, T) with exact point arithmetic.

Supported kinds:
- circle expanding map x -> k x mod 1 on reduced rationals
- full shift and subshift of finite type on eventually periodic words
- hyperbolic toral automorphism (cat map) on rational points of the torus

Each system stores its ASP constants (lambda, delta, C, L) and Lip_T. The
constants are relative to the metrics defined here: arc length on the circle,
2^-s on shifts (s = length of the longest common prefix), and the max of the
coordinate circle distances on the torus.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..errors import (
    InadmissibleWordError,
    KindMismatchError,
    PseudoOrbitError,
    ValidationError,
)

logger = structlog.get_logger("Dynamics")

Real = Union[Fraction, float]
Word = Tuple[int, ...]


class SystemKind(Enum):
    """Kinds of systems."""
    CIRCLE = "circle"
    FULL_SHIFT = "full_shift"
    SFT = "sft"
    TORUS_CAT = "torus_cat"


# =============================================================================
# WORDS
# =============================================================================

def least_rotation(word: Sequence[int]) -> int:
    """Index of the lexicographically least rotation (Booth's algorithm)."""
    s = list(word) * 2
    n = len(word)
    f = [-1] * len(s)
    k = 0
    for j in range(1, len(s)):
        sj = s[j]
        i = f[j - k - 1]
        while i != -1 and sj != s[k + i + 1]:
            if sj < s[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if sj != s[k + i + 1]:
            if sj < s[k]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return k % n if n else 0


def canonical_rotation(word: Sequence[int]) -> Word:
    i = least_rotation(word)
    return tuple(word[i:]) + tuple(word[:i])


def primitive_root(word: Sequence[int]) -> Word:
    """Shortest u with word = u^j."""
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and all(word[i] == word[i % d] for i in range(n)):
            return tuple(word[:d])
    return tuple(word)


def format_word(word: Sequence[int]) -> str:
    if all(0 <= s < 10 for s in word):
        return "".join(str(s) for s in word)
    return ",".join(str(s) for s in word)


# =============================================================================
# POINTS
# =============================================================================

@dataclass(frozen=True)
class CirclePoint:
    """A rational point of R/Z, stored reduced in [0, 1)."""
    x: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x) % 1)

    def to_dict(self) -> str:
        return str(self.x)

    def __str__(self) -> str:
        return str(self.x)


@dataclass(frozen=True)
class TorusPoint:
    """A rational point of R^2/Z^2."""
    x: Fraction
    y: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x) % 1)
        object.__setattr__(self, "y", Fraction(self.y) % 1)

    def to_dict(self) -> List[str]:
        return [str(self.x), str(self.y)]

    def __str__(self) -> str:
        return f"({self.x}, {self.y})"


@dataclass(frozen=True)
class SymbolPoint:
    """
    The eventually periodic sequence prefix . period^inf.

    Stored canonically: the period is primitive and the prefix never ends with
    the symbol that the period would produce at that place.
    """
    period: Word
    prefix: Word = ()

    def __post_init__(self):
        if not self.period:
            raise ValidationError("symbolic point needs a nonempty period")
        period = primitive_root(tuple(int(s) for s in self.period))
        prefix = list(int(s) for s in self.prefix)
        while prefix and prefix[-1] == period[-1]:
            prefix.pop()
            period = (period[-1],) + period[:-1]
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "prefix", tuple(prefix))

    @property
    def is_periodic(self) -> bool:
        return not self.prefix

    def symbol(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def head(self, length: int) -> Word:
        return tuple(self.symbol(i) for i in range(length))

    def to_dict(self) -> Union[str, Dict[str, str]]:
        if self.prefix:
            return {"prefix": format_word(self.prefix), "period": format_word(self.period)}
        return format_word(self.period)

    def __str__(self) -> str:
        if self.prefix:
            return f"{format_word(self.prefix)}({format_word(self.period)})"
        return f"({format_word(self.period)})"


Point = Union[CirclePoint, TorusPoint, SymbolPoint]


# =============================================================================
# SYSTEM DESCRIPTOR
# =============================================================================

@dataclass(frozen=True)
class AspConstants:
    """
    Constants of the Anosov shadowing property.

    ``base`` is e^lam when that is an integer, which makes e^(-lam j) an exact
    rational.
    """
    lam: float
    delta: Fraction
    C: Real
    L: Real
    base: Optional[int] = None

    def decay(self, j: int) -> Real:
        """e^(-lam * j)."""
        if self.base is not None:
            return Fraction(1, self.base ** j)
        return math.exp(-self.lam * j)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "delta": str(self.delta),
            "C": str(self.C) if isinstance(self.C, Fraction) else self.C,
            "L": str(self.L) if isinstance(self.L, Fraction) else self.L,
            "base": self.base,
        }


@dataclass(frozen=True)
class SystemDescriptor:
    """A concrete system with its certified constants."""
    kind: SystemKind
    asp: AspConstants
    lip: Fraction
    k: int = 0
    transitions: Tuple[Tuple[int, ...], ...] = ()
    matrix: Tuple[Tuple[int, int], Tuple[int, int]] = ((0, 0), (0, 0))

    # Factories
    @classmethod
    def circle(cls, k: int) -> "SystemDescriptor":
        if k < 2:
            raise ValidationError("circle expanding map needs k >= 2", k=k)
        asp = AspConstants(lam=math.log(k), delta=Fraction(1, 2 * k), C=Fraction(1),
                           L=Fraction(2), base=k)
        return cls(kind=SystemKind.CIRCLE, asp=asp, lip=Fraction(k), k=k)

    @classmethod
    def full_shift(cls, m: int) -> "SystemDescriptor":
        if m < 2:
            raise ValidationError("full shift needs m >= 2", m=m)
        rows = tuple(tuple(1 for _ in range(m)) for _ in range(m))
        return cls(kind=SystemKind.FULL_SHIFT, asp=_shift_asp(), lip=Fraction(2),
                   transitions=rows)

    @classmethod
    def sft(cls, transitions: Sequence[Sequence[int]]) -> "SystemDescriptor":
        rows = tuple(tuple(int(bool(a)) for a in row) for row in transitions)
        m = len(rows)
        if m < 2 or any(len(row) != m for row in rows):
            raise ValidationError("SFT transitions must be a square matrix of size >= 2")
        for i in range(m):
            if not any(rows[i]):
                raise ValidationError(f"symbol {i} has no successor", row=i)
            if not any(rows[j][i] for j in range(m)):
                raise ValidationError(f"symbol {i} has no predecessor", column=i)
        return cls(kind=SystemKind.SFT, asp=_shift_asp(), lip=Fraction(2), transitions=rows)

    @classmethod
    def torus_cat(cls, matrix: Sequence[Sequence[int]]) -> "SystemDescriptor":
        (a, b), (c, d) = matrix
        det = a * d - b * c
        if det not in (1, -1):
            raise ValidationError("cat map needs determinant +-1", det=det)
        if abs(a + d) <= 2:
            raise ValidationError("cat map needs |trace| > 2", trace=a + d)
        lip = max(1, abs(a) + abs(b), abs(c) + abs(d))
        asp = _torus_asp(((a, b), (c, d)), lip)
        return cls(kind=SystemKind.TORUS_CAT, asp=asp, lip=Fraction(lip),
                   matrix=((a, b), (c, d)))

    # Properties
    @property
    def is_shift(self) -> bool:
        return self.kind in (SystemKind.FULL_SHIFT, SystemKind.SFT)

    @property
    def alphabet(self) -> int:
        """Number of symbols (shifts) or digits (circle)."""
        if self.is_shift:
            return len(self.transitions)
        if self.kind == SystemKind.CIRCLE:
            return self.k
        raise KindMismatchError("symbolic system or circle", self.kind.value)

    @property
    def diameter(self) -> Fraction:
        return Fraction(1) if self.is_shift else Fraction(1, 2)

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.transitions[a][b])

    def successors(self, a: int) -> List[int]:
        return [b for b in range(len(self.transitions)) if self.transitions[a][b]]

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind == SystemKind.CIRCLE:
            data["k"] = self.k
        elif self.kind == SystemKind.FULL_SHIFT:
            data["m"] = len(self.transitions)
        elif self.kind == SystemKind.SFT:
            data["transitions"] = [list(row) for row in self.transitions]
        else:
            data["matrix"] = [list(row) for row in self.matrix]
        data["asp"] = self.asp.to_dict()
        data["lip"] = str(self.lip)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemDescriptor":
        kind = data.get("kind")
        if kind == "circle":
            return cls.circle(int(data["k"]))
        if kind == "full_shift":
            return cls.full_shift(int(data["m"]))
        if kind == "sft":
            return cls.sft(data["transitions"])
        if kind == "torus_cat":
            return cls.torus_cat(data["matrix"])
        raise ValidationError(f"unknown system kind {kind!r}", kind=kind)


def _shift_asp() -> AspConstants:
    return AspConstants(lam=math.log(2), delta=Fraction(1, 2), C=Fraction(1),
                        L=Fraction(1), base=2)


def _torus_asp(matrix: Tuple[Tuple[int, int], Tuple[int, int]], lip: int) -> AspConstants:
    """Constants from the eigenbasis of the cat map."""
    A = np.array(matrix, dtype=float)
    eigvals, P = np.linalg.eig(A)
    order = np.argsort(-np.abs(eigvals))
    mu = float(abs(eigvals[order[0]]))
    P = P[:, order]
    P = P / np.abs(P).max(axis=0)
    cond = float(np.linalg.norm(P, np.inf) * np.linalg.norm(np.linalg.inv(P), np.inf))
    cond *= 1 + 1e-9
    lam = math.log(mu)
    delta = Fraction(1, 4 * lip * math.ceil(cond))
    L = 2 * cond / (1 - math.exp(-lam))
    return AspConstants(lam=lam, delta=delta, C=cond, L=L)


def admissible_words(system: SystemDescriptor, length: int) -> List[Word]:
    """All admissible words of the given length, in lexicographic order."""
    if not system.is_shift:
        raise KindMismatchError("symbolic system", system.kind.value)
    words: List[Word] = [()]
    for _ in range(length):
        words = [w + (b,) for w in words
                 for b in (system.successors(w[-1]) if w else range(len(system.transitions)))]
    return words


def is_admissible(system: SystemDescriptor, word: Sequence[int], cyclic: bool = False) -> bool:
    m = len(system.transitions)
    if any(s < 0 or s >= m for s in word):
        return False
    pairs = list(zip(word, word[1:]))
    if cyclic and word:
        pairs.append((word[-1], word[0]))
    return all(system.allowed(a, b) for a, b in pairs)


# =============================================================================
# POINT OPERATIONS
# =============================================================================

def check_point(system: SystemDescriptor, point: Point) -> None:
    """Raise unless ``point`` is a point of ``system``."""
    if system.kind == SystemKind.CIRCLE:
        if not isinstance(point, CirclePoint):
            raise KindMismatchError("CirclePoint", type(point).__name__)
    elif system.kind == SystemKind.TORUS_CAT:
        if not isinstance(point, TorusPoint):
            raise KindMismatchError("TorusPoint", type(point).__name__)
    else:
        if not isinstance(point, SymbolPoint):
            raise KindMismatchError("SymbolPoint", type(point).__name__)
        m = len(system.transitions)
        seq = point.prefix + point.period + point.period[:1]
        if any(s < 0 or s >= m for s in seq):
            raise InadmissibleWordError(list(seq), f"symbols must lie in 0..{m - 1}")
        for a, b in zip(seq, seq[1:]):
            if not system.allowed(a, b):
                raise InadmissibleWordError(list(seq), f"transition {a}->{b} is forbidden")


def apply(system: SystemDescriptor, point: Point) -> Point:
    """T(x), exact."""
    check_point(system, point)
    if system.kind == SystemKind.CIRCLE:
        return CirclePoint(system.k * point.x)
    if system.kind == SystemKind.TORUS_CAT:
        (a, b), (c, d) = system.matrix
        return TorusPoint(a * point.x + b * point.y, c * point.x + d * point.y)
    if point.prefix:
        return SymbolPoint(point.period, point.prefix[1:])
    return SymbolPoint(point.period[1:] + point.period[:1])


def iterate(system: SystemDescriptor, point: Point, n: int) -> Point:
    """T^n(x)."""
    if system.kind == SystemKind.CIRCLE:
        check_point(system, point)
        return CirclePoint(system.k ** n * point.x)
    for _ in range(n):
        point = apply(system, point)
    return point


def orbit_segment(system: SystemDescriptor, point: Point, n: int) -> List[Point]:
    """[x, Tx, ..., T^(n-1) x]."""
    points = []
    for _ in range(n):
        points.append(point)
        point = apply(system, point)
    return points


def _circle_distance(a: Fraction, b: Fraction) -> Fraction:
    diff = abs(a - b)
    return min(diff, 1 - diff)


def common_prefix_length(a: SymbolPoint, b: SymbolPoint) -> Optional[int]:
    """Length of the longest common prefix, None when a == b."""
    if a == b:
        return None
    bound = max(len(a.prefix), len(b.prefix)) + len(a.period) + len(b.period)
    for i in range(bound):
        if a.symbol(i) != b.symbol(i):
            return i
    return None


def distance(system: SystemDescriptor, x: Point, y: Point) -> Fraction:
    """d(x, y), exact."""
    check_point(system, x)
    check_point(system, y)
    if system.kind == SystemKind.CIRCLE:
        return _circle_distance(x.x, y.x)
    if system.kind == SystemKind.TORUS_CAT:
        return max(_circle_distance(x.x, y.x), _circle_distance(x.y, y.y))
    s = common_prefix_length(x, y)
    return Fraction(0) if s is None else Fraction(1, 2 ** s)


def truncated_distance(system: SystemDescriptor, x: Point, y: Point) -> Fraction:
    """D(x, y) = min(d(x, y), delta)."""
    return min(distance(system, x, y), system.asp.delta)


def point_key(point: Point, length: int = 0) -> Tuple:
    """Sort key giving a deterministic order of points."""
    if isinstance(point, CirclePoint):
        return (point.x,)
    if isinstance(point, TorusPoint):
        return (point.x, point.y)
    length = length or len(point.prefix) + 2 * len(point.period)
    return point.head(length)


def itinerary(system: SystemDescriptor, point: Point, length: int) -> Word:
    """Symbolic coding: shift symbols, or base-k digits on the circle."""
    check_point(system, point)
    if system.is_shift:
        return point.head(length)
    if system.kind == SystemKind.CIRCLE:
        digits = []
        x = point.x
        for _ in range(length):
            digits.append(math.floor(system.k * x))
            x = (system.k * x) % 1
        return tuple(digits)
    raise KindMismatchError("symbolic system or circle", system.kind.value)


def eventual_cycle(system: SystemDescriptor, point: Point) -> Tuple[int, Point]:
    """(preperiod, first point on the cycle) of an eventually periodic point."""
    check_point(system, point)
    if isinstance(point, SymbolPoint):
        return len(point.prefix), SymbolPoint(point.period)
    seen: Dict[Point, int] = {}
    step = 0
    while point not in seen:
        seen[point] = step
        point = apply(system, point)
        step += 1
    return seen[point], point


# =============================================================================
# PSEUDO-ORBITS
# =============================================================================

@dataclass(frozen=True)
class PseudoOrbit:
    """A periodic eta-pseudo-orbit (x_0, ..., x_{n-1})."""
    points: Tuple[Point, ...]
    eta: Fraction
    jumps: Tuple[Fraction, ...] = field(default=())

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def max_jump(self) -> Fraction:
        return max(self.jumps) if self.jumps else Fraction(0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": [p.to_dict() for p in self.points],
            "eta": str(self.eta),
            "max_jump": str(self.max_jump),
        }


def cyclic_jumps(system: SystemDescriptor, points: Sequence[Point]) -> List[Fraction]:
    """d(T x_i, x_{i+1 mod n}) for every i."""
    n = len(points)
    return [distance(system, apply(system, points[i]), points[(i + 1) % n]) for i in range(n)]


def validate_pseudo_orbit(system: SystemDescriptor, points: Sequence[Point], eta: Real) -> PseudoOrbit:
    """Accept ``points`` as a periodic eta-pseudo-orbit or report the first bad jump."""
    if not points:
        raise ValidationError("pseudo-orbit must contain at least one point")
    eta = Fraction(eta)
    if eta < 0:
        raise ValidationError("eta must be nonnegative", eta=eta)
    jumps = cyclic_jumps(system, points)
    for i, jump in enumerate(jumps):
        if jump > eta:
            raise PseudoOrbitError(i, jump, eta)
    return PseudoOrbit(points=tuple(points), eta=eta, jumps=tuple(jumps))


# =============================================================================
# RANDOM POINTS
# =============================================================================

def path_between(system: SystemDescriptor, a: int, b: int) -> Optional[List[int]]:
    """Shortest symbol path a -> s_1 -> ... -> s_j = b with j >= 1, or None."""
    parents: Dict[int, int] = {}
    queue = deque()
    for s in system.successors(a):
        if s not in parents:
            parents[s] = -1
            queue.append(s)
    while queue:
        s = queue.popleft()
        if s == b:
            path = [s]
            while parents[path[-1]] != -1:
                path.append(parents[path[-1]])
            return path[::-1]
        for t in system.successors(s):
            if t not in parents:
                parents[t] = s
                queue.append(t)
    return None


def random_cycle_word(system: SystemDescriptor, rng: np.random.Generator, length: int) -> Word:
    """An admissible cyclic word of length about ``length``."""
    for _ in range(100):
        a = int(rng.integers(len(system.transitions)))
        word = [a]
        while len(word) < length:
            succ = system.successors(word[-1])
            word.append(int(succ[rng.integers(len(succ))]))
        if system.allowed(word[-1], word[0]):
            return tuple(word)
        closing = path_between(system, word[-1], word[0])
        if closing is not None:
            return tuple(word + closing[:-1])
    raise ValidationError("could not draw a cycle; the SFT may not be irreducible")


def random_point(system: SystemDescriptor, rng: np.random.Generator, size: int = 8) -> Point:
    """Random exact point; ``size`` controls denominators / word lengths."""
    if system.kind == SystemKind.CIRCLE:
        q = int(rng.integers(2, 2 ** size + 2))
        return CirclePoint(Fraction(int(rng.integers(q)), q))
    if system.kind == SystemKind.TORUS_CAT:
        q = int(rng.integers(2, 2 ** size + 2))
        return TorusPoint(Fraction(int(rng.integers(q)), q), Fraction(int(rng.integers(q)), q))
    period = random_cycle_word(system, rng, int(rng.integers(1, size + 1)))
    plen = int(rng.integers(0, size + 1))
    if plen == 0:
        return SymbolPoint(period)
    for _ in range(100):
        a = int(rng.integers(len(system.transitions)))
        prefix = [a]
        while len(prefix) < plen:
            succ = system.successors(prefix[-1])
            prefix.append(int(succ[rng.integers(len(succ))]))
        link = path_between(system, prefix[-1], period[0])
        if link is not None:
            return SymbolPoint(period, tuple(prefix + link[:-1]))
    return SymbolPoint(period)
