"""
Shadowing Module
================
Executable Anosov shadowing: periodic eta-pseudo-orbits become true periodic
orbits with a certified tracking bound, plus the two-sided closeness check.

Constructions per kind:
- shifts: read off leading symbols
- circle / torus: lift each jump defect e_i = T x_i - x_{i+1} into
  (-1/2, 1/2]^d and solve w_{i+1} = A w_i + e_i cyclically in rationals;
  the true orbit is z_i = x_i + w_i
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Sequence, Tuple, Union

import structlog

from ..errors import AspPreconditionError, ShadowingError, ValidationError
from .dynamics import (
    CirclePoint,
    Point,
    PseudoOrbit,
    SymbolPoint,
    SystemDescriptor,
    SystemKind,
    TorusPoint,
    apply,
    distance,
    iterate,
    validate_pseudo_orbit,
)
from .enumeration import PeriodicOrbit, distance_to_set, orbit_of
from .observables import FLOAT_TOL, power

logger = structlog.get_logger("Shadowing")

Real = Union[Fraction, float]


@dataclass(frozen=True)
class ShadowResult:
    """A shadowing orbit and its tracking certificate."""
    orbit: PeriodicOrbit
    phase_point: Point
    errors: Tuple[Fraction, ...]
    max_tracking_error: Fraction
    bound: Real
    n: int

    @property
    def period_divides(self) -> bool:
        return self.n % self.orbit.period == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orbit": self.orbit.to_dict(),
            "phase_point": self.phase_point.to_dict(),
            "max_tracking_error": self.max_tracking_error,
            "bound_L_eta": self.bound,
            "pseudo_period": self.n,
            "period": self.orbit.period,
            "period_divides": self.period_divides,
        }


def _lift(t: Fraction) -> Fraction:
    """Representative of t mod 1 in [-1/2, 1/2)."""
    return t - ((t + Fraction(1, 2)) // 1)


def _shift_shadow(system: SystemDescriptor, points: Sequence[SymbolPoint]) -> SymbolPoint:
    # a jump <= 1/2 keeps the leading symbol: x_{i+1}[0] = x_i[1], so the
    # leading symbols of admissible points chain through allowed pairs, wrap included
    return SymbolPoint(tuple(p.symbol(0) for p in points))


def _circle_shadow(system: SystemDescriptor, points: Sequence[CirclePoint]) -> CirclePoint:
    k, n = system.k, len(points)
    defects = [_lift(k * points[i].x - points[(i + 1) % n].x) for i in range(n)]
    acc = sum((k ** (n - 1 - j) * e for j, e in enumerate(defects)), Fraction(0))
    w0 = acc / (1 - k ** n)
    return CirclePoint(points[0].x + w0)


def _torus_shadow(system: SystemDescriptor, points: Sequence[TorusPoint]) -> TorusPoint:
    (a, b), (c, d) = system.matrix
    n = len(points)
    acc = [Fraction(0), Fraction(0)]
    for i in range(n):
        x, y = points[i], points[(i + 1) % n]
        e = (_lift(a * x.x + b * x.y - y.x), _lift(c * x.x + d * x.y - y.y))
        # acc <- A acc + e, so that acc = sum_j A^{n-1-j} e_j at the end
        acc = [a * acc[0] + b * acc[1] + e[0], c * acc[0] + d * acc[1] + e[1]]
    # A^n
    p, q, r, s = 1, 0, 0, 1
    for _ in range(n):
        p, q, r, s = p * a + q * c, p * b + q * d, r * a + s * c, r * b + s * d
    # solve (I - A^n) w0 = acc
    m11, m12, m21, m22 = 1 - p, -q, -r, 1 - s
    det = m11 * m22 - m12 * m21
    w0 = ((m22 * acc[0] - m12 * acc[1]) / det, (-m21 * acc[0] + m11 * acc[1]) / det)
    return TorusPoint(points[0].x + w0[0], points[0].y + w0[1])


def shadow(system: SystemDescriptor, pseudo: PseudoOrbit) -> ShadowResult:
    """The periodic orbit tracking ``pseudo`` within L * eta."""
    if pseudo.eta > system.asp.delta:
        raise ValidationError("eta exceeds delta; shadowing does not apply",
                              eta=pseudo.eta, delta=system.asp.delta)
    pseudo = validate_pseudo_orbit(system, pseudo.points, pseudo.eta)
    points = list(pseudo.points)
    if system.is_shift:
        z0 = _shift_shadow(system, points)
    elif system.kind == SystemKind.CIRCLE:
        z0 = _circle_shadow(system, points)
    else:
        z0 = _torus_shadow(system, points)

    n = len(points)
    if iterate(system, z0, n) != z0:
        raise ShadowingError("constructed point is not n-periodic", n=n)
    errors = []
    z = z0
    for x in points:
        errors.append(distance(system, x, z))
        z = apply(system, z)
    max_error = max(errors)
    bound = system.asp.L * pseudo.eta
    exceeded = max_error > bound if isinstance(bound, Fraction) else float(max_error) > float(bound) * (1 + FLOAT_TOL)
    if exceeded:
        raise ShadowingError("tracking error exceeds L * eta; stored L is wrong for this input",
                             max_error=max_error, bound=bound)
    result = ShadowResult(
        orbit=orbit_of(system, z0),
        phase_point=z0,
        errors=tuple(errors),
        max_tracking_error=max_error,
        bound=bound,
        n=n,
    )
    logger.debug("shadowed", n=n, period=result.orbit.period, max_error=str(max_error))
    return result


def shadow_points(system: SystemDescriptor, points: Sequence[Point], eta: Real) -> ShadowResult:
    """Validate then shadow."""
    return shadow(system, validate_pseudo_orbit(system, points, eta))


def pseudo_deviation(system: SystemDescriptor, points: Sequence[Point], Z: Sequence[Point],
                     alpha: Real = Fraction(1)) -> Real:
    """d_{alpha,Z} of a pseudo-orbit, summed over its points."""
    total: Real = Fraction(0)
    for x in points:
        total += power(distance_to_set(system, x, Z), alpha)
    return total


def transfer_bound(system: SystemDescriptor, pseudo: PseudoOrbit, Z: Sequence[Point],
                   alpha: Real = Fraction(1)) -> Real:
    """d_{alpha,Z}(pseudo) + n (L eta)^alpha, a bound for the shadowing orbit's deviation."""
    return (pseudo_deviation(system, pseudo.points, Z, alpha)
            + pseudo.period * power(system.asp.L * pseudo.eta, alpha))


# =============================================================================
# TWO-SIDED CLOSENESS
# =============================================================================

@dataclass(frozen=True)
class Asp1Report:
    n: int
    actual: Tuple[Fraction, ...]
    bound: Tuple[Real, ...]

    @property
    def slack(self) -> List[Real]:
        return [b - a for a, b in zip(self.actual, self.bound)]

    @property
    def ok(self) -> bool:
        return all(s >= (0 if isinstance(s, Fraction) else -FLOAT_TOL) for s in self.slack)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "ok": self.ok,
            "rows": [{"k": k, "actual": a, "bound": b, "slack": b - a}
                     for k, (a, b) in enumerate(zip(self.actual, self.bound))],
        }


def certify_asp1(system: SystemDescriptor, x: Point, y: Point, n: int) -> Asp1Report:
    """Slack of d(T^k x, T^k y) <= C e^{-lam min(k, n-k)} (d(x,y) + d(T^n x, T^n y))."""
    if n < 0:
        raise ValidationError("n must be nonnegative", n=n)
    delta = system.asp.delta
    actual = []
    for i in range(n + 1):
        d = distance(system, x, y)
        if d > delta:
            raise AspPreconditionError(i, d, delta)
        actual.append(d)
        if i < n:
            x, y = apply(system, x), apply(system, y)
    ends = actual[0] + actual[n]
    bound = tuple(system.asp.C * system.asp.decay(min(k, n - k)) * ends for k in range(n + 1))
    return Asp1Report(n=n, actual=tuple(actual), bound=bound)
