"""
Construction Module
===================
Periodic orbits with a large gap-to-deviation ratio D^alpha(O) / d_{alpha,Z}(O).

Two stages:
- Shortest-cycle seeding: code a forward invariant set Z by its length-n
  words, take a shortest cycle of the word graph and shadow it
- Orbit splitting: while the ratio is too small, cut the orbit at its
  closest return, shadow the shorter piece and start over
"""

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import structlog

from ..errors import (
    ConstructionError,
    KindMismatchError,
    SeedTooSmallError,
    ValidationError,
)
from .dynamics import (
    Point,
    SystemDescriptor,
    SystemKind,
    Word,
    apply,
    check_point,
    distance,
    format_word,
    itinerary,
    point_key,
    validate_pseudo_orbit,
)
from .enumeration import (
    PeriodicOrbit,
    deviation,
    gap,
    matrix_entropy,
    orbit_of,
)
from .observables import power
from .shadowing import ShadowResult, pseudo_deviation, shadow, transfer_bound

logger = structlog.get_logger("Construction")

Real = Union[Fraction, float]

INF = float("inf")

DEFAULT_SEED_N = 10
DEFAULT_SEED_K = 3

# Largest seed word length the escalation may reach.
MAX_SEED_N = 2 ** 20


# =============================================================================
# ORBIT QUALITY
# =============================================================================

def orbit_quality(system: SystemDescriptor, orbit: PeriodicOrbit, Z: Sequence[Point],
                  alpha: Real = Fraction(1)) -> Tuple[Fraction, Real, Real]:
    """(D(O), d_{alpha,Z}(O), D^alpha / d_{alpha,Z}), the ratio +inf when O lies in Z."""
    D = gap(system, orbit)
    dev = deviation(system, orbit, Z, alpha)
    ratio: Real = INF if dev == 0 else power(D, alpha) / dev
    return D, dev, ratio


def growth_constant(system: SystemDescriptor, alpha: Real = Fraction(1)) -> Real:
    """2 (2CL)^alpha / (1 - e^{-lam alpha})."""
    asp = system.asp
    if alpha == 1 and asp.base is not None:
        return 2 * (2 * asp.C * asp.L) / (1 - Fraction(1, asp.base))
    return 2 * float(power(2 * asp.C * asp.L, alpha)) / (1 - math.exp(-asp.lam * float(alpha)))


# =============================================================================
# SHORTEST-CYCLE SEEDING
# =============================================================================

@dataclass(frozen=True)
class SeedResult:
    """Shortest-cycle seed with its certified deviation bound."""
    n: int
    orbit: PeriodicOrbit
    deviation: Real
    deviation_bound: Real
    asymptotic_bound: Real
    words: int
    cycle: Tuple[Word, ...]
    entropy: float
    cycle_length_bound: float
    shadowing: ShadowResult

    @property
    def cycle_length(self) -> int:
        return len(self.cycle)

    @property
    def cycle_bound_ok(self) -> bool:
        return self.cycle_length <= self.cycle_length_bound + 1e-9

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "orbit": self.orbit.to_dict(),
            "deviation": self.deviation,
            "deviation_bound": self.deviation_bound,
            "asymptotic_bound": self.asymptotic_bound,
            "words": self.words,
            "cycle": [format_word(w) for w in self.cycle],
            "cycle_length": self.cycle_length,
            "entropy": self.entropy,
            "cycle_length_bound": self.cycle_length_bound,
            "cycle_bound_ok": self.cycle_bound_ok,
            "max_tracking_error": self.shadowing.max_tracking_error,
        }


def forward_closure(system: SystemDescriptor, Z: Sequence[Point], max_steps: int = 10 ** 6) -> List[Point]:
    """Z together with all forward images, sorted. Points must be eventually periodic."""
    seen = set()
    for z in Z:
        check_point(system, z)
        current = z
        steps = 0
        while current not in seen:
            seen.add(current)
            current = apply(system, current)
            steps += 1
            if steps > max_steps:
                raise ValidationError(f"{z} is not eventually periodic")
    return sorted(seen, key=point_key)


def _coding_base(system: SystemDescriptor) -> int:
    if system.is_shift:
        return 2
    if system.kind == SystemKind.CIRCLE:
        return system.k
    raise KindMismatchError("symbolic system or circle", system.kind.value)


def _shortest_cycle(nodes: List[Word], succ: Dict[Word, List[Word]]) -> Tuple[Word, ...]:
    """Shortest cycle of the word graph, ties broken by the lexicographically least word list."""
    best: Optional[Tuple[Word, ...]] = None
    for s in nodes:
        parent: Dict[Word, Word] = {}
        queue = deque([s])
        found = None
        while queue and found is None:
            u = queue.popleft()
            for w in succ[u]:
                if w == s:
                    found = u
                    break
                if w not in parent:
                    parent[w] = u
                    queue.append(w)
        if found is None:
            continue
        path = [found]
        while path[-1] != s:
            path.append(parent[path[-1]])
        cycle = tuple(reversed(path))
        if best is None or (len(cycle), cycle) < (len(best), best):
            best = cycle
    if best is None:
        raise ConstructionError("word graph of Z has no cycle; Z is not forward invariant")
    return best


def bq_seed(system: SystemDescriptor, Z: Sequence[Point], n: int,
            alpha: Real = Fraction(1)) -> SeedResult:
    """
    Seed orbit from a shortest cycle of the length-n word graph of Z.

    W_n are the length-n itineraries of the forward closure of Z, and
    w -> w' is an edge when ww' is a length-2n itinerary. The cycle
    z_0 ... z_{p-1} lifts to the pseudo-orbit made of the length-n blocks of
    points coded z_i z_{i+1}; consecutive blocks share n symbols, so the jumps
    are at most base^-n, and the shadowing orbit has deviation at most
    d(pseudo) + n p (L base^-n)^alpha.
    """
    if n < 2:
        raise ValidationError("seed word length n must be >= 2", n=n)
    if not Z:
        raise ValidationError("reference set Z is empty")
    base = _coding_base(system)
    closure = forward_closure(system, Z)

    # length-2n coding of every point; the first point per word lifts the edge
    lifts: Dict[Word, Point] = {}
    for z in closure:
        lifts.setdefault(itinerary(system, z, 2 * n), z)
    nodes = sorted({w[:n] for w in lifts} | {w[n:] for w in lifts})
    succ: Dict[Word, List[Word]] = {w: [] for w in nodes}
    for w in sorted(lifts):
        succ[w[:n]].append(w[n:])

    cycle = _shortest_cycle(nodes, succ)
    p = len(cycle)
    index = {w: i for i, w in enumerate(nodes)}
    adjacency = [[0] * len(nodes) for _ in nodes]
    for w, targets in succ.items():
        for t in targets:
            adjacency[index[w]][index[t]] = 1
    h = matrix_entropy(adjacency) if len(nodes) > 1 else 0.0
    cycle_bound = 1 + len(nodes) * math.exp(1 - h)

    points: List[Point] = []
    for i in range(p):
        y = lifts[cycle[i] + cycle[(i + 1) % p]]
        for _ in range(n):
            points.append(y)
            y = apply(system, y)
    eta = Fraction(1, base ** n)
    pseudo = validate_pseudo_orbit(system, points, eta)
    result = shadow(system, pseudo)

    asp = system.asp
    dev = deviation(system, result.orbit, Z, alpha)
    bound = transfer_bound(system, pseudo, Z, alpha)
    asymptotic = (pseudo_deviation(system, points, Z, alpha)
                  + n * p * float(power(2 * asp.delta * asp.C * asp.L, alpha))
                  * math.exp(-asp.lam * float(alpha) * (n // 2 - 1)))
    seed = SeedResult(
        n=n,
        orbit=result.orbit,
        deviation=dev,
        deviation_bound=bound,
        asymptotic_bound=asymptotic,
        words=len(nodes),
        cycle=cycle,
        entropy=h,
        cycle_length_bound=cycle_bound,
        shadowing=result,
    )
    logger.info("bq_seed", n=n, words=len(nodes), cycle_length=p,
                period=result.orbit.period, deviation=str(dev), bound=str(bound))
    return seed


# =============================================================================
# FEASIBILITY
# =============================================================================

@dataclass(frozen=True)
class Feasibility:
    """The displayed inequalities of the splitting argument for given (n, k)."""
    n: int
    k: int
    L_tilde_1: float
    exponent: float
    lhs_split: float
    lhs_seed: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs_split < self.rhs and self.lhs_seed < self.rhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "L_tilde_1": self.L_tilde_1,
            "exponent": self.exponent,
            "lhs_split": self.lhs_split,
            "lhs_seed": self.lhs_seed,
            "rhs": self.rhs,
            "ok": self.ok,
        }


def feasibility(system: SystemDescriptor, alpha: Real, L_hat: Real, n: int, k: int) -> Feasibility:
    """
    L^a L~ L~1 n^(-k + log2 L~1) < delta^a and L^a L~ n^-k < delta^a, with L~ = 1.
    """
    asp = system.asp
    L1 = 1 + float(growth_constant(system, alpha)) * float(L_hat)
    exponent = -k + math.log2(L1)
    La = float(power(asp.L, alpha))
    return Feasibility(
        n=n,
        k=k,
        L_tilde_1=L1,
        exponent=exponent,
        lhs_split=La * L1 * float(n) ** exponent,
        lhs_seed=La * float(n) ** (-k),
        rhs=float(power(asp.delta, alpha)),
    )


def escalate(system: SystemDescriptor, alpha: Real, L_hat: Real, n: int, k: int,
             max_steps: int = 64) -> Feasibility:
    """Smallest passing (n, k) reached by n <- 2n, or k <- k + 1 while n^exponent cannot shrink fast enough."""
    check = feasibility(system, alpha, L_hat, n, k)
    for _ in range(max_steps):
        if check.ok:
            return check
        if check.exponent > -1:
            k += 1
        elif n * 2 <= MAX_SEED_N:
            n *= 2
        else:
            break
        check = feasibility(system, alpha, L_hat, n, k)
    if check.ok:
        return check
    raise SeedTooSmallError(check.n, check.k, max(check.lhs_split, check.lhs_seed), check.rhs)


# =============================================================================
# ORBIT SPLITTING
# =============================================================================

SEED = "seed"
SPLIT = "split+shadow"
ACCEPT = "accept"


@dataclass
class Stage:
    index: int
    orbit: PeriodicOrbit
    gap: Fraction
    deviation: Real
    ratio: Real
    action: str
    closeness: Optional[Fraction] = None
    lag: Optional[int] = None
    growth_bound: Optional[Real] = None
    L_tilde: Real = Fraction(1)

    @property
    def period(self) -> int:
        return self.orbit.period

    @property
    def growth_ok(self) -> bool:
        if self.growth_bound is None:
            return True
        if isinstance(self.growth_bound, float):
            return float(self.deviation) <= self.growth_bound * (1 + 1e-12)
        return self.deviation <= self.growth_bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "orbit": self.orbit.label(),
            "period": self.period,
            "gap": self.gap,
            "deviation": self.deviation,
            "ratio": self.ratio,
            "action": self.action,
            "closeness": self.closeness,
            "lag": self.lag,
            "growth_bound": self.growth_bound,
            "growth_ok": self.growth_ok,
            "L_tilde": self.L_tilde,
        }


@dataclass
class ConstructionTrace:
    L_hat: Real
    alpha: Real
    stages: List[Stage] = field(default_factory=list)
    seed: Optional[SeedResult] = None
    precheck: Optional[Feasibility] = None

    @property
    def final(self) -> PeriodicOrbit:
        return self.stages[-1].orbit

    @property
    def achieved_ratio(self) -> Real:
        return self.stages[-1].ratio

    @property
    def accepted(self) -> bool:
        return bool(self.stages) and self.stages[-1].action == ACCEPT

    @property
    def stage_bound(self) -> int:
        return int(math.floor(math.log2(self.stages[0].period))) + 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L_hat": self.L_hat,
            "alpha": self.alpha,
            "accepted": self.accepted,
            "achieved_ratio": self.achieved_ratio,
            "final": self.final.to_dict(),
            "stage_bound": self.stage_bound,
            "stages": [s.to_dict() for s in self.stages],
            "seed": self.seed.to_dict() if self.seed else None,
            "precheck": self.precheck.to_dict() if self.precheck else None,
        }


def closest_return(system: SystemDescriptor, orbit: PeriodicOrbit) -> Tuple[int, int, Fraction]:
    """(index of y, lag, d(y, T^lag y)) minimising the distance; least y, then least lag."""
    pts = orbit.points
    n = len(pts)
    order = sorted(range(n), key=lambda i: point_key(pts[i]))
    best: Optional[Tuple[int, int, Fraction]] = None
    for i in order:
        for lag in range(1, n):
            d = distance(system, pts[i], pts[(i + lag) % n])
            if best is None or d < best[2]:
                best = (i, lag, d)
    assert best is not None
    return best


def split_segment(orbit: PeriodicOrbit, index: int, lag: int) -> List[Point]:
    """The shorter of the two pieces cut at y = points[index] and T^lag y."""
    pts = orbit.points
    n = len(pts)
    if lag <= n - lag:
        return [pts[(index + j) % n] for j in range(lag)]
    return [pts[(index + lag + j) % n] for j in range(n - lag)]


def _ratio_met(ratio: Real, L_hat: Real) -> bool:
    return ratio == INF or ratio > L_hat


def construct_good_orbit(
    system: SystemDescriptor,
    Z: Sequence[Point],
    alpha: Real = Fraction(1),
    L_hat: Real = Fraction(100),
    seed_n: int = DEFAULT_SEED_N,
    seed_k: int = DEFAULT_SEED_K,
    seed_orbit: Optional[PeriodicOrbit] = None,
    strict: bool = True,
) -> ConstructionTrace:
    """
    Split and shadow until D^alpha(O) / d_{alpha,Z}(O) > L_hat.

    Without ``seed_orbit`` the seed is ``bq_seed(system, Z, seed_n)``. The
    feasibility precheck runs only when the seed is not accepted at once and
    ``strict`` is set; a failing precheck escalates n (regenerating the
    seed) or k.
    """
    if L_hat <= 0:
        raise ValidationError("L_hat must be positive", L_hat=L_hat)
    if not Z:
        raise ValidationError("reference set Z is empty")
    trace = ConstructionTrace(L_hat=L_hat, alpha=alpha)

    if seed_orbit is None:
        trace.seed = bq_seed(system, Z, seed_n, alpha)
        orbit = trace.seed.orbit
    else:
        orbit = orbit_of(system, seed_orbit.representative)

    D, dev, ratio = orbit_quality(system, orbit, Z, alpha)
    if not _ratio_met(ratio, L_hat) and strict:
        trace.precheck = escalate(system, alpha, L_hat, seed_n, seed_k)
        if trace.precheck.n != seed_n and seed_orbit is None:
            trace.seed = bq_seed(system, Z, trace.precheck.n, alpha)
            orbit = trace.seed.orbit
            D, dev, ratio = orbit_quality(system, orbit, Z, alpha)
        if not _ratio_met(ratio, L_hat) and dev >= Fraction(1, trace.precheck.n) ** trace.precheck.k:
            raise SeedTooSmallError(trace.precheck.n, trace.precheck.k,
                                    float(dev), float(Fraction(1, trace.precheck.n) ** trace.precheck.k))

    growth = growth_constant(system, alpha)
    L1 = 1 + growth * L_hat
    trace.stages.append(Stage(index=0, orbit=orbit, gap=D, deviation=dev, ratio=ratio, action=SEED))
    max_stages = trace.stage_bound

    while not _ratio_met(ratio, L_hat):
        previous = trace.stages[-1]
        if orbit.period == 1:
            raise ConstructionError("fixed point reached without meeting the ratio",
                                    ratio=ratio, L_hat=L_hat)
        if len(trace.stages) >= max_stages:
            raise ConstructionError("stage bound exceeded", stages=len(trace.stages), bound=max_stages)
        index, lag, eta = closest_return(system, orbit)
        if eta > system.asp.delta:
            raise ConstructionError("closest return is farther than delta; cannot shadow the split",
                                    closeness=eta, delta=system.asp.delta)
        segment = split_segment(orbit, index, lag)
        result = shadow(system, validate_pseudo_orbit(system, segment, eta))
        if result.orbit.period * 2 > orbit.period:
            raise ConstructionError("split did not halve the period",
                                    before=orbit.period, after=result.orbit.period)
        orbit = result.orbit
        D, dev, ratio = orbit_quality(system, orbit, Z, alpha)
        stage = Stage(
            index=len(trace.stages),
            orbit=orbit,
            gap=D,
            deviation=dev,
            ratio=ratio,
            action=SPLIT,
            closeness=eta,
            lag=lag,
            growth_bound=previous.deviation + growth * power(eta, alpha),
            L_tilde=L1 * previous.L_tilde,
        )
        trace.stages.append(stage)
        logger.info("stage", index=stage.index, period=orbit.period, closeness=str(eta),
                    deviation=str(dev), ratio=str(ratio), growth_ok=stage.growth_ok)

    trace.stages[-1].action = ACCEPT
    logger.info("construction_accepted", stages=len(trace.stages), orbit=orbit.label(),
                ratio=str(ratio), L_hat=str(L_hat))
    return trace
