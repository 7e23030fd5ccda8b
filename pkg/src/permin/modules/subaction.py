"""
Sub-action Module
=================
beta and a sub-action v with u_K - v o T^K + v - beta psi_K >= 0.

Two paths:
- shifts with locally constant data: exact minimum cycle ratio on the word
  graph (Dinkelbach steps with Bellman-Ford negative cycle detection), then
  Bellman potentials of the reduced costs
- circle: normalized Lax-Oleinik iteration on a uniform grid, with a
  K-doubling ladder when nonnegativity fails
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..errors import (
    ConvergenceError,
    KindMismatchError,
    SubActionError,
    ValidationError,
)
from .dynamics import (
    CirclePoint,
    Point,
    SystemDescriptor,
    SystemKind,
    admissible_words,
    format_word,
)
from .enumeration import (
    BetaResult,
    PeriodicOrbit,
    beta_bruteforce,
    enumerate_orbits,
    orbit_from_word,
    orbit_sum,
    points_of,
)
from .observables import (
    ClosedForm,
    GridFunction,
    IterateComposition,
    LocallyConstant,
    Observable,
    Scale,
    Sum,
    Weight,
    birkhoff_average_k,
)

logger = structlog.get_logger("SubAction")

Real = Union[Fraction, float]
Word = Tuple[int, ...]

# Tolerance below zero accepted for grid sub-actions.
NEGATIVE_TOL = 1e-8

K_LADDER = (1, 2, 4, 8)


def _psi_of(weight: Union[Weight, Observable]) -> Observable:
    return weight.psi if isinstance(weight, Weight) else weight


# =============================================================================
# LOCALLY CONSTANT DATA
# =============================================================================

def locally_constant_depth(u: Observable) -> Optional[int]:
    """Depth r when u depends only on the first r symbols, else None."""
    if isinstance(u, LocallyConstant):
        return u.depth
    if isinstance(u, ClosedForm) and not u.expr.variables():
        return 1
    if isinstance(u, Scale):
        return locally_constant_depth(u.inner)
    if isinstance(u, Sum):
        depths = [locally_constant_depth(t) for t in u.terms]
        return None if None in depths else max(depths)
    return None


def word_value(u: Observable, word: Word) -> Real:
    """Value of a locally constant observable on the cylinder [word]."""
    if isinstance(u, LocallyConstant):
        return u.lookup(word[:u.depth])
    if isinstance(u, ClosedForm):
        return u.expr.evaluate({})
    if isinstance(u, Scale):
        return u.factor * word_value(u.inner, word)
    if isinstance(u, Sum):
        return sum((word_value(t, word) for t in u.terms), Fraction(0))
    raise KindMismatchError("locally constant observable", type(u).__name__)


@dataclass(frozen=True)
class Edge:
    """Directed edge w[:q] -> w[1:] of the word graph, labelled by the word w."""
    src: int
    dst: int
    word: Word
    cost: Real
    weight: Real


@dataclass(frozen=True)
class WordGraph:
    """Nodes are admissible words of length q, edges admissible words of length q + 1."""
    q: int
    nodes: Tuple[Word, ...]
    edges: Tuple[Edge, ...]

    def reduced_costs(self, t: Real) -> List[Real]:
        return [e.cost - t * e.weight for e in self.edges]

    def cycle_ratio(self, cycle: Sequence[int]) -> Real:
        cost = sum((self.edges[i].cost for i in cycle), Fraction(0))
        weight = sum((self.edges[i].weight for i in cycle), Fraction(0))
        return cost / weight

    def cycle_word(self, cycle: Sequence[int]) -> Word:
        return tuple(self.edges[i].word[0] for i in cycle)


def build_word_graph(system: SystemDescriptor, u: Observable, psi: Observable) -> WordGraph:
    if not system.is_shift:
        raise KindMismatchError("symbolic system", system.kind.value)
    ru, rp = locally_constant_depth(u), locally_constant_depth(psi)
    if ru is None or rp is None:
        raise KindMismatchError("locally constant u and psi", type(u if ru is None else psi).__name__)
    q = max(max(ru, rp) - 1, 1)
    nodes = tuple(admissible_words(system, q))
    index = {w: i for i, w in enumerate(nodes)}
    edges = []
    for w in admissible_words(system, q + 1):
        weight = word_value(psi, w)
        if weight <= 0:
            raise ValidationError("weight must be positive", word=format_word(w))
        edges.append(Edge(index[w[:q]], index[w[1:]], w, word_value(u, w), weight))
    return WordGraph(q=q, nodes=nodes, edges=tuple(edges))


def find_negative_cycle(graph: WordGraph, costs: Sequence[Real]) -> Optional[List[int]]:
    """Edge indices of a negative cycle, or None (Bellman-Ford from a virtual source)."""
    n = len(graph.nodes)
    dist: List[Real] = [Fraction(0)] * n
    pred = [-1] * n
    last = -1
    for _ in range(n + 1):
        last = -1
        for ei, e in enumerate(graph.edges):
            candidate = dist[e.src] + costs[ei]
            if candidate < dist[e.dst]:
                dist[e.dst] = candidate
                pred[e.dst] = ei
                last = e.dst
        if last == -1:
            return None
    v = last
    for _ in range(n):
        v = graph.edges[pred[v]].src
    cycle = []
    x = v
    while True:
        ei = pred[x]
        cycle.append(ei)
        x = graph.edges[ei].src
        if x == v:
            break
    return cycle[::-1]


def _any_cycle(graph: WordGraph) -> List[int]:
    out: Dict[int, int] = {}
    for ei, e in enumerate(graph.edges):
        out.setdefault(e.src, ei)
    seen: Dict[int, int] = {}
    path: List[int] = []
    v = graph.edges[0].src if graph.edges else 0
    while v not in seen:
        if v not in out:
            raise SubActionError("word graph has no cycle")
        seen[v] = len(path)
        path.append(out[v])
        v = graph.edges[out[v]].dst
    return path[seen[v]:]


def min_cycle_ratio(
    system: SystemDescriptor, u: Observable, weight: Union[Weight, Observable]
) -> Tuple[Fraction, PeriodicOrbit]:
    """Exact minimum of sum(u)/sum(psi) over cycles, with a witness orbit."""
    graph = build_word_graph(system, u, _psi_of(weight))
    if not graph.edges:
        raise SubActionError("word graph has no cycle")
    cycle = _any_cycle(graph)
    t = graph.cycle_ratio(cycle)
    steps = 0
    while True:
        negative = find_negative_cycle(graph, graph.reduced_costs(t))
        if negative is None:
            break
        cycle = negative
        t = graph.cycle_ratio(cycle)
        steps += 1
    witness = orbit_from_word(system, graph.cycle_word(cycle))
    logger.info("min_cycle_ratio", beta=str(t), witness=witness.label(), steps=steps)
    return t, witness


# =============================================================================
# CERTIFICATES
# =============================================================================

@dataclass(frozen=True, eq=False)
class SubActionCertificate:
    """beta, K, the sub-action v and the reduced observable ubar >= 0."""
    beta: Real
    K: int
    v: Observable
    ubar: Observable
    ubar_min: Real
    zero_set: Tuple[Any, ...]
    method: str
    witness: Optional[PeriodicOrbit] = None
    residual: float = 0.0
    iterations: int = 0
    eigenvalue: Real = 0
    tolerance: float = 0.0
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.method == "bellman"

    def zero_set_labels(self) -> List[str]:
        if self.method == "bellman":
            return [format_word(w) for w in self.zero_set]
        return [str(z) for z in self.zero_set]

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "beta": self.beta,
            "K": self.K,
            "method": self.method,
            "ubar_min": self.ubar_min,
            "zero_set": self.zero_set_labels(),
            "residual": self.residual,
            "iterations": self.iterations,
            "eigenvalue": self.eigenvalue,
            "tolerance": self.tolerance,
            "witness": self.witness.label() if self.witness else None,
        }
        if isinstance(self.v, LocallyConstant):
            data["v"] = self.v.to_dict()["table"]
            data["ubar"] = self.ubar.to_dict()["table"]
        else:
            data["grid_n"] = len(self.v.grid)
        return data


def _edge_table(graph: WordGraph, beta: Real, v: Dict[Word, Real]) -> Dict[Word, Real]:
    q = graph.q
    return {e.word: e.cost - beta * e.weight + v[e.word[:q]] - v[e.word[1:]] for e in graph.edges}


def bellman_subaction(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    beta: Real,
    witness: Optional[PeriodicOrbit] = None,
) -> SubActionCertificate:
    """Bellman potentials of the reduced costs u - beta psi; exact, K = 1."""
    graph = build_word_graph(system, u, _psi_of(weight))
    beta = Fraction(beta)
    costs = graph.reduced_costs(beta)
    if find_negative_cycle(graph, costs) is not None:
        raise SubActionError("negative reduced cycle: beta is not the minimum", beta=beta)
    if witness is None:
        true_beta, witness = min_cycle_ratio(system, u, weight)
        if true_beta != beta:
            raise SubActionError("beta is below the minimum cycle ratio", beta=beta, minimum=true_beta)

    q = graph.q
    index = {w: i for i, w in enumerate(graph.nodes)}
    cycle_nodes = sorted({p.head(q) for p in witness.points})
    root = index[cycle_nodes[0]]
    n = len(graph.nodes)
    dist: List[Optional[Real]] = [None] * n
    dist[root] = Fraction(0)

    def relax() -> None:
        for _ in range(n):
            changed = False
            for ei, e in enumerate(graph.edges):
                if dist[e.src] is None:
                    continue
                candidate = dist[e.src] + costs[ei]
                if dist[e.dst] is None or candidate < dist[e.dst]:
                    dist[e.dst] = candidate
                    changed = True
            if not changed:
                return

    relax()
    for i in range(n):
        if dist[i] is None:
            dist[i] = Fraction(0)
            relax()

    v_table = {graph.nodes[i]: dist[i] for i in range(n)}
    ubar_table = _edge_table(graph, beta, v_table)
    ubar_min = min(ubar_table.values())
    if ubar_min < 0:
        raise SubActionError("reduced cost negative after relaxation", ubar_min=ubar_min)
    zero_set = tuple(sorted(w for w, val in ubar_table.items() if val == 0))
    off = [p for p in witness.points if ubar_table[p.head(q + 1)] != 0]
    if off:
        raise SubActionError("witness cycle has positive reduced cost; beta is below the minimum",
                             beta=beta, witness=witness.label())
    cert = SubActionCertificate(
        beta=beta,
        K=1,
        v=LocallyConstant(depth=q, table=tuple(sorted(v_table.items()))),
        ubar=LocallyConstant(depth=q + 1, table=tuple(sorted(ubar_table.items()))),
        ubar_min=ubar_min,
        zero_set=zero_set,
        method="bellman",
        witness=witness,
    )
    logger.info("bellman_subaction", beta=str(beta), zero_set=cert.zero_set_labels())
    return cert


def lax_oleinik_subaction(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    beta: Real,
    K: int = 1,
    grid_n: int = 4096,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    tol_zero: float = 1e-6,
) -> SubActionCertificate:
    """
    Iterate (Mv)(x) = min over T^K y = x of v(y) + u_K(y) - beta psi_K(y).

    v is normalized by v(0) = 0 after each step; the subtracted constant
    converges to the additive eigenvalue (0 when beta is exact).
    """
    if system.kind != SystemKind.CIRCLE:
        raise KindMismatchError("circle", system.kind.value)
    if grid_n < 2 or grid_n & (grid_n - 1):
        raise ValidationError("grid_n must be a power of two", grid_n=grid_n)
    psi = _psi_of(weight)
    uK = birkhoff_average_k(u, system, K)
    psiK = birkhoff_average_k(psi, system, K)
    b = float(beta)

    n = grid_n
    xs = np.arange(n) / n
    branches = system.k ** K
    Y = (xs[:, None] + np.arange(branches)[None, :]) / branches
    cost = (uK.values(system, Y.ravel()) - b * psiK.values(system, Y.ravel())).reshape(Y.shape)

    v = np.zeros(n)
    residual = float("inf")
    m = 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        Mv = (np.interp(Y, xs, v, period=1.0) + cost).min(axis=1)
        m = float(Mv[0])
        new = Mv - m
        residual = float(np.abs(new - v).max())
        v = new
        if residual < tol:
            break
    else:
        raise ConvergenceError("Lax-Oleinik iteration did not converge", residual, iterations)

    image = (branches * np.arange(n)) % n
    cost_grid = uK.values(system, xs) - b * psiK.values(system, xs)
    ubar_grid = cost_grid + v - v[image]
    ubar_min = float(ubar_grid.min())
    zero_set = tuple(CirclePoint(Fraction(int(j), n)) for j in np.flatnonzero(ubar_grid < tol_zero))

    v_obs = GridFunction(v)
    ubar = Sum((uK, Scale(-beta, psiK), v_obs, Scale(Fraction(-1), IterateComposition(v_obs, K))))
    logger.info("lax_oleinik", K=K, iterations=iterations, residual=residual,
                ubar_min=ubar_min, zero_points=len(zero_set))
    return SubActionCertificate(
        beta=beta,
        K=K,
        v=v_obs,
        ubar=ubar,
        ubar_min=ubar_min,
        zero_set=zero_set,
        method="lax_oleinik",
        residual=residual,
        iterations=iterations,
        eigenvalue=m,
        tolerance=tol_zero,
        extras={"ubar_grid": ubar_grid},
    )


def compute_subaction(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    beta: Optional[Real] = None,
    grid_n: int = 4096,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    tol_zero: float = 1e-6,
    max_K: int = 8,
) -> SubActionCertificate:
    """Dispatch to the exact or the grid path; the grid path climbs the K ladder."""
    if system.is_shift:
        exact_beta, witness = min_cycle_ratio(system, u, weight)
        return bellman_subaction(system, u, weight, exact_beta, witness)
    if system.kind != SystemKind.CIRCLE:
        raise KindMismatchError("symbolic system or circle", system.kind.value)
    if beta is None:
        raise ValidationError("the circle path needs a beta estimate")
    failure: Optional[Dict[str, Any]] = None
    for K in K_LADDER:
        if K > max_K:
            break
        try:
            cert = lax_oleinik_subaction(system, u, weight, beta, K, grid_n, max_iter, tol, tol_zero)
        except ConvergenceError as exc:
            failure = {"K": K, **exc.to_dict()}
            logger.warning("lax_oleinik_diverged", K=K, residual=exc.fields["residual"])
            continue
        if cert.ubar_min >= -NEGATIVE_TOL and cert.zero_set:
            return cert
        failure = {"K": K, "ubar_min": cert.ubar_min, "zero_points": len(cert.zero_set)}
        logger.warning("subaction_rejected", **failure)
    raise SubActionError("no K in the ladder gave a nonnegative reduced observable", last=failure)


# =============================================================================
# VERIFICATION
# =============================================================================

@dataclass
class CertificateReport:
    passed: bool
    checks: Dict[str, bool]
    failures: List[Dict[str, Any]]
    beta_N: Real
    argmin: List[str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "beta_N": self.beta_N,
            "argmin": self.argmin,
        }


def reduced_observable(
    system: SystemDescriptor, u: Observable, psi: Observable, beta: Real, v: Observable, K: int
) -> Observable:
    """ubar = u_K - beta psi_K + v - v o T^K as an observable."""
    uK = birkhoff_average_k(u, system, K)
    psiK = birkhoff_average_k(psi, system, K)
    return Sum((uK, Scale(-beta, psiK), v, Scale(Fraction(-1), IterateComposition(v, K))))


def verify_certificate(
    cert: SubActionCertificate,
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    N: int,
    brute: Optional[BetaResult] = None,
) -> CertificateReport:
    """
    Check (a) ubar >= 0, (b) ubar vanishes along every brute force minimizer,
    (c) beta agrees with the brute force value; on the exact path also the
    telescoping identity over all orbits of period <= N.
    """
    psi = _psi_of(weight)
    brute = brute or beta_bruteforce(u, psi, system, N)
    failures: List[Dict[str, Any]] = []
    checks: Dict[str, bool] = {}
    ubar = reduced_observable(system, u, psi, cert.beta, cert.v, cert.K)

    if cert.method == "bellman":
        graph = build_word_graph(system, u, psi)
        ubar_table = _edge_table(graph, Fraction(cert.beta), cert.v.mapping)
        negative = sorted(w for w, val in ubar_table.items() if val < 0)
        checks["nonnegative"] = not negative
        failures += [{"check": "nonnegative", "cylinder": format_word(w), "ubar": ubar_table[w]}
                     for w in negative]
        zero_tol: Real = 0
    else:
        grid = cert.v.grid
        n = len(grid)
        xs = np.arange(n) / n
        grid_vals = ubar.values(system, xs)
        bad = np.flatnonzero(grid_vals < -NEGATIVE_TOL)
        checks["nonnegative"] = len(bad) == 0
        failures += [{"check": "nonnegative", "point": str(Fraction(int(j), n)), "ubar": float(grid_vals[j])}
                     for j in bad[:20]]
        zero_tol = cert.tolerance or 1e-6

    along = True
    for orbit in brute.argmin:
        total = orbit_sum(ubar, system, orbit)
        if total > zero_tol * orbit.period:
            along = False
            failures.append({"check": "zero_on_minimizers", "orbit": orbit.label(), "ubar_sum": total})
    checks["zero_on_minimizers"] = along

    if cert.exact:
        agrees = cert.beta == brute.value
    else:
        agrees = abs(float(cert.beta) - float(brute.value)) <= 1e-9 * max(1.0, abs(float(brute.value)))
    checks["beta_agrees"] = bool(agrees)
    if not agrees:
        failures.append({"check": "beta_agrees", "beta": cert.beta, "beta_N": brute.value})

    if cert.exact:
        telescopes = True
        for orbit in enumerate_orbits(system, N):
            lhs = orbit_sum(ubar, system, orbit)
            rhs = orbit_sum(u, system, orbit) - cert.beta * orbit_sum(psi, system, orbit)
            if lhs != rhs:
                telescopes = False
                failures.append({"check": "telescoping", "orbit": orbit.label()})
        checks["telescoping"] = telescopes

    report = CertificateReport(
        passed=all(checks.values()),
        checks=checks,
        failures=failures,
        beta_N=brute.value,
        argmin=[o.label() for o in brute.argmin],
    )
    logger.info("certificate_verified", passed=report.passed, checks=checks)
    return report


def with_potential(cert: SubActionCertificate, system: SystemDescriptor, u: Observable,
                   weight: Union[Weight, Observable], v: Observable) -> SubActionCertificate:
    """Same certificate with the sub-action replaced (ubar recomputed)."""
    psi = _psi_of(weight)
    ubar = reduced_observable(system, u, psi, cert.beta, v, cert.K)
    return SubActionCertificate(
        beta=cert.beta, K=cert.K, v=v, ubar=ubar, ubar_min=cert.ubar_min,
        zero_set=cert.zero_set, method=cert.method, witness=cert.witness,
        residual=cert.residual, iterations=cert.iterations, eigenvalue=cert.eigenvalue,
        tolerance=cert.tolerance,
    )


# =============================================================================
# REFERENCE SET
# =============================================================================

@dataclass(frozen=True)
class ReferenceSet:
    """Finite approximation Z of the minimizing set."""
    orbits: Tuple[PeriodicOrbit, ...]

    @property
    def points(self) -> List[Point]:
        return points_of(self.orbits)

    def to_dict(self) -> Dict[str, Any]:
        return {"orbits": [o.label() for o in self.orbits], "size": len(self.points)}


def reference_set(
    system: SystemDescriptor,
    cert: SubActionCertificate,
    brute: BetaResult,
    N: int,
) -> ReferenceSet:
    """Argmin orbits plus the orbits of period <= N on which ubar vanishes."""
    chosen = {o.representative: o for o in brute.argmin}
    tol: Real = 0 if cert.exact else (cert.tolerance or 1e-6)
    zeros = set(cert.zero_set)
    for orbit in enumerate_orbits(system, N):
        if orbit.representative in chosen:
            continue
        if cert.exact:
            inside = all(p.head(cert.ubar.depth) in zeros for p in orbit.points)
        else:
            inside = orbit_sum(cert.ubar, system, orbit) <= tol * orbit.period
        if inside:
            chosen[orbit.representative] = orbit
    orbits = tuple(sorted(chosen.values(), key=lambda o: o.sort_key))
    logger.info("reference_set", orbits=[o.label() for o in orbits])
    return ReferenceSet(orbits)
