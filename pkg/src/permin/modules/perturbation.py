"""
Perturbation Module
===================
Perturbed observables u + eps d^alpha(., O) + h whose unique minimizing
measure sits on the periodic orbit O, with the explicit budget for h and a
verifier for uniqueness.

Features:
- Budget constants L1, L2, L3, L_hat, delta_hat and the caps on h
- Brute force margins of O against every orbit of period <= N
- G-positivity sampling along forward orbits of non-generic points
- Stability sweeps over random h and a directed adversarial h
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from ..errors import BudgetViolationError, CertificateError, OrbitNotGoodEnoughError, ValidationError
from .construction import orbit_quality
from .dynamics import (
    CirclePoint,
    Point,
    SymbolPoint,
    SystemDescriptor,
    SystemKind,
    apply,
    eventual_cycle,
    random_cycle_word,
    random_point,
)
from .enumeration import (
    PeriodicOrbit,
    enumerate_orbits,
    orbit_ratio_average,
    orbit_sum,
)
from .observables import (
    FLOAT_TOL,
    DistToOrbitPow,
    HolderCertificate,
    Observable,
    Scale,
    Sum,
    Weight,
    birkhoff_average_k,
    certify_weight,
    is_zero,
    power,
    random_perturbation,
)
from .subaction import CertificateReport, SubActionCertificate, reduced_observable

logger = structlog.get_logger("Perturbation")

Real = Union[Fraction, float]

# Multiplier of N * #O giving the default horizon of the G sampling.
M_MAX_FACTOR = 10

DEFAULT_SAMPLES = 100


def _weight(system: SystemDescriptor, weight: Union[Weight, Observable], alpha: Real) -> Weight:
    if isinstance(weight, Weight):
        return weight
    return certify_weight(system, weight, alpha)


def _positive(x: Real) -> bool:
    if isinstance(x, Fraction):
        return x > 0
    return float(x) > FLOAT_TOL


def _one_minus_decay(system: SystemDescriptor, alpha: Real) -> Real:
    """1 - e^{-lam alpha}."""
    asp = system.asp
    if alpha == 1 and asp.base is not None:
        return 1 - Fraction(1, asp.base)
    return 1 - math.exp(-asp.lam * float(alpha))


# =============================================================================
# BUDGET
# =============================================================================

@dataclass(frozen=True)
class PerturbationBudget:
    """Constants of the positivity argument and the admissible h-ball."""
    epsilon: Real
    alpha: Real
    lip: Fraction
    L1: Real
    L2: Real
    L3: Real
    L_hat: Real
    delta_hat: Real
    h_sup_cap: Real
    h_seminorm_cap: Real
    L_O: Real
    gap: Fraction
    deviation: Real
    period: int
    a_O: Real
    psi_sup: Real
    norms: Dict[str, Real] = field(default_factory=dict)

    def area1_radius(self, h_sup: Real = Fraction(0)) -> Real:
        """((|a_O| ||psi||_0 + ||h||_0) / eps)^(1/alpha)."""
        base = (abs(self.a_O) * self.psi_sup + h_sup) / self.epsilon
        if self.alpha == 1:
            return base
        return float(base) ** (1 / float(self.alpha))

    def area1_ok(self, h_sup: Real = Fraction(0)) -> bool:
        return self.area1_radius(h_sup) < self.gap / (2 * self.lip)

    def check(self, h_cert: HolderCertificate, scale: Real = 1) -> None:
        """Raise naming the first cap that ``h`` violates."""
        if h_cert.sup_norm >= self.h_sup_cap * scale and h_cert.sup_norm > 0:
            raise BudgetViolationError("h_sup", h_cert.sup_norm, self.h_sup_cap * scale)
        if h_cert.seminorm >= self.h_seminorm_cap * scale and h_cert.seminorm > 0:
            raise BudgetViolationError("h_seminorm", h_cert.seminorm, self.h_seminorm_cap * scale)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "lip": self.lip,
            "L1": self.L1,
            "L2": self.L2,
            "L3": self.L3,
            "L_hat": self.L_hat,
            "delta_hat": self.delta_hat,
            "h_sup_cap": self.h_sup_cap,
            "h_seminorm_cap": self.h_seminorm_cap,
            "L_O": self.L_O,
            "gap": self.gap,
            "deviation": self.deviation,
            "period": self.period,
            "a_O": self.a_O,
            "area1_radius": self.area1_radius(),
            "area1_ok": self.area1_ok(),
            "norms": dict(self.norms),
        }


def budget_constants(
    system: SystemDescriptor,
    epsilon: Real,
    alpha: Real,
    ubar_norm: Real,
    ubar_sup: Real,
    psiK_norm: Real,
    psi_min: Real,
    psi_sup: Real,
) -> Dict[str, Real]:
    """
    L1, L2, L3, L_hat and delta_hat from certified upper bounds.

    ``ubar_norm`` and ``psiK_norm`` are full alpha-norms (sup plus seminorm).
    Larger norm inputs never lower L_hat and never raise delta_hat.
    """
    asp = system.asp
    lip_a = power(2 * system.lip, alpha)
    L1 = epsilon / lip_a
    F = (4 * power(asp.C, alpha)
         * (ubar_norm + 10 * epsilon + (ubar_sup + power(asp.delta, alpha)) / psi_min * psiK_norm)
         / (_one_minus_decay(system, alpha) * psi_min * epsilon)
         + 2 * psi_sup / psi_min)
    L2 = F * ubar_norm
    L3 = F * (1 + psi_min)
    return {
        "L1": L1,
        "L2": L2,
        "L3": L3,
        "L_hat": max(3 * L2 / L1, 2 * lip_a * ubar_norm / (epsilon * psi_min)),
        "delta_hat": min(Fraction(1), L1 / (3 * L3), epsilon * psi_min / (2 * lip_a)),
    }


def compute_budget(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    orbit: PeriodicOrbit,
    epsilon: Real,
    alpha: Real,
    cert: SubActionCertificate,
    Z: Sequence[Point],
    check: CertificateReport,
) -> PerturbationBudget:
    """
    Budget constants from certified norms of ubar and psi.

    ``check`` is the report of ``verify_certificate`` for ``cert``; a failed
    report raises CertificateError. Raises OrbitNotGoodEnoughError when
    L_O = D^alpha(O) / d_{alpha,Z}(O) does not exceed L_hat.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive", epsilon=epsilon)
    if not check.passed:
        raise CertificateError("sub-action certificate failed verification", check.failures)
    w = _weight(system, weight, alpha)
    ubar_cert = cert.ubar.certify(system, alpha)
    psiK = w.averaged(system, cert.K)
    psiK_norm = psiK.certify(system, alpha).norm
    ubar_norm, ubar_sup = ubar_cert.norm, ubar_cert.sup_norm
    psi_min, psi_sup = w.psi_min, w.cert.sup_norm

    c = budget_constants(system, epsilon, alpha, ubar_norm, ubar_sup, psiK_norm, psi_min, psi_sup)
    L_hat, delta_hat = c["L_hat"], c["delta_hat"]

    D, dev, L_O = orbit_quality(system, orbit, Z, alpha)
    if not (L_O == float("inf") or L_O > L_hat):
        raise OrbitNotGoodEnoughError(L_O, L_hat)

    ubar_O = orbit_sum(cert.ubar, system, orbit)
    a_O = ubar_O / orbit_sum(psiK, system, orbit)
    budget = PerturbationBudget(
        epsilon=epsilon,
        alpha=alpha,
        lip=system.lip,
        L1=c["L1"],
        L2=c["L2"],
        L3=c["L3"],
        L_hat=L_hat,
        delta_hat=delta_hat,
        h_sup_cap=power(D, alpha) / orbit.period * delta_hat,
        h_seminorm_cap=10 * epsilon,
        L_O=L_O,
        gap=D,
        deviation=dev,
        period=orbit.period,
        a_O=a_O,
        psi_sup=psi_sup,
        norms={
            "ubar_norm": ubar_norm,
            "ubar_sup": ubar_sup,
            "psiK_norm": psiK_norm,
            "psi_sup": psi_sup,
            "psi_min": psi_min,
        },
    )
    logger.info("budget", L_hat=str(L_hat), delta_hat=str(delta_hat), L_O=str(L_O),
                h_sup_cap=str(budget.h_sup_cap), area1_ok=budget.area1_ok())
    return budget


def build_perturbed(
    u: Observable,
    epsilon: Real,
    orbit: PeriodicOrbit,
    alpha: Real = Fraction(1),
    h: Optional[Observable] = None,
    budget: Optional[PerturbationBudget] = None,
    system: Optional[SystemDescriptor] = None,
) -> Observable:
    """u + eps d^alpha(., O) + h; h is checked against ``budget`` when one is given."""
    if h is not None and budget is not None:
        if system is None:
            raise ValidationError("a system is needed to certify h against the budget")
        budget.check(h.certify(system, alpha))
    terms: List[Observable] = [u]
    if epsilon != 0:
        terms.append(DistToOrbitPow(tuple(orbit.points), alpha, epsilon))
    if h is not None and not is_zero(h):
        terms.append(h)
    if len(terms) == 1:
        return u
    return Sum(tuple(terms))


# =============================================================================
# VERIFICATION
# =============================================================================

@dataclass
class VerificationReport:
    orbit: PeriodicOrbit
    beta_O: Real
    N: int
    margins: List[Dict[str, Any]] = field(default_factory=list)
    min_margin: Optional[Real] = None
    closest: Optional[str] = None
    a_O: Real = Fraction(0)
    g_orbit_sum: Real = Fraction(0)
    g_samples: List[Dict[str, Any]] = field(default_factory=list)
    m_max: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orbit": self.orbit.label(),
            "beta_O": self.beta_O,
            "N": self.N,
            "orbits_checked": len(self.margins),
            "min_margin": self.min_margin,
            "closest": self.closest,
            "a_O": self.a_O,
            "g_orbit_sum": self.g_orbit_sum,
            "g_samples": len(self.g_samples),
            "g_first_positive_max": max((s["m"] for s in self.g_samples if s["m"] is not None), default=None),
            "m_max": self.m_max,
            "passed": self.passed,
            "failures": self.failures,
            "checked": "periodic orbits of period <= N and G-sums along sampled non-generic points",
        }


def _start_point(system: SystemDescriptor, rng: np.random.Generator, i: int) -> Point:
    """Even draws: periodic points; odd draws: random rational / eventually periodic points."""
    if i % 2:
        return random_point(system, rng)
    j = int(rng.integers(1, 9))
    if system.is_shift:
        return SymbolPoint(random_cycle_word(system, rng, j))
    if system.kind == SystemKind.CIRCLE:
        q = system.k ** j - 1
        return CirclePoint(Fraction(int(rng.integers(q)), q))
    return random_point(system, rng, size=j)


def _sample_g(system: SystemDescriptor, G: Observable, orbit: PeriodicOrbit, rng: np.random.Generator,
              samples: int, m_max: int) -> List[Dict[str, Any]]:
    rows = []
    i = 0
    attempts = 0
    while len(rows) < samples and attempts < 100 * samples:
        attempts += 1
        z = _start_point(system, rng, i)
        i += 1
        if orbit.contains(eventual_cycle(system, z)[1]):
            continue
        total: Real = Fraction(0)
        hit = None
        x = z
        for m in range(m_max + 1):
            total += G.value(system, x)
            if _positive(total):
                hit = m
                break
            x = apply(system, x)
        rows.append({"z": z.to_dict(), "m": hit, "sum": total})
    return rows


def verify_unique_minimizer(
    system: SystemDescriptor,
    u_pert: Observable,
    weight: Union[Weight, Observable],
    orbit: PeriodicOrbit,
    N: int,
    cert: SubActionCertificate,
    rng: Optional[np.random.Generator] = None,
    samples: int = DEFAULT_SAMPLES,
    m_max: Optional[int] = None,
) -> VerificationReport:
    """
    (a) O's ratio average is strictly below every other orbit of period <= N;
    (b) G = ubar_pert - a_O psi_K sums to 0 over O, where ubar_pert is the
        reduced observable of u_pert with the certificate's beta and v;
    (c) partial sums of G along sampled non-generic points turn positive
        within m_max steps.
    Failures are recorded, never raised.
    """
    psi = weight.psi if isinstance(weight, Weight) else weight
    rng = rng if rng is not None else np.random.default_rng(0)
    m_max = m_max if m_max is not None else M_MAX_FACTOR * N * orbit.period

    beta_O = orbit_ratio_average(u_pert, psi, orbit, system)
    report = VerificationReport(orbit=orbit, beta_O=beta_O, N=N, m_max=m_max)
    for other in enumerate_orbits(system, N):
        if other.representative == orbit.representative:
            continue
        ratio = orbit_ratio_average(u_pert, psi, other, system)
        margin = ratio - beta_O
        report.margins.append({"orbit": other.label(), "period": other.period,
                               "ratio": ratio, "margin": margin})
        if report.min_margin is None or margin < report.min_margin:
            report.min_margin, report.closest = margin, other.label()
        if not _positive(margin):
            report.failures.append({"check": "margin", "orbit": other.label(), "margin": margin})

    ubar_pert = reduced_observable(system, u_pert, psi, cert.beta, cert.v, cert.K)
    psiK = birkhoff_average_k(psi, system, cert.K)
    report.a_O = orbit_sum(ubar_pert, system, orbit) / orbit_sum(psiK, system, orbit)
    G = Sum((ubar_pert, Scale(-report.a_O, psiK)))
    report.g_orbit_sum = orbit_sum(G, system, orbit)
    zero_ok = (report.g_orbit_sum == 0 if isinstance(report.g_orbit_sum, Fraction)
               else abs(report.g_orbit_sum) <= FLOAT_TOL * max(1, orbit.period))
    if not zero_ok:
        report.failures.append({"check": "g_orbit_sum", "value": report.g_orbit_sum})

    report.g_samples = _sample_g(system, G, orbit, rng, samples, m_max)
    for row in report.g_samples:
        if row["m"] is None:
            report.failures.append({"check": "g_positive", "z": row["z"], "sum": row["sum"],
                                    "m_max": m_max})

    logger.info("verify_unique_minimizer", orbit=orbit.label(), N=N, min_margin=str(report.min_margin),
                passed=report.passed, failures=len(report.failures))
    return report


# =============================================================================
# SWEEPS
# =============================================================================

@dataclass
class SweepReport:
    orbit: PeriodicOrbit
    trials: List[Dict[str, Any]] = field(default_factory=list)
    inflation: Real = 1
    adversarial: Optional[Dict[str, Any]] = None

    @property
    def all_passed(self) -> bool:
        return all(t["passed"] for t in self.trials)

    @property
    def worst_margin(self) -> Optional[Real]:
        margins = [t["min_margin"] for t in self.trials if t["min_margin"] is not None]
        return min(margins) if margins else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orbit": self.orbit.label(),
            "inflation": self.inflation,
            "trials": len(self.trials),
            "passed": sum(1 for t in self.trials if t["passed"]),
            "all_passed": self.all_passed,
            "worst_margin": self.worst_margin,
            "rows": self.trials,
            "adversarial": self.adversarial,
        }


SWEEP_COLUMNS = ["trial", "passed", "min_margin", "closest", "h_sup", "h_seminorm", "failures"]


def stability_sweep(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    orbit: PeriodicOrbit,
    epsilon: Real,
    alpha: Real,
    cert: SubActionCertificate,
    trials: int,
    budget: PerturbationBudget,
    N: int = 12,
    rng: Optional[np.random.Generator] = None,
    samples: int = DEFAULT_SAMPLES,
    inflation: Real = 1,
) -> SweepReport:
    """
    Verify u + eps d^alpha(., O) + h for ``trials`` draws of h.

    Trial 0 is h = 0; later trials draw h inside the budget ball scaled by
    ``inflation`` (1 keeps h inside the caps).
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1", trials=trials)
    rng = rng if rng is not None else np.random.default_rng(0)
    sweep = SweepReport(orbit=orbit, inflation=inflation)
    for t in range(trials):
        if t == 0:
            h: Optional[Observable] = None
            h_cert = HolderCertificate(alpha=alpha, sup_norm=Fraction(0), seminorm=Fraction(0), exact=True)
        else:
            h = random_perturbation(system, rng, budget.h_sup_cap * inflation,
                                    budget.h_seminorm_cap * inflation, alpha)
            h_cert = h.certify(system, alpha)
        u_pert = build_perturbed(u, epsilon, orbit, alpha, h)
        report = verify_unique_minimizer(system, u_pert, weight, orbit, N, cert, rng=rng, samples=samples)
        sweep.trials.append({
            "trial": t,
            "passed": report.passed,
            "min_margin": report.min_margin,
            "closest": report.closest,
            "h_sup": h_cert.sup_norm,
            "h_seminorm": h_cert.seminorm,
            "failures": report.failures[:3],
        })
    logger.info("stability_sweep", trials=trials, inflation=str(inflation), all_passed=sweep.all_passed,
                worst_margin=str(sweep.worst_margin))
    return sweep


def adversarial_perturbation(
    system: SystemDescriptor,
    u: Observable,
    weight: Union[Weight, Observable],
    orbit: PeriodicOrbit,
    epsilon: Real,
    alpha: Real,
    cert: SubActionCertificate,
    budget: PerturbationBudget,
    N: int = 12,
    inflation: Real = 100,
    samples: int = 10,
) -> Dict[str, Any]:
    """
    h = -kappa d^alpha(., O), with kappa large enough that the closest competitor
    O* overtakes O and h lies outside the caps scaled by ``inflation``.
    """
    psi = weight.psi if isinstance(weight, Weight) else weight
    base = verify_unique_minimizer(system, build_perturbed(u, epsilon, orbit, alpha), psi, orbit, N, cert,
                                   samples=0)
    by_label = {o.label(): o for o in enumerate_orbits(system, N)}
    best = None
    for row in base.margins:
        other = by_label[row["orbit"]]
        dist_sum = orbit_sum(DistToOrbitPow(tuple(orbit.points), alpha, Fraction(1)), system, other)
        if dist_sum == 0:
            continue
        needed = 2 * max(row["margin"], 0) * orbit_sum(psi, system, other) / dist_sum
        if best is None or (row["margin"], row["orbit"]) < (best[0], best[1]):
            best = (row["margin"], row["orbit"], needed)
    if best is None:
        raise ValidationError("no competing orbit within period N", N=N)
    floor = 2 * inflation * budget.h_seminorm_cap
    kappa = max(best[2], floor)
    h = Scale(-kappa, DistToOrbitPow(tuple(orbit.points), alpha, Fraction(1)))
    h_cert = h.certify(system, alpha)
    outside = (h_cert.sup_norm >= budget.h_sup_cap * inflation
               or h_cert.seminorm >= budget.h_seminorm_cap * inflation)
    report = verify_unique_minimizer(system, build_perturbed(u, epsilon, orbit, alpha, h), psi, orbit, N,
                                     cert, samples=samples)
    result = {
        "kappa": kappa,
        "target": best[1],
        "h_sup": h_cert.sup_norm,
        "h_seminorm": h_cert.seminorm,
        "inflation": inflation,
        "outside_inflated_caps": outside,
        "passed": report.passed,
        "failures": report.failures[:5],
    }
    logger.info("adversarial_perturbation", target=best[1], kappa=str(kappa), passed=report.passed,
                outside=outside)
    return result
