"""
permin Orchestrator
===================
Runs one subcommand (or the whole pipeline) from an ExperimentConfig and
collects its JSON report, CSV tables and exit code.

The pipeline:
    beta + sub-action certificate -> reference set Z -> good orbit
    -> perturbation budget -> perturbed observable -> stability sweep
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .audit_logger import bind_run, envelope
from .config import ExperimentConfig
from .errors import ConfigError
from .modules.construction import ConstructionTrace, construct_good_orbit
from .modules.dynamics import Point, SystemDescriptor, validate_pseudo_orbit
from .modules.enumeration import (
    ORBIT_COLUMNS,
    PeriodicOrbit,
    beta_bruteforce,
    bq_decay_scan,
    deviation,
    enumerate_orbits,
    orbit_of,
    orbit_statistics,
    ties,
)
from .modules.observables import Observable, Weight, certify_weight, observable_from_dict
from .modules.perturbation import (
    SWEEP_COLUMNS,
    PerturbationBudget,
    adversarial_perturbation,
    build_perturbed,
    compute_budget,
    stability_sweep,
    verify_unique_minimizer,
)
from .modules.shadowing import pseudo_deviation, shadow_points, transfer_bound
from .modules.subaction import (
    SubActionCertificate,
    compute_subaction,
    min_cycle_ratio,
    reference_set,
    verify_certificate,
)
from .serialization import point_from_json, rows_from, to_plain, write_csv, write_json

logger = structlog.get_logger("Orchestrator")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_VERIFICATION = 3

COMMANDS = ("enumerate", "beta", "subaction", "shadow", "construct", "perturb", "verify",
            "bq-scan", "pipeline")

Table = Tuple[List[str], List[List[Any]]]


@dataclass
class CommandResult:
    """Report, tables and exit code of one subcommand."""
    command: str
    report: Dict[str, Any]
    tables: Dict[str, Table] = field(default_factory=dict)
    exit_code: int = EXIT_OK
    artifacts: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.report, exit_code=self.exit_code)


class Orchestrator:
    """Coordinates the domain modules for one configuration."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.system: SystemDescriptor = config.system.build()
        self.rng = np.random.default_rng(config.rng_seed)
        self._u: Optional[Observable] = None
        self._weight: Optional[Weight] = None
        self._handlers: Dict[str, Callable[[], CommandResult]] = {
            "enumerate": self.enumerate,
            "beta": self.beta,
            "subaction": self.subaction,
            "shadow": self.shadow,
            "construct": self.construct,
            "perturb": self.perturb,
            "verify": self.verify,
            "bq-scan": self.bq_scan,
            "pipeline": self.pipeline,
        }

    # -------------------------------------------------------------------------
    # Inputs
    # -------------------------------------------------------------------------

    @property
    def u(self) -> Observable:
        if self._u is None:
            self._u = self.config.observable("u", self.system)
        return self._u

    @property
    def weight(self) -> Weight:
        if self._weight is None:
            psi = self.config.observable("psi", self.system)
            self._weight = certify_weight(self.system, psi, self.config.alpha)
        return self._weight

    def _points(self, name: str) -> List[Point]:
        return self.config.point_list(name, self.system)

    def _orbit(self) -> PeriodicOrbit:
        return orbit_of(self.system, point_from_json(self.system, self.config.require("orbit")))

    # -------------------------------------------------------------------------
    # Dispatch
    # -------------------------------------------------------------------------

    def run(self, command: str) -> CommandResult:
        if command not in self._handlers:
            raise ConfigError("command", f"unknown command {command!r}")
        canonical = self.config.canonical()
        audit = envelope(command, canonical, self.config.rng_seed,
                         {"system": self.system.to_dict()})
        bind_run(command, audit["config_hash"])
        logger.info("command_start", system=self.system.kind.value)
        result = self._handlers[command]()
        result.report = to_plain(dict(result.report, audit=audit, status=_status(result.exit_code)))
        if self.config.out_dir:
            result.artifacts = self._write(result)
        logger.info("command_done", exit_code=result.exit_code, artifacts=len(result.artifacts))
        return result

    def _write(self, result: CommandResult) -> List[str]:
        out = Path(self.config.out_dir)
        stem = result.command.replace("-", "_")
        paths = [write_json(out / f"{stem}.json", result.report)]
        for name, (columns, rows) in sorted(result.tables.items()):
            paths.append(write_csv(out / f"{stem}_{name}.csv", columns, rows))
        return [str(p) for p in paths]

    # -------------------------------------------------------------------------
    # Shared steps
    # -------------------------------------------------------------------------

    def _certificate(self) -> Tuple[SubActionCertificate, Dict[str, Any]]:
        cfg = self.config
        brute = beta_bruteforce(self.u, self.weight, self.system, cfg.N)
        beta = cfg.beta if cfg.beta is not None else brute.value
        lo = cfg.lax_oleinik
        cert = compute_subaction(self.system, self.u, self.weight, beta, lo.grid_n, lo.max_iter,
                                 lo.tol, lo.tol_zero, lo.max_K)
        check = verify_certificate(cert, self.system, self.u, self.weight, cfg.N, brute)
        refs = reference_set(self.system, cert, brute, cfg.N)
        return cert, {"brute": brute, "check": check, "reference": refs}

    def _reference_points(self, extras: Optional[Dict[str, Any]]) -> List[Point]:
        if self.config.Z is not None:
            return self._points("Z")
        if extras is None:
            raise ConfigError("Z", "required for this command")
        return extras["reference"].points

    # -------------------------------------------------------------------------
    # Subcommands
    # -------------------------------------------------------------------------

    def enumerate(self) -> CommandResult:
        cfg = self.config
        orbits = enumerate_orbits(self.system, cfg.N)
        Z = self._points("Z") if cfg.Z is not None else None
        if cfg.u is not None:
            stats = [orbit_statistics(self.system, self.u, self.weight, o, Z, cfg.alpha) for o in orbits]
            rows = [s.to_row() for s in stats]
        else:
            rows = [[o.period, o.label(), "", "", "", "", ""] for o in orbits]
        periods: Dict[int, int] = {}
        for o in orbits:
            periods[o.period] = periods.get(o.period, 0) + 1
        report = {"N": cfg.N, "orbits": len(orbits), "by_period": periods}
        return CommandResult("enumerate", report, {"orbits": (ORBIT_COLUMNS, rows)})

    def beta(self) -> CommandResult:
        brute = beta_bruteforce(self.u, self.weight, self.system, self.config.N)
        report: Dict[str, Any] = {"brute": brute.to_dict()}
        if self.system.is_shift:
            exact, witness = min_cycle_ratio(self.system, self.u, self.weight)
            report.update(beta=exact, witness=witness.label(), method="min_cycle_ratio",
                          agrees=ties(exact, brute.value))
            code = EXIT_OK if report["agrees"] else EXIT_VERIFICATION
        else:
            report.update(beta=brute.value, witness=brute.argmin[0].label(), method="bruteforce")
            code = EXIT_OK
        return CommandResult("beta", report, exit_code=code)

    def subaction(self) -> CommandResult:
        cert, extras = self._certificate()
        check = extras["check"]
        report = {
            "certificate": cert.to_dict(),
            "verification": check.to_dict(),
            "reference_set": extras["reference"].to_dict(),
        }
        return CommandResult("subaction", report,
                             exit_code=EXIT_OK if check.passed else EXIT_VERIFICATION)

    def shadow(self) -> CommandResult:
        cfg = self.config
        points = self._points("points")
        eta = cfg.require("eta")
        result = shadow_points(self.system, points, eta)
        report: Dict[str, Any] = {"shadow": result.to_dict()}
        if cfg.Z is not None:
            Z = self._points("Z")
            pseudo = validate_pseudo_orbit(self.system, points, eta)
            report["transfer"] = {
                "pseudo_deviation": pseudo_deviation(self.system, points, Z, cfg.alpha),
                "orbit_deviation": deviation(self.system, result.orbit, Z, cfg.alpha),
                "bound": transfer_bound(self.system, pseudo, Z, cfg.alpha),
            }
        return CommandResult("shadow", report)

    def _trace(self, Z: Sequence[Point]) -> ConstructionTrace:
        cfg = self.config
        cc = cfg.construction
        seed_orbit = None
        if cc.seed_orbit is not None:
            seed_orbit = orbit_of(self.system, point_from_json(self.system, cc.seed_orbit))
        return construct_good_orbit(self.system, Z, cfg.alpha, cc.L_hat, cc.seed_n, cc.seed_k,
                                    seed_orbit=seed_orbit, strict=cc.strict)

    def construct(self, Z: Optional[Sequence[Point]] = None) -> CommandResult:
        trace = self._trace(list(Z) if Z is not None else self._points("Z"))
        return CommandResult("construct", {"trace": trace.to_dict()}, {"stages": _stage_table(trace)})

    def _budget(self, cert: SubActionCertificate, extras: Dict[str, Any], Z: Sequence[Point],
                orbit: Optional[PeriodicOrbit] = None) -> Tuple[PeriodicOrbit, PerturbationBudget]:
        orbit = orbit or self._orbit()
        budget = compute_budget(self.system, self.u, self.weight, orbit, self.config.epsilon,
                                self.config.alpha, cert, Z, extras["check"])
        return orbit, budget

    def perturb(self) -> CommandResult:
        cert, extras = self._certificate()
        orbit, budget = self._budget(cert, extras, self._reference_points(extras))
        h = observable_from_dict(self.config.h, self.system) if self.config.h is not None else None
        u_pert = build_perturbed(self.u, self.config.epsilon, orbit, self.config.alpha, h, budget, self.system)
        report = {"orbit": orbit.label(), "budget": budget.to_dict(), "u_pert": u_pert.to_dict()}
        return CommandResult("perturb", report)

    def verify(self) -> CommandResult:
        cfg = self.config
        cert, extras = self._certificate()
        orbit, budget = self._budget(cert, extras, self._reference_points(extras))
        h = observable_from_dict(cfg.h, self.system) if cfg.h is not None else None
        u_pert = build_perturbed(self.u, cfg.epsilon, orbit, cfg.alpha, h, budget, self.system)
        report = verify_unique_minimizer(self.system, u_pert, self.weight, orbit, cfg.N, cert,
                                         rng=self.rng, samples=cfg.sweep.samples)
        columns = ["orbit", "period", "ratio", "margin"]
        rows = rows_from(sorted(report.margins, key=lambda r: (r["period"], r["orbit"])), columns)
        return CommandResult("verify", {"budget": budget.to_dict(), "verification": report.to_dict()},
                             {"margins": (columns, rows)},
                             exit_code=EXIT_OK if report.passed else EXIT_VERIFICATION)

    def bq_scan(self) -> CommandResult:
        sc = self.config.scan
        rows = bq_decay_scan(self.system, self._points("Z"), self.config.alpha, sc.k,
                             range(sc.n_min, sc.n_max + 1))
        columns = ["n", "a_n", "min_deviation", "orbit"]
        decays = bool(rows) and any(r["n"] == 3 for r in rows) and \
            min(r["a_n"] for r in rows) < next(r["a_n"] for r in rows if r["n"] == 3)
        report = {"k": sc.k, "rows": rows, "decays_below_a3": decays}
        return CommandResult("bq-scan", report, {"decay": (columns, rows_from(rows, columns))})

    def pipeline(self) -> CommandResult:
        cfg = self.config
        cert, extras = self._certificate()
        check = extras["check"]
        Z = self._reference_points(extras)
        trace = self._trace(Z)
        orbit, budget = self._budget(cert, extras, Z, trace.final)
        sweep = stability_sweep(self.system, self.u, self.weight, orbit, cfg.epsilon, cfg.alpha, cert,
                                cfg.sweep.trials, budget, cfg.N, self.rng, cfg.sweep.samples)
        if cfg.sweep.adversarial:
            sweep.adversarial = adversarial_perturbation(self.system, self.u, self.weight, orbit,
                                                         cfg.epsilon, cfg.alpha, cert, budget, cfg.N,
                                                         cfg.sweep.inflation)
        passed = check.passed and sweep.all_passed
        report = {
            "certificate": cert.to_dict(),
            "verification": check.to_dict(),
            "reference_set": extras["reference"].to_dict(),
            "construction": trace.to_dict(),
            "budget": budget.to_dict(),
            "sweep": sweep.to_dict(),
            "unique_minimizer": orbit.label() if passed else None,
        }
        tables = {"stages": _stage_table(trace)}
        tables["sweep"] = (SWEEP_COLUMNS, rows_from(sweep.trials, SWEEP_COLUMNS))
        return CommandResult("pipeline", report, tables,
                             exit_code=EXIT_OK if passed else EXIT_VERIFICATION)


STAGE_COLUMNS = ["index", "action", "period", "orbit", "gap", "deviation", "ratio", "closeness"]


def _stage_table(trace: ConstructionTrace) -> Table:
    return STAGE_COLUMNS, rows_from([s.to_dict() for s in trace.stages], STAGE_COLUMNS)


def _status(exit_code: int) -> str:
    return {EXIT_OK: "ok", EXIT_VERIFICATION: "verification_failed"}.get(exit_code, "error")


def run_command(config: ExperimentConfig, command: str) -> CommandResult:
    """Run one subcommand; PerminError propagates to the caller with its exit code."""
    return Orchestrator(config).run(command)
