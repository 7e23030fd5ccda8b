"""
permin Modules Package
======================
Domain modules: systems, observables, orbit enumeration, shadowing,
sub-actions, good-orbit construction and perturbation.
"""

from .dynamics import (
    CirclePoint,
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
from .observables import (
    ClosedForm,
    DistToOrbitPow,
    LocallyConstant,
    Observable,
    Weight,
    certify_weight,
    evaluate,
    observable_from_dict,
)
from .enumeration import (
    BetaResult,
    PeriodicOrbit,
    beta_bruteforce,
    bq_decay_scan,
    deviation,
    enumerate_orbits,
    gap,
    orbit_of,
)
from .shadowing import ShadowResult, certify_asp1, shadow, shadow_points
from .subaction import (
    SubActionCertificate,
    compute_subaction,
    min_cycle_ratio,
    reference_set,
    verify_certificate,
)
from .construction import ConstructionTrace, bq_seed, construct_good_orbit
from .perturbation import (
    PerturbationBudget,
    VerificationReport,
    adversarial_perturbation,
    build_perturbed,
    compute_budget,
    stability_sweep,
    verify_unique_minimizer,
)

__all__ = [
    'CirclePoint',
    'PseudoOrbit',
    'SymbolPoint',
    'SystemDescriptor',
    'SystemKind',
    'TorusPoint',
    'apply',
    'distance',
    'iterate',
    'validate_pseudo_orbit',
    'ClosedForm',
    'DistToOrbitPow',
    'LocallyConstant',
    'Observable',
    'Weight',
    'certify_weight',
    'evaluate',
    'observable_from_dict',
    'BetaResult',
    'PeriodicOrbit',
    'beta_bruteforce',
    'bq_decay_scan',
    'deviation',
    'enumerate_orbits',
    'gap',
    'orbit_of',
    'ShadowResult',
    'certify_asp1',
    'shadow',
    'shadow_points',
    'SubActionCertificate',
    'compute_subaction',
    'min_cycle_ratio',
    'reference_set',
    'verify_certificate',
    'ConstructionTrace',
    'bq_seed',
    'construct_good_orbit',
    'PerturbationBudget',
    'VerificationReport',
    'adversarial_perturbation',
    'build_perturbed',
    'compute_budget',
    'stability_sweep',
    'verify_unique_minimizer',
]
