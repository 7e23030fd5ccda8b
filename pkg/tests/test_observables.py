"""
Observables Tests
=================
Evaluation, Birkhoff averages, Hölder certificates and parsing.
"""

from fractions import Fraction

import pytest

from permin.errors import InadmissibleWordError, KindMismatchError, ObservableError
from permin.modules.dynamics import CirclePoint, SymbolPoint
from permin.modules.enumeration import enumerate_orbits, orbit_sum
from permin.modules.observables import (
    ClosedForm,
    DistToOrbitPow,
    LocallyConstant,
    Scale,
    Sum,
    audit_certificate,
    birkhoff_average_k,
    certify_weight,
    evaluate,
    is_zero,
    observable_from_dict,
    random_perturbation,
    zero_observable,
)


# =============================================================================
# EVALUATION
# =============================================================================

def test_locally_constant_value(shift2, sft_u):
    assert evaluate(sft_u, shift2, SymbolPoint((0, 1))) == 1
    assert evaluate(sft_u, shift2, SymbolPoint((0,))) == 3
    assert evaluate(sft_u, shift2, SymbolPoint((0,), (1, 1))) == 3


def test_closed_form_exact_values(circle2):
    u = ClosedForm.parse("-cos2pi(x)")
    assert evaluate(u, circle2, CirclePoint(0)) == -1
    assert evaluate(u, circle2, CirclePoint(Fraction(1, 3))) == Fraction(1, 2)
    assert evaluate(ClosedForm.parse("x/2 + 1/4"), circle2, CirclePoint(Fraction(1, 2))) == Fraction(1, 2)


def test_closed_form_float_fallback(circle2):
    value = evaluate(ClosedForm.parse("cos2pi(x)"), circle2, CirclePoint(Fraction(1, 5)))
    assert isinstance(value, float)
    assert value == pytest.approx(0.30901699437494745)


def test_distance_to_orbit(circle2):
    h = DistToOrbitPow((CirclePoint(0),))
    assert evaluate(h, circle2, CirclePoint(Fraction(1, 3))) == Fraction(1, 3)
    assert evaluate(h, circle2, CirclePoint(Fraction(3, 4))) == Fraction(1, 4)


def test_distance_to_orbit_vanishes_exactly_on_orbit(circle2):
    orbit = (CirclePoint(Fraction(1, 3)), CirclePoint(Fraction(2, 3)))
    h = DistToOrbitPow(orbit, epsilon=Fraction(1, 10))
    for other in enumerate_orbits(circle2, 5):
        for p in other.points:
            v = evaluate(h, circle2, p)
            assert (v == 0) == (p in orbit)


def test_sum_and_scale_are_linear(shift2, sft_u, one):
    combo = Sum((sft_u, Scale(Fraction(-2), one)))
    assert evaluate(combo, shift2, SymbolPoint((0, 1))) == -1
    assert evaluate(combo, shift2, SymbolPoint((1,))) == 1


def test_kind_mismatch(shift2):
    with pytest.raises(KindMismatchError):
        evaluate(ClosedForm.parse("cos2pi(x)"), shift2, SymbolPoint((0,)))


# =============================================================================
# BIRKHOFF AVERAGES
# =============================================================================

def test_birkhoff_identity_at_one(shift2, sft_u):
    assert birkhoff_average_k(sft_u, shift2, 1) is sft_u


def test_birkhoff_depth_one_table(shift2):
    u = LocallyConstant.from_table({"0": 0, "1": 1})
    u2 = birkhoff_average_k(u, shift2, 2)
    assert u2.mapping == {
        (0, 0): 0, (0, 1): Fraction(1, 2), (1, 0): Fraction(1, 2), (1, 1): 1,
    }


def test_birkhoff_preserves_orbit_sums(shift2, sft_u):
    u3 = birkhoff_average_k(sft_u, shift2, 3)
    for orbit in enumerate_orbits(shift2, 6):
        assert orbit_sum(u3, shift2, orbit) == orbit_sum(sft_u, shift2, orbit)


def test_birkhoff_closed_form_on_circle(circle2):
    u = ClosedForm.parse("x")
    u2 = birkhoff_average_k(u, circle2, 2)
    assert evaluate(u2, circle2, CirclePoint(Fraction(1, 3))) == Fraction(1, 2)
    with pytest.raises(ObservableError):
        birkhoff_average_k(u, circle2, 0)


# =============================================================================
# CERTIFICATES
# =============================================================================

def test_locally_constant_certificate(shift2, sft_u):
    cert = sft_u.certify(shift2, 1)
    assert cert.exact
    assert cert.sup_norm == 3
    assert cert.seminorm == 8


def test_certificates_are_sound(shift2, circle2, sft_u, rng):
    assert audit_certificate(shift2, sft_u, sft_u.certify(shift2, 1), rng, samples=300) == []
    cos = ClosedForm.parse("cos2pi(x)")
    assert audit_certificate(circle2, cos, cos.certify(circle2, 1), rng, samples=300) == []
    dist = DistToOrbitPow((CirclePoint(0),), epsilon=Fraction(1, 10))
    assert audit_certificate(circle2, dist, dist.certify(circle2, 1), rng, samples=300) == []


def test_certificate_half_exponent(circle2, rng):
    cos = ClosedForm.parse("cos2pi(x)")
    cert = cos.certify(circle2, Fraction(1, 2))
    assert audit_certificate(circle2, cos, cert, rng, samples=200) == []


def test_weight_must_be_positive(circle2, shift2, one):
    weight = certify_weight(shift2, one, 1)
    assert weight.psi_min == 1
    with pytest.raises(ObservableError):
        certify_weight(circle2, ClosedForm.parse("x - 1/2"), 1)
    with pytest.raises(ObservableError):
        certify_weight(shift2, LocallyConstant.from_table({"0": 1, "1": 0}), 1)


def test_table_must_match_admissible_words(golden, shift2):
    full = LocallyConstant.from_table({"00": 1, "01": 1, "10": 1, "11": 1})
    with pytest.raises(ObservableError):
        full.check(golden)
    partial = LocallyConstant.from_table({"00": 1, "01": 1, "10": 1})
    partial.check(golden)
    with pytest.raises(ObservableError):
        partial.check(shift2)
    with pytest.raises(InadmissibleWordError):
        partial.lookup((1, 1))


@pytest.mark.parametrize("name", ["circle2", "shift2"])
def test_random_perturbation_within_caps(name, request, rng):
    system = request.getfixturevalue(name)
    for _ in range(10):
        h = random_perturbation(system, rng, Fraction(1, 100), Fraction(1, 10))
        cert = h.certify(system, 1)
        assert cert.sup_norm < Fraction(1, 100)
        assert cert.seminorm < Fraction(1, 10)


def test_random_perturbation_zero_caps(circle2, rng):
    assert is_zero(random_perturbation(circle2, rng, 0, 1))


# =============================================================================
# PARSING
# =============================================================================

def test_observable_from_dict(circle2, shift2):
    assert evaluate(observable_from_dict("cos2pi(x)"), circle2, CirclePoint(0)) == 1
    assert evaluate(observable_from_dict(2), shift2, SymbolPoint((0,))) == 2
    table = observable_from_dict({"type": "locally_constant", "table": {"0": "1/2", "1": 1}})
    assert evaluate(table, shift2, SymbolPoint((0,))) == Fraction(1, 2)
    dist = observable_from_dict({"type": "dist_to_orbit_pow", "orbit": ["0"], "epsilon": "1/10"}, circle2)
    assert evaluate(dist, circle2, CirclePoint(Fraction(1, 2))) == Fraction(1, 20)


def test_observable_round_trip(shift2, sft_u):
    combo = Sum((sft_u, Scale(Fraction(1, 3), zero_observable())))
    restored = observable_from_dict(combo.to_dict(), shift2)
    assert evaluate(restored, shift2, SymbolPoint((0, 1))) == 1


@pytest.mark.parametrize("text", ["x +", "foo(x)", "x / y", "(x"])
def test_bad_expressions(text):
    with pytest.raises(ObservableError):
        ClosedForm.parse(text)


def test_unknown_observable_type():
    with pytest.raises(ObservableError):
        observable_from_dict({"type": "spline"})
