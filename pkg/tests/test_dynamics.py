"""
Dynamics Tests
==============
Exact maps, metrics and pseudo-orbit validation on every system kind.
"""

from fractions import Fraction

import pytest

from permin.errors import InadmissibleWordError, KindMismatchError, PseudoOrbitError, ValidationError
from permin.modules.dynamics import (
    CirclePoint,
    SymbolPoint,
    SystemDescriptor,
    TorusPoint,
    apply,
    distance,
    eventual_cycle,
    itinerary,
    iterate,
    random_point,
    truncated_distance,
    validate_pseudo_orbit,
)
from permin.modules.enumeration import enumerate_orbits


# =============================================================================
# MAPS
# =============================================================================

def test_circle_apply(circle2):
    assert apply(circle2, CirclePoint(Fraction(1, 3))) == CirclePoint(Fraction(2, 3))
    assert apply(circle2, CirclePoint(Fraction(3, 4))) == CirclePoint(Fraction(1, 2))


def test_shift_apply(shift2):
    assert apply(shift2, SymbolPoint((0, 1, 1))) == SymbolPoint((1, 1, 0))
    assert apply(shift2, SymbolPoint((1,), (0,))) == SymbolPoint((1,))


def test_torus_apply(cat):
    image = apply(cat, TorusPoint(Fraction(1, 5), Fraction(2, 5)))
    assert image == TorusPoint(Fraction(4, 5), Fraction(3, 5))


def test_iterate_matches_repeated_apply(circle2, cat):
    x = CirclePoint(Fraction(5, 13))
    y = x
    for _ in range(6):
        y = apply(circle2, y)
    assert iterate(circle2, x, 6) == y

    p = TorusPoint(Fraction(1, 7), Fraction(3, 7))
    assert iterate(cat, p, 2) == apply(cat, apply(cat, p))


def test_apply_permutes_periodic_points(circle2, shift2):
    for system in (circle2, shift2):
        for orbit in enumerate_orbits(system, 6):
            points = set(orbit.points)
            assert {apply(system, p) for p in points} == points


def test_symbol_point_is_canonical():
    assert SymbolPoint((0, 1, 0, 1)) == SymbolPoint((0, 1))
    # 0.(10)^inf is the same sequence as (01)^inf
    assert SymbolPoint((1, 0), (0,)) == SymbolPoint((0, 1))
    assert SymbolPoint((1,), (0, 1)).prefix == (0,)


def test_kind_mismatch(circle2, shift2):
    with pytest.raises(KindMismatchError):
        apply(circle2, SymbolPoint((0,)))
    with pytest.raises(KindMismatchError):
        distance(shift2, CirclePoint(0), CirclePoint(Fraction(1, 2)))


def test_inadmissible_word(golden):
    with pytest.raises(InadmissibleWordError):
        apply(golden, SymbolPoint((1,)))
    with pytest.raises(InadmissibleWordError):
        apply(golden, SymbolPoint((0,), (1, 1)))
    assert apply(golden, SymbolPoint((0, 1))) == SymbolPoint((1, 0))


def test_invalid_descriptors():
    with pytest.raises(ValidationError):
        SystemDescriptor.circle(1)
    with pytest.raises(ValidationError):
        SystemDescriptor.torus_cat([[1, 1], [0, 1]])
    with pytest.raises(ValidationError):
        SystemDescriptor.sft([[1, 0], [1, 0]])
    with pytest.raises(ValidationError):
        SystemDescriptor.from_dict({"kind": "baker"})


def test_descriptor_round_trip(circle2, golden):
    assert SystemDescriptor.from_dict(circle2.to_dict()) == circle2
    assert SystemDescriptor.from_dict(golden.to_dict()) == golden


# =============================================================================
# METRICS
# =============================================================================

def test_distance_examples(circle2, shift2, cat):
    assert distance(circle2, CirclePoint(Fraction(1, 10)), CirclePoint(Fraction(9, 10))) == Fraction(1, 5)
    assert distance(shift2, SymbolPoint((0,)), SymbolPoint((0, 1))) == Fraction(1, 2)
    assert distance(shift2, SymbolPoint((0, 1)), SymbolPoint((1, 0))) == 1
    assert distance(shift2, SymbolPoint((0, 1)), SymbolPoint((0, 1))) == 0
    p, q = TorusPoint(Fraction(1, 10), Fraction(1, 2)), TorusPoint(Fraction(9, 10), Fraction(1, 4))
    assert distance(cat, p, q) == Fraction(1, 4)


def test_truncated_distance_caps_at_delta(circle2):
    far = truncated_distance(circle2, CirclePoint(0), CirclePoint(Fraction(1, 2)))
    assert far == circle2.asp.delta == Fraction(1, 4)
    near = truncated_distance(circle2, CirclePoint(0), CirclePoint(Fraction(1, 100)))
    assert near == Fraction(1, 100)


@pytest.mark.parametrize("name", ["circle2", "shift2", "golden", "cat"])
def test_metric_axioms(name, request, rng):
    system = request.getfixturevalue(name)
    for _ in range(60):
        x, y, z = (random_point(system, rng, size=6) for _ in range(3))
        dxy = distance(system, x, y)
        assert dxy == distance(system, y, x)
        assert distance(system, x, x) == 0
        assert dxy <= distance(system, x, z) + distance(system, z, y)
        assert (dxy == 0) == (x == y)


def test_itinerary_and_eventual_cycle(circle2, shift2):
    assert itinerary(circle2, CirclePoint(Fraction(1, 3)), 4) == (0, 1, 0, 1)
    assert itinerary(shift2, SymbolPoint((0,), (1, 1)), 4) == (1, 1, 0, 0)
    assert eventual_cycle(circle2, CirclePoint(Fraction(1, 4))) == (2, CirclePoint(0))
    assert eventual_cycle(shift2, SymbolPoint((0,), (1, 1))) == (2, SymbolPoint((0,)))


# =============================================================================
# PSEUDO-ORBITS
# =============================================================================

def test_true_orbit_is_zero_pseudo_orbit(circle2):
    points = [CirclePoint(Fraction(1, 7)), CirclePoint(Fraction(2, 7)), CirclePoint(Fraction(4, 7))]
    pseudo = validate_pseudo_orbit(circle2, points, 0)
    assert pseudo.max_jump == 0
    assert pseudo.period == 3


def test_pseudo_orbit_jumps(circle2):
    points = [CirclePoint(Fraction(1, 3)), CirclePoint(Fraction(203, 300))]
    pseudo = validate_pseudo_orbit(circle2, points, Fraction(1, 50))
    assert pseudo.jumps == (Fraction(1, 100), Fraction(1, 50))


def test_pseudo_orbit_reports_first_bad_jump(circle2):
    points = [CirclePoint(Fraction(1, 3)), CirclePoint(Fraction(203, 300))]
    with pytest.raises(PseudoOrbitError) as info:
        validate_pseudo_orbit(circle2, points, Fraction(1, 100))
    assert info.value.fields["index"] == 1
    with pytest.raises(PseudoOrbitError) as info:
        validate_pseudo_orbit(circle2, points, Fraction(1, 200))
    assert info.value.fields["index"] == 0


def test_empty_pseudo_orbit_rejected(circle2):
    with pytest.raises(ValidationError):
        validate_pseudo_orbit(circle2, [], 0)
