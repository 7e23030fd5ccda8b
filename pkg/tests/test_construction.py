"""
Construction Tests
==================
Seeding, feasibility escalation and the split-and-shadow loop.
"""

from fractions import Fraction

import pytest

from permin.errors import ConstructionError, SeedTooSmallError, ValidationError
from permin.modules.construction import (
    bq_seed,
    closest_return,
    construct_good_orbit,
    escalate,
    feasibility,
    growth_constant,
    orbit_quality,
    split_segment,
)
from permin.modules.dynamics import CirclePoint, SymbolPoint
from permin.modules.enumeration import orbit_from_word, orbit_of

SEED_WORD = (0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 1)


@pytest.fixture
def Z01(shift2):
    return list(orbit_from_word(shift2, (0, 1)).points)


# =============================================================================
# ORBIT QUALITY
# =============================================================================

def test_orbit_quality(circle2):
    Z = [CirclePoint(0)]
    D, dev, ratio = orbit_quality(circle2, orbit_of(circle2, CirclePoint(Fraction(1, 7))), Z)
    assert (D, dev, ratio) == (Fraction(1, 7), Fraction(6, 7), Fraction(1, 6))
    assert orbit_quality(circle2, orbit_of(circle2, CirclePoint(0)), Z)[2] == float("inf")


def test_growth_constant(circle2, shift2):
    assert growth_constant(circle2) == 16
    assert growth_constant(shift2) == 8


# =============================================================================
# SEEDING
# =============================================================================

def test_seed_reproduces_periodic_reference(circle2, shift2, Z01):
    seed = bq_seed(shift2, Z01, 4)
    assert seed.orbit.label() == "(01)"
    assert seed.deviation == 0
    seed = bq_seed(circle2, [CirclePoint(0)], 4)
    assert seed.orbit.label() == "{0}"
    assert seed.cycle_length == 1


def test_seed_on_circle_period_two(circle2):
    Z = [CirclePoint(Fraction(1, 3)), CirclePoint(Fraction(2, 3))]
    seed = bq_seed(circle2, Z, 4)
    assert seed.orbit.label() == "{1/3, 2/3}"
    assert seed.deviation <= seed.deviation_bound
    assert seed.cycle_bound_ok


def test_seed_on_heteroclinic_reference(shift2):
    Z = [SymbolPoint((1,), (0, 0)), SymbolPoint((0,))]
    seed = bq_seed(shift2, Z, 3)
    assert seed.deviation <= seed.deviation_bound
    assert seed.cycle_bound_ok
    assert seed.words == 4


def test_seed_rejects_bad_input(shift2, Z01):
    with pytest.raises(ValidationError):
        bq_seed(shift2, Z01, 1)
    with pytest.raises(ValidationError):
        bq_seed(shift2, [], 4)


# =============================================================================
# FEASIBILITY
# =============================================================================

def test_feasibility_fails_at_defaults(shift2):
    check = feasibility(shift2, 1, Fraction(100), 10, 3)
    assert not check.ok
    assert check.L_tilde_1 == 801


def test_escalation_reaches_a_passing_pair(shift2):
    check = escalate(shift2, 1, Fraction(100), 10, 3)
    assert check.ok
    assert (check.n, check.k) == (320, 11)


# =============================================================================
# SPLITTING
# =============================================================================

def test_closest_return_and_split(shift2):
    orbit = orbit_from_word(shift2, SEED_WORD)
    index, lag, closeness = closest_return(shift2, orbit)
    assert (index, lag, closeness) == (10, 2, Fraction(1, 512))
    assert split_segment(orbit, index, lag) == [orbit.points[10], orbit.points[0]]


def test_split_takes_the_shorter_piece(circle2):
    orbit = orbit_of(circle2, CirclePoint(Fraction(1, 7)))
    assert split_segment(orbit, 0, 2) == [orbit.points[2]]


def test_construct_on_shift(shift2, Z01):
    """Test 1: one split turns the long seed into (01)."""
    seed = orbit_from_word(shift2, SEED_WORD)
    trace = construct_good_orbit(shift2, Z01, L_hat=Fraction(100), seed_orbit=seed, strict=False)
    assert trace.accepted
    assert trace.final.label() == "(01)"
    assert trace.achieved_ratio == float("inf")
    assert len(trace.stages) == 2 <= trace.stage_bound
    stage = trace.stages[1]
    assert stage.closeness == Fraction(1, 512)
    assert stage.lag == 2
    assert stage.growth_ok


def test_construct_on_circle(circle2):
    """Test 2: the period three seed splits onto the fixed point."""
    seed = orbit_of(circle2, CirclePoint(Fraction(1, 7)))
    trace = construct_good_orbit(circle2, [CirclePoint(0)], seed_orbit=seed, strict=False)
    assert trace.final.label() == "{0}"
    assert len(trace.stages) == 2
    assert trace.stages[1].closeness == Fraction(1, 7)
    assert trace.stages[1].lag == 1


def test_seed_inside_reference_is_accepted_at_once(circle2):
    trace = construct_good_orbit(circle2, [CirclePoint(0)], seed_orbit=orbit_of(circle2, CirclePoint(0)))
    assert trace.accepted
    assert len(trace.stages) == 1
    assert trace.precheck is None


@pytest.mark.parametrize("L_hat", [Fraction(10), Fraction(100), Fraction(1000)])
def test_default_seeding_meets_ratio(circle2, shift2, Z01, L_hat):
    for system, Z in ((circle2, [CirclePoint(0)]), (shift2, Z01)):
        trace = construct_good_orbit(system, Z, L_hat=L_hat)
        assert trace.accepted
        assert orbit_quality(system, trace.final, Z)[2] == float("inf")


def test_fixed_point_without_ratio_is_an_error(shift2, Z01):
    with pytest.raises(ConstructionError):
        construct_good_orbit(shift2, Z01, seed_orbit=orbit_from_word(shift2, (0, 0, 1, 1)), strict=False)


def test_strict_mode_rejects_a_poor_seed(shift2, Z01):
    with pytest.raises(SeedTooSmallError) as info:
        construct_good_orbit(shift2, Z01, seed_orbit=orbit_from_word(shift2, (0, 0, 1, 1)), strict=True)
    assert info.value.fields["n"] == 320


def test_construct_rejects_bad_parameters(shift2, Z01):
    with pytest.raises(ValidationError):
        construct_good_orbit(shift2, Z01, L_hat=0)
    with pytest.raises(ValidationError):
        construct_good_orbit(shift2, [])
