"""
Enumeration Tests
=================
Periodic orbit listings, orbit functionals, brute force beta and entropy caps.
"""

from fractions import Fraction

import pytest

from permin.errors import EnumerationCapError, ValidationError
from permin.modules.dynamics import CirclePoint, SymbolPoint, SystemDescriptor
from permin.modules.enumeration import (
    beta_bruteforce,
    bq_decay_scan,
    deviation,
    enumerate_orbits,
    enumeration_cap,
    gap,
    cycle_length_bound,
    necklace_count,
    orbit_from_word,
    orbit_of,
    orbit_ratio_average,
    sft_entropy,
    shortest_cycle_length,
)
from permin.modules.observables import ClosedForm, LocallyConstant


def labels(orbits):
    return [o.label() for o in orbits]


# =============================================================================
# ORBIT LISTINGS
# =============================================================================

def test_circle_orbits_up_to_three(circle2):
    assert labels(enumerate_orbits(circle2, 3)) == [
        "{0}", "{1/3, 2/3}", "{1/7, 2/7, 4/7}", "{3/7, 6/7, 5/7}",
    ]


def test_full_shift_orbits_up_to_three(shift2):
    assert labels(enumerate_orbits(shift2, 3)) == ["(0)", "(1)", "(01)", "(001)", "(011)"]


def test_golden_mean_orbits(golden):
    assert labels(enumerate_orbits(golden, 2)) == ["(0)", "(01)"]
    assert len(enumerate_orbits(golden, 3)) == 3


@pytest.mark.parametrize("m,N", [(2, 8), (3, 6), (4, 4)])
def test_full_shift_matches_necklace_count(m, N):
    system = SystemDescriptor.full_shift(m)
    orbits = enumerate_orbits(system, N)
    assert len(orbits) == necklace_count(m, N)
    assert len({o.representative for o in orbits}) == len(orbits)


def test_circle_count_matches_doubling_formula(circle2):
    # x -> 2x has 2^n - 1 points of period dividing n, same as primitive necklaces minus (1)
    assert len(enumerate_orbits(circle2, 8)) == necklace_count(2, 8) - 1


def test_torus_orbits_are_periodic(cat):
    orbits = enumerate_orbits(cat, 3)
    assert orbits[0].label() == "{(0, 0)}"
    for orbit in orbits:
        assert orbit_of(cat, orbit.representative) == orbit


def test_orbit_of_is_canonical(shift2, circle2):
    assert orbit_of(shift2, SymbolPoint((1, 0, 0))) == orbit_from_word(shift2, (0, 0, 1))
    assert orbit_of(circle2, CirclePoint(Fraction(4, 7))).representative == CirclePoint(Fraction(1, 7))
    with pytest.raises(ValidationError):
        orbit_of(shift2, SymbolPoint((0,), (1,)))


def test_enumeration_cap(shift2, monkeypatch):
    assert enumeration_cap(shift2) == 20
    with pytest.raises(EnumerationCapError):
        enumerate_orbits(shift2, 21)
    monkeypatch.setenv("PERMIN_ENUM_BUDGET", str(2 ** 10))
    assert enumeration_cap(shift2) == 10
    with pytest.raises(EnumerationCapError):
        enumerate_orbits(shift2, 11)


def test_enumeration_rejects_nonpositive_bound(shift2):
    with pytest.raises(ValidationError):
        enumerate_orbits(shift2, 0)


# =============================================================================
# ORBIT FUNCTIONALS
# =============================================================================

def test_ratio_average_example(circle2):
    orbit = orbit_of(circle2, CirclePoint(Fraction(1, 3)))
    u = ClosedForm.parse("x")
    psi = ClosedForm.parse("1 + x")
    assert orbit_ratio_average(u, psi, orbit, circle2) == Fraction(1, 3)


def test_gap_examples(circle2, shift2):
    assert gap(circle2, orbit_of(circle2, CirclePoint(0))) == Fraction(1, 4)
    assert gap(circle2, orbit_of(circle2, CirclePoint(Fraction(1, 7)))) == Fraction(1, 7)
    assert gap(shift2, orbit_from_word(shift2, (0, 1))) == Fraction(1, 2)
    assert gap(shift2, orbit_from_word(shift2, (0, 0, 0, 1))) == Fraction(1, 4)


def test_deviation_examples(circle2, shift2):
    Z = [CirclePoint(0)]
    assert deviation(circle2, orbit_of(circle2, CirclePoint(Fraction(1, 3))), Z) == Fraction(2, 3)
    assert deviation(circle2, orbit_of(circle2, CirclePoint(0)), Z) == 0
    Z01 = list(orbit_from_word(shift2, (0, 1)).points)
    assert deviation(shift2, orbit_from_word(shift2, (0, 0, 1)), Z01) == Fraction(7, 8)
    with pytest.raises(ValidationError):
        deviation(shift2, orbit_from_word(shift2, (0,)), [])


# =============================================================================
# BRUTE FORCE BETA
# =============================================================================

def test_beta_on_locally_constant_example(shift2, sft_u, one):
    result = beta_bruteforce(sft_u, one, shift2, 8)
    assert result.value == 1
    assert labels(result.argmin) == ["(01)"]


def test_beta_with_nonconstant_weight(shift2, sft_u):
    psi = LocallyConstant.from_table({"0": 1, "1": 2})
    result = beta_bruteforce(sft_u, psi, shift2, 8)
    assert result.value == Fraction(2, 3)
    assert labels(result.argmin) == ["(01)"]


def test_beta_on_circle(circle2, one):
    result = beta_bruteforce(ClosedForm.parse("-cos2pi(x)"), one, circle2, 10)
    assert result.value == -1
    assert labels(result.argmin) == ["{0}"]


def test_beta_reports_every_tie(shift2, one):
    result = beta_bruteforce(LocallyConstant.from_table({"0": 1, "1": 1}), one, shift2, 3)
    assert result.value == 1
    assert len(result.argmin) == result.orbits_checked == 5


def test_beta_is_nonincreasing_in_N(circle2, one):
    u = ClosedForm.parse("cos2pi(x) + sin2pi(2*x)/2")
    values = [beta_bruteforce(u, one, circle2, N).value for N in range(1, 9)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


# =============================================================================
# ENTROPY
# =============================================================================

def test_entropy_examples(shift2, golden):
    assert sft_entropy(shift2) == pytest.approx(0.6931471805599453, abs=1e-8)
    assert sft_entropy(golden) == pytest.approx(0.48121182505960347, abs=1e-8)
    assert sft_entropy(SystemDescriptor.sft([[0, 1], [1, 0]])) == 0.0


def test_shortest_cycle_within_bound(rng):
    checked = 0
    while checked < 50:
        m = int(rng.integers(2, 7))
        matrix = rng.integers(0, 2, size=(m, m)).tolist()
        try:
            system = SystemDescriptor.sft(matrix)
        except ValidationError:
            continue
        checked += 1
        assert shortest_cycle_length(system) <= cycle_length_bound(system) + 1e-6


# =============================================================================
# DECAY SCAN
# =============================================================================

def test_bq_decay_scan_on_period_two(shift2):
    Z = list(orbit_from_word(shift2, (0, 1)).points)
    rows = bq_decay_scan(shift2, Z, k=2, n_values=range(2, 13))
    assert rows[0]["n"] == 2 and rows[0]["a_n"] == 2
    assert rows[1]["n"] == 3 and rows[1]["a_n"] == Fraction(9, 2)
    assert [r["n"] for r in rows] == list(range(2, 13))
    assert min(r["a_n"] for r in rows) < rows[1]["a_n"]
