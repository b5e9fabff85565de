"""Pytest file for critical frequencies and their bounds in critical.py"""
import io
import math

import pytest
from pytest import raises

from gprotor.critical import (
    CSV_COLUMNS,
    CriticalEntry,
    CriticalFrequencyTable,
    VortexLadder,
    bound_check_general,
    bound_check_harmonic,
    breaking_sufficient,
    centrifugal_bounds,
    critical_frequency,
    critical_table,
    finite_difference_slope,
    frequency_chain_ok,
    omega_derivative,
    omega_scan,
    omega_slope_at_zero,
    small_a_sandwich,
    table_to_csv,
)


def test_critical_frequency_without_interaction(fine_ladder, harmonic):
    for n in range(5):
        assert critical_frequency(n, 0, harmonic, ladder=fine_ladder) == pytest.approx(
            2.0, abs=1e-4
        )


def test_slope_at_zero(fine_ladder, harmonic):
    assert omega_slope_at_zero(0) == pytest.approx(-1 / (4 * math.pi))
    for n in range(3):
        assert omega_derivative(n, 0, harmonic, ladder=fine_ladder) == pytest.approx(
            omega_slope_at_zero(n), rel=1e-3
        )
    slope = finite_difference_slope(0, 0, harmonic, fine_ladder)
    assert slope == pytest.approx(-1 / (4 * math.pi), rel=1e-2)
    with raises(ValueError):
        omega_slope_at_zero(-1)


def test_small_coupling_sandwich(harmonic_ladder, harmonic):
    for n in range(4):
        lower, upper = small_a_sandwich(n, 1.0)
        assert lower <= critical_frequency(n, 1.0, harmonic, ladder=harmonic_ladder) <= upper


def test_harmonic_table(harmonic_ladder, harmonic):
    for a in (1.0, 10.0, 100.0):
        table = critical_table(a, 3, harmonic, harmonic_ladder)
        assert table.violations() == []
        assert frequency_chain_ok(table)
        assert [entry.n for entry in table.entries] == [0, 1, 2, 3]
        for entry in table.entries:
            assert 0 < entry.omega < 2
            assert entry.slope == pytest.approx(
                omega_derivative(entry.n, a, harmonic, ladder=harmonic_ladder)
            )
            assert entry.slope < 0
            assert bound_check_harmonic(entry.n, a, entry.omega).slack >= -1e-8


def test_table_at_zero_coupling(harmonic_ladder, harmonic):
    table = critical_table(0.0, 2, harmonic, harmonic_ladder)
    assert table.violations() == []
    assert all(math.isinf(entry.upper) for entry in table.entries)
    assert table.entries[0].lower == pytest.approx(0.5)


def test_centrifugal_bounds(harmonic_ladder):
    for n in range(3):
        bounds = centrifugal_bounds(n, 10.0, harmonic_ladder)
        assert bounds.omega_lower <= bounds.omega_n + 1e-6
        assert bounds.omega_next <= bounds.omega_next_upper + 1e-6


def test_general_bounds(quartic_trap):
    ladder = VortexLadder(quartic_trap, n_top=3)
    table = critical_table(10.0, 2, quartic_trap, ladder)
    assert table.violations() == []
    check = bound_check_general(1, 10.0, quartic_trap, table)
    assert check.upper_ok and check.lower_ok
    assert check.lower > 0
    with raises(ValueError):
        bound_check_general(1, 0.0, quartic_trap, table)


def test_omega_scan(harmonic, quartic_trap):
    harmonic_scan = omega_scan(harmonic)
    assert harmonic_scan.min() == pytest.approx(1.0)
    assert harmonic_scan.max() < 2.0
    assert omega_scan(quartic_trap).max() == pytest.approx(1e3)


def test_breaking_sufficient():
    energies = {0: 0.0, 1: 0.3, 2: 0.7, 3: 1.2}
    entries = [CriticalEntry(n, energies[n], energies[n + 1] - energies[n]) for n in range(3)]
    table = CriticalFrequencyTable(1.0, entries, energies)
    assert table.omega(1) == pytest.approx(0.4)
    assert breaking_sufficient(0.5, table)
    assert not breaking_sufficient(0.39, table)
    assert not breaking_sufficient(0.45, table, n_big=3)
    with raises(ValueError):
        breaking_sufficient(0.5, table, n_big=6)


def test_table_to_csv(harmonic_ladder, harmonic):
    tables = [critical_table(a, 1, harmonic, harmonic_ladder) for a in (1.0, 0.0)]
    stream = io.StringIO()
    table_to_csv(tables, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    # sorted by coupling, then n
    assert lines[1].startswith("0,0.0,")
    assert lines[3].startswith("0,1.0,")


def test_ladder_cache(harmonic):
    ladder = VortexLadder(harmonic, n_top=2)
    first = ladder.get(1, 2.0)
    assert ladder.get(1, 2.0) is first
    assert len(ladder) == 1
    assert ladder.grid(2.0) is first.grid
    with raises(ValueError):
        critical_table(1.0, -1, harmonic, ladder)
