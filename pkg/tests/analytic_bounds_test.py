"""Pytest file for the closed-form constants and bound reports in analytic_bounds.py"""
import math

import numpy as np
import pytest
from pytest import raises

from gprotor.analytic_bounds import (
    BoundReport,
    BoundSuite,
    a_omega_bounds,
    a_omega_equality_bound,
    b_n,
    breaking_threshold_met,
    c_n,
    chi_quartic,
    constants_suite,
    d_n,
    energy_upper_bound,
    f_sup_bound,
    mu_tilde_upper_bound,
    n_omega,
    profile_bound_suite,
    quartic_lower_bound,
    render_suite,
    vortex_core_size_bound,
    xi,
    xi_inverse,
)
from gprotor.model import Field2D, GpParameters
from gprotor.radial_solver import minimize_vortex
from gprotor.solver2d import gaussian_vortex


def test_b_n():
    assert b_n(0) == pytest.approx(2 * math.pi)
    assert b_n(1) == pytest.approx(4 * math.pi)
    assert b_n(2) == pytest.approx(2 * math.pi * 16 * 4 / 24)
    assert chi_quartic(0) == pytest.approx(1 / (2 * math.pi))
    with raises(ValueError):
        b_n(-1)


def test_c_n():
    assert c_n(1) == pytest.approx(math.pi / 2)
    assert c_n(2) == pytest.approx(3 * math.pi / 8)
    # both closed forms meet at n = 1
    assert c_n(1 - 1e-7) == pytest.approx(c_n(1 + 1e-7), rel=1e-5)
    assert c_n(0.5) > 0
    with raises(ValueError):
        c_n(0)


def test_energy_bounds():
    for n in range(5):
        assert energy_upper_bound(n, 0) == pytest.approx(2 * (n + 1))
        assert mu_tilde_upper_bound(n, 0) == pytest.approx(2 * n + 2)
    assert energy_upper_bound(1, 100) > energy_upper_bound(1, 10)
    with raises(ValueError):
        energy_upper_bound(1, -1)


def test_d_n():
    for n in (1, 2, 5, 20, 100):
        assert 0 < d_n(n) <= 19 / n
    assert d_n(10) < 1
    assert d_n(100) < 1
    values = [d_n(n) for n in range(1, 31)]
    assert all(x > y for x, y in zip(values, values[1:]))
    with raises(ValueError):
        d_n(0.5)


def test_xi():
    values = [xi(a) for a in (1, 10, 100, 1e3, 1e5)]
    assert all(x > y for x, y in zip(values, values[1:]))
    for a in (50.0, 5e4):
        assert xi_inverse(xi(a)) == pytest.approx(a, rel=1e-8)
    with raises(ValueError):
        xi(0)
    with raises(ValueError):
        xi_inverse(-1)


def test_breaking_thresholds():
    assert n_omega(0.5) == 2
    assert n_omega(1.0) == 2
    assert n_omega(1.5) == pytest.approx(76)
    with raises(ValueError):
        n_omega(2.0)
    lower, upper = a_omega_bounds(0.5)
    assert lower == pytest.approx(1.5 * math.pi)
    assert xi(upper) == pytest.approx(0.5 / 3)
    assert lower < upper
    assert breaking_threshold_met(1.01 * upper, 0.5)
    assert not breaking_threshold_met(lower, 0.5)
    assert a_omega_equality_bound(0.5) == pytest.approx(1.5 * math.pi)
    # the low rotation branch of the lower bound
    assert a_omega_bounds(0.1)[0] == pytest.approx(math.pi * (1 / 0.08 - 2))


def test_bound_report():
    upper = BoundReport("upper", 2.0, 1.0)
    assert upper.slack == 1.0
    assert upper.satisfied
    assert str(upper).endswith("OK")
    lower = BoundReport("lower", 2.0, 1.0, kind="lower")
    assert lower.slack == -1.0
    assert not lower.satisfied
    assert "VIOLATED" in str(lower)
    identity = BoundReport("identity", 1.0, 1.0 + 1e-5, kind="identity", tolerance=1e-4)
    assert identity.satisfied
    bare = BoundReport("constant", 3.0)
    assert bare.slack is None
    assert bare.satisfied
    assert str(bare) == "constant: 3"
    with raises(ValueError):
        BoundReport("sideways", 1.0, kind="sideways")


def test_bound_suite():
    root = BoundSuite("root")
    child = BoundSuite("child", parent=root)
    BoundReport("fine", 2.0, 1.0, parent=root)
    bad = BoundReport("broken", 1.0, 2.0, parent=child)
    assert root.violations() == [bad]
    assert not root.satisfied
    assert child.parent is root
    text = render_suite(root)
    assert "child" in text
    assert "broken: 2 <= 1" in text


def test_constants_suite():
    suite = constants_suite(2, 10, 0.5)
    names = [report.name for report in suite.reports()]
    assert "N_omega" in names
    assert "d_n" in names
    assert suite.satisfied
    suite = constants_suite(0, 0, 0)
    names = [report.name for report in suite.reports()]
    assert "c_n" not in names
    assert "xi(a)" not in names


def test_profile_bound_suite(vortex_two):
    suite = profile_bound_suite(vortex_two)
    assert len(list(suite.reports())) >= 6
    assert suite.satisfied, render_suite(suite)
    observed, lower = vortex_core_size_bound(vortex_two)
    assert observed >= lower


def test_profile_bound_suite_ground_state(harmonic):
    linear = minimize_vortex(0, GpParameters(0), harmonic)
    with raises(ValueError):
        f_sup_bound(linear)
    with raises(ValueError):
        vortex_core_size_bound(linear)
    suite = profile_bound_suite(minimize_vortex(0, GpParameters(10), harmonic))
    assert suite.satisfied, render_suite(suite)


def test_quartic_lower_bound(plane):
    phi = Field2D(gaussian_vortex(0, 1.0, plane), plane)
    lhs, rhs = quartic_lower_bound(phi)
    assert lhs == pytest.approx(1 / (2 * math.pi), rel=1e-6)
    assert rhs == pytest.approx(4 / (9 * math.pi), rel=1e-6)
    flat = Field2D(np.ones((plane.points, plane.points)), plane).normalized()
    lhs, rhs = quartic_lower_bound(flat)
    assert lhs >= rhs
