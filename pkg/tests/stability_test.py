"""Pytest file for the second variation and stability verdicts in stability.py"""
import numpy as np
import pytest
from lxml import etree
from pytest import raises

from gprotor.model import GpParameters
from gprotor.radial_solver import minimize_vortex
from gprotor.stability import (
    StabilityOptions,
    Verdict,
    analyze_stability,
    certificate_d_mode,
    certificate_large_n,
    certificate_small_a,
    certificate_translation,
    channel_energy,
    channel_operator,
    condmu_holds,
    condomega_holds,
    condv_holds,
    d_mode_components,
    d_mode_expression,
    judge_channels,
    large_n_bound,
    lowest_eigenvalue,
    phase_mode,
    q_form,
    report_to_xml,
    small_a_bound,
    sum_difference_coupling,
    vortex_components,
)


def test_phase_mode_is_a_zero_mode(vortex_two):
    """Q(i phi) vanishes because of the gauge symmetry."""
    f = vortex_two.f.values
    assert abs(q_form({2: 1j * f}, vortex_two)) < 1e-6
    op = channel_operator(vortex_two, 0)
    assert abs(op.quadratic(phase_mode(op, vortex_two))) < 1e-6


def test_second_difference_of_energy(vortex_two):
    """The second variation is half the second derivative of E - mu N around the vortex."""
    w = d_mode_components(vortex_two, 2)
    scale = 1 / np.sqrt(sum(float(np.sum(vortex_two.grid.mass * np.abs(c) ** 2))
                            for c in w.values()))
    w = {k: scale * c for k, c in w.items()}
    base = vortex_components(vortex_two)
    eps = 3e-4

    def shifted(sign):
        components = {k: c.copy() for k, c in base.items()}
        for k, c in w.items():
            components[k] = components.get(k, 0) + sign * eps * c
        return channel_energy(components, vortex_two)

    second = (shifted(1) + shifted(-1) - 2 * channel_energy(base, vortex_two)) / (2 * eps**2)
    assert second == pytest.approx(q_form(w, vortex_two), rel=1e-4, abs=1e-5)


def test_d_mode_certificate(vortex_two):
    value = certificate_d_mode(vortex_two, 2)
    assert value < 0
    assert d_mode_expression(vortex_two, 2) == pytest.approx(value, rel=0.05)
    assert condv_holds(vortex_two.trap, vortex_two.grid, 2)
    assert condmu_holds(vortex_two, 2)
    assert condomega_holds(vortex_two)
    with raises(ValueError):
        certificate_d_mode(vortex_two, 3)
    with raises(ValueError):
        certificate_d_mode(vortex_two, 1)


def test_small_coupling_certificate(vortex_one):
    value = certificate_small_a(vortex_one)
    assert value < 0
    assert value <= small_a_bound(vortex_one) + 1e-3


def test_translation_certificate(harmonic):
    for n in (1, 2):
        profile = minimize_vortex(n, GpParameters(10, 0.5), harmonic)
        assert certificate_translation(profile) >= -1e-6


def test_large_n_certificate(harmonic):
    profile = minimize_vortex(12, GpParameters(100, 0.1), harmonic)
    value = certificate_large_n(profile)
    assert value < 0
    assert value <= large_n_bound(profile) + 1e-6


def test_unstable_vortex_without_rotation(vortex_one):
    report = analyze_stability(vortex_one, opts=StabilityOptions(channels=4))
    assert report.verdict is Verdict.UNSTABLE
    m, value = report.lowest
    assert m == 1
    assert value < 0
    assert len(report.channels) == 5
    assert report.zero_modes and report.zero_modes[0][0] == 0


def test_stable_ground_state(harmonic):
    profile = minimize_vortex(0, GpParameters(10), harmonic)
    report = analyze_stability(profile, opts=StabilityOptions(channels=6))
    assert report.verdict is Verdict.STABLE
    assert all(value > 0 for _, value in report.channels)
    assert "stable" in str(report)


def test_eigensolvers_agree(vortex_two):
    op = channel_operator(vortex_two, 2)
    banded = lowest_eigenvalue(op, eigensolver="banded")
    arpack = lowest_eigenvalue(op, eigensolver="arpack")
    assert arpack == pytest.approx(banded, rel=1e-8, abs=1e-10)


def test_rayleigh_quotient_bounds_channel(vortex_two):
    """No channel vector lies below the lowest eigenvalue."""
    op = channel_operator(vortex_two, 2)
    lowest = lowest_eigenvalue(op)
    w = d_mode_components(vortex_two, 2)
    x = op.join(w[0].real, w[4].real)
    assert op.quadratic(x) / float(x @ (op.mass * x)) >= lowest - 1e-10


def test_sum_difference_coupling(vortex_two):
    op = channel_operator(vortex_two, 3)
    plus, minus, cross = sum_difference_coupling(op)
    x, y, _ = op.coupling()
    assert np.allclose(plus + minus, x + y)
    assert np.allclose(cross, (x - y) / 2)
    r = vortex_two.grid.r
    # the X-Y difference holds only the rotation and centrifugal terms
    assert np.allclose(cross, 3 * 0.5 - 2 * 2 * 3 / r**2)


def test_stationarity_is_required(harmonic):
    profile = minimize_vortex(1, GpParameters(1), harmonic)
    with raises(ValueError):
        q_form({1: profile.f.values.astype(complex)}, profile, tolerance=1e-30)
    with raises(ValueError):
        q_form({1: profile.f.values.astype(complex)}, profile, GpParameters(2.0))
    with raises(ValueError):
        channel_operator(profile, -1)


def test_report_to_xml(vortex_one):
    report = analyze_stability(vortex_one, opts=StabilityOptions(channels=2, certificates=False))
    root = etree.fromstring(report_to_xml(report))
    assert root.tag == "stability"
    assert root.get("verdict") == report.verdict.value
    assert len(root.findall("channel")) == 3
    assert not root.findall("certificate")


def test_verdict_rules():
    tol = 1e-6
    assert judge_channels([(0, 1e-8), (1, 1e-9)], [], tol) is Verdict.MARGINAL
    # one soft channel among stiff ones does not make the vortex marginal
    assert judge_channels([(0, 1e-8), (1, 0.4), (2, 1.3)], [], tol) is Verdict.STABLE
    assert judge_channels([(0, 0.2), (1, 0.4)], [], tol) is Verdict.STABLE
    assert judge_channels([(0, 1e-8), (1, -0.1)], [], tol) is Verdict.UNSTABLE
    assert judge_channels([(0, 0.2)], [("d-mode", -0.5)], tol) is Verdict.UNSTABLE
