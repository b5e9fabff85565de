"""Pytest file for the multi-component functional in multicomponent.py"""
import dataclasses
import math

import numpy as np
import pytest
from lxml import etree
from pytest import raises

from gprotor.model import Field2D, GpParameters, Grid2D
from gprotor.multicomponent import (
    MultiState,
    components_from_dm,
    density_separation,
    energy_gradient_multi,
    energy_multi,
    minimize_multi,
    minimize_multi_sectors,
    mix_components,
    trichotomy_to_xml,
    verify_trichotomy,
)
from gprotor.radial_solver import minimize_vortex
from gprotor.solver2d import Solver2DOptions, energy_2d, gaussian_vortex, minimize_2d

QUICK = Solver2DOptions(points=64, restarts=2)


def _pair(plane):
    first = Field2D(gaussian_vortex(0, 1.0, plane) * math.sqrt(0.7), plane)
    second = Field2D(gaussian_vortex(1, 1.3, plane) * math.sqrt(0.3), plane)
    return [first, second]


def test_one_component_is_gross_pitaevskii(harmonic):
    params = GpParameters(3, 0.5)
    grid = Grid2D.for_trap(harmonic, params, 64)
    single = minimize_2d(params, harmonic, grid, QUICK)
    multi = minimize_multi(1, params, harmonic, grid, QUICK)
    assert multi.n_c == 1
    assert multi.energy == pytest.approx(single.energy, abs=1e-9)
    assert multi.total_norm == pytest.approx(1.0)
    assert energy_multi(multi.components, params, harmonic) == pytest.approx(
        energy_2d(multi.components[0], params, harmonic)
    )


def test_energy_gradient(plane, harmonic):
    params = GpParameters(5.0, 0.5)
    components = _pair(plane)
    rng = np.random.default_rng(5)
    envelope = np.exp(-plane.radius**2 / 2)
    w = np.stack([envelope * (rng.standard_normal(envelope.shape) + 1j * rng.standard_normal(
        envelope.shape)) for _ in components])
    gradient = energy_gradient_multi(components, params, harmonic)
    eps = 1e-6

    def shifted(sign):
        return [Field2D(c.values + sign * eps * dw, plane) for c, dw in zip(components, w)]

    difference = (energy_multi(shifted(1), params, harmonic)
                  - energy_multi(shifted(-1), params, harmonic)) / (2 * eps)
    directional = float(np.real(np.vdot(gradient, w))) * plane.cell_area
    assert difference == pytest.approx(directional, rel=1e-6)


def test_mixing_keeps_energy(plane, harmonic):
    params = GpParameters(5.0, 0.5)
    components = _pair(plane)
    state = MultiState(components, energy_multi(components, params, harmonic), params)
    angle = 0.4
    rotation = [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
    mixed = mix_components(state, rotation)
    assert energy_multi(mixed.components, params, harmonic) == pytest.approx(state.energy,
                                                                             rel=1e-10)
    assert np.allclose(mixed.total_density(), state.total_density(), atol=1e-12)
    assert mixed.total_norm == pytest.approx(1.0)
    assert density_separation(mixed) != pytest.approx(density_separation(state))
    with raises(ValueError):
        mix_components(state, [[1, 1], [0, 1]])
    with raises(ValueError):
        mix_components(state, np.eye(3))


def test_sector_components(harmonic):
    params = GpParameters(3, 0.5)
    state = minimize_multi_sectors([0], params, harmonic)
    assert state.sectors == [0]
    radial_grid = state.components[0].grid
    vortex = minimize_vortex(0, params, harmonic, radial_grid)
    assert state.energy == pytest.approx(vortex.energy, abs=1e-7)
    assert density_separation(state) == 0.0
    with raises(ValueError):
        mix_components(state, np.eye(1))


def test_components_from_dm(dm_rotating, plane):
    fields = components_from_dm(dm_rotating, plane)
    assert len(fields) >= dm_rotating.rank
    assert sum(f.norm() for f in fields) == pytest.approx(1.0)
    padded = components_from_dm(dm_rotating, plane, n_c=len(fields) + 1)
    assert padded[-1].norm() == 0.0


def test_trichotomy_in_equality_regime(harmonic):
    params = GpParameters(3, 0.5)
    report = verify_trichotomy(params, harmonic, opts=QUICK, tolerance=1e-4)
    assert report.n_dm == 1
    assert not report.breaking
    assert [row.n_c for row in report.rows] == [1, 2]
    assert report.rows[0].cases == ["i"]
    assert report.ok, report.violations
    for row in report.rows:
        assert row.energy == pytest.approx(report.e_dm, abs=1e-4)
    root = etree.fromstring(trichotomy_to_xml(report))
    assert root.tag == "trichotomy"
    assert root.get("n_dm") == "1"
    assert [node.get("n_c") for node in root.findall("components")] == ["1", "2"]
    assert all(node.get("sector_bound") is not None for node in root.findall("components"))
    for row in report.rows:
        assert row.energy <= row.sector_bound + 1e-4
    assert "n_c=2" in str(report)


def test_bad_input(harmonic, plane):
    params = GpParameters(3, 0.5)
    with raises(ValueError):
        minimize_multi(0, params, harmonic, opts=QUICK)
    with raises(ValueError):
        minimize_multi(3, params, harmonic, plane, QUICK, initial=_pair(plane))
    with raises(ValueError):
        energy_multi([], params, harmonic)


def test_trichotomy_checks_the_plane_minimum(harmonic, monkeypatch):
    """A plane minimizer that misses the minimum must show up, even though restricting the
    components to the DM sectors still reaches E^DM."""

    def too_high(*args, **kwargs):
        state = minimize_multi(*args, **kwargs)
        return dataclasses.replace(state, energy=state.energy + 10.0)

    monkeypatch.setattr("gprotor.multicomponent.minimize_multi", too_high)
    report = verify_trichotomy(GpParameters(3, 0.5), harmonic, opts=QUICK, tolerance=1e-4)
    assert not report.ok
    second = report.rows[1]
    assert second.n_c == 2
    assert second.energy > report.e_dm + 9
    assert second.sector_bound == pytest.approx(report.e_dm, abs=1e-4)
    assert any("E^DM" in v for v in second.violations)
    assert any("sector bound" in v for v in second.violations)


@pytest.mark.slow
def test_trichotomy_when_symmetry_breaks(harmonic):
    params = GpParameters(400, 1.0)
    report = verify_trichotomy(params, harmonic, opts=Solver2DOptions(points=192, restarts=4),
                               tolerance=5e-4, n_c_values=[1, 2])
    assert report.breaking
    assert report.n_dm >= 2
    one, two = report.rows
    assert one.cases == ["ii"]
    assert one.ok, one.violations
    assert one.energy > report.e_dm + 5e-4
    assert "iii" in two.cases
    assert two.energy < report.e_gp - 5e-4
    assert two.separation > 1e-3
    assert two.energy <= one.energy
