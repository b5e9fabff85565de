"""Pytest file for the density matrix minimizer in dm_solver.py"""
import numpy as np
import pytest
from pytest import raises

from gprotor.dm_solver import (
    DmOptions,
    compare_dm_gp,
    default_j_max,
    dm_state_to_text,
    equality_regime,
    minimize_dm,
    optimal_occupations,
    prop_condition,
    sector_residual,
)
from gprotor.model import ConvergenceError, GpParameters
from gprotor.radial_solver import minimize_vortex
from gprotor.solver2d import Solver2DOptions, minimize_2d


def test_rank_one_without_rotation(harmonic):
    params = GpParameters(10)
    state = minimize_dm(params, harmonic, opts=DmOptions(j_max=3))
    assert state.converged
    assert state.rank == 1
    assert state.occupied() == [0]
    assert state.angular_momentum == pytest.approx(0.0, abs=1e-8)
    vortex = minimize_vortex(0, params, harmonic, state.grid)
    assert state.energy == pytest.approx(vortex.energy, abs=1e-7)
    assert prop_condition(state)


def test_linear_trap(harmonic):
    params = GpParameters(0, 0.5)
    state = minimize_dm(params, harmonic)
    assert state.rank == 1
    assert state.energy == pytest.approx(minimize_vortex(0, params, harmonic, state.grid).energy,
                                         abs=1e-7)
    assert state.energy == pytest.approx(2.0, abs=1e-3)


def test_rotating_state(dm_rotating):
    state = dm_rotating
    assert state.converged
    assert sum(state.occupations) == pytest.approx(1.0)
    assert np.all(state.occupations >= 0)
    assert state.rho.norm() == pytest.approx(1.0)
    for f in state.orbitals:
        assert f.norm() == pytest.approx(1.0)
    mixed = sum(w * f.values**2 for w, f in zip(state.occupations, state.orbitals))
    assert np.allclose(state.rho.values, mixed, rtol=0, atol=1e-12)
    # every accepted mixing step lowers the energy
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(state.energies, state.energies[1:]))
    assert state.energy == pytest.approx(state.energies[-1])
    assert 2 * state.params.a * state.rho.sup() <= state.mu_dm + 1e-6
    for j in state.occupied():
        assert sector_residual(state, j) < 1e-6
        # occupied sectors share the chemical potential
        assert state.sector_energies[state.sectors.index(j)] == pytest.approx(state.mu_dm, abs=1e-6)
    assert state.occupations[-1] < 1e-8


def test_dm_below_vortices(dm_rotating, harmonic):
    state = dm_rotating
    for j in state.sectors[:3]:
        vortex = minimize_vortex(j, state.params, harmonic, state.grid)
        assert state.energy <= vortex.gp_energy + 1e-8


def test_density_is_unique(dm_rotating, harmonic):
    other = minimize_dm(dm_rotating.params, harmonic, dm_rotating.grid, DmOptions(j_max=4),
                        initial_occupations=[0, 0, 1, 0, 0])
    assert other.energy == pytest.approx(dm_rotating.energy, abs=1e-9)
    assert np.max(np.abs(other.rho.values - dm_rotating.rho.values)) < 1e-5


def test_optimal_occupations():
    assert optimal_occupations(np.array([0.0, 1.0]), np.eye(2), 0.0) == pytest.approx(
        [1.0, 0.0], abs=1e-6
    )
    assert optimal_occupations(np.zeros(2), np.eye(2), 1.0) == pytest.approx([0.5, 0.5])
    # lambda_1 + lambda_0**2 + lambda_1**2 is smallest at lambda_1 = 1/4
    assert optimal_occupations(np.array([0.0, 1.0]), np.eye(2), 1.0) == pytest.approx(
        [0.75, 0.25], abs=1e-9
    )
    assert optimal_occupations(np.array([3.0]), np.eye(1), 1.0) == pytest.approx([1.0])


def test_default_j_max(harmonic):
    assert default_j_max(GpParameters(0), harmonic) == 6
    assert default_j_max(GpParameters(100, 1.5), harmonic) > default_j_max(GpParameters(100),
                                                                           harmonic)


def test_equality_regime(harmonic, quartic_trap):
    assert equality_regime(GpParameters(3, 0.5), harmonic)
    assert not equality_regime(GpParameters(10, 0.5), harmonic)
    with raises(ValueError):
        equality_regime(GpParameters(3, 0.5), quartic_trap)


def test_compare_in_equality_regime(harmonic):
    params = GpParameters(3, 0.5)
    state = minimize_dm(params, harmonic)
    assert state.rank == 1
    minimizer = minimize_2d(params, harmonic, opts=Solver2DOptions(points=64, restarts=2))
    comparison = compare_dm_gp(params, harmonic, state=state, minimizer=minimizer)
    assert not comparison.strict_gap
    assert comparison.e_dm == pytest.approx(comparison.e_gp, abs=1e-6)
    assert minimizer.energy == pytest.approx(state.energy, abs=1e-4)


def test_state_text(dm_rotating):
    text = dm_state_to_text(dm_rotating)
    lines = text.splitlines()
    assert lines[0].startswith("# a=10.0 omega=0.5 energy=")
    assert lines[1] == "# j lambda sector_energy"
    assert lines[2].startswith("0 ")
    assert lines[7] == "# r rho f_0 f_1 f_2 f_3 f_4"
    assert len(lines) == 8 + len(dm_rotating.grid.r)


def test_bad_input(harmonic):
    params = GpParameters(10, 0.5)
    with raises(ValueError):
        DmOptions(damping=0)
    with raises(ValueError):
        DmOptions(j_max=-1)
    with raises(ValueError):
        minimize_dm(params, harmonic, sectors=[1, 1])
    with raises(ValueError):
        minimize_dm(params, harmonic, sectors=[0, 1], initial_occupations=[1, 0, 0])
    with raises(ValueError):
        minimize_dm(GpParameters(10, 2.0), harmonic)
    with raises(ConvergenceError):
        minimize_dm(params, harmonic, opts=DmOptions(j_max=4, max_iterations=1))


@pytest.mark.slow
def test_fast_rotation_mixes_sectors(harmonic):
    params = GpParameters(400, 1.0)
    state = minimize_dm(params, harmonic)
    assert state.rank >= 2
    vortices = [minimize_vortex(j, params, harmonic, state.grid).gp_energy
                for j in state.occupied()]
    assert state.energy < min(vortices) - 1e-6


def test_stalled_iteration_is_an_error(harmonic, monkeypatch):
    # without any descent direction the density is still far from self-consistent
    monkeypatch.setattr("gprotor.dm_solver._mixing_step", lambda *args: None)
    with raises(ConvergenceError):
        minimize_dm(GpParameters(10), harmonic, opts=DmOptions(j_max=2))
