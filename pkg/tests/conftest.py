"""Fixtures for pytest.

Radial solves are cached in session-scoped vortex ladders, so each profile is computed once."""
import logging

import pytest

from gprotor.critical import VortexLadder
from gprotor.model import GpParameters, Grid2D, TrapPotential
from gprotor.radial_solver import RadialOptions, VortexProfile, minimize_vortex

log = logging.getLogger(__name__)

FINE_STEP = 0.0025


@pytest.fixture(scope="session")
def harmonic() -> TrapPotential:
    """Return the harmonic trap V = r**2"""
    return TrapPotential.harmonic()


@pytest.fixture(scope="session")
def quartic_trap() -> TrapPotential:
    """Return the homogeneous trap V = r**4"""
    return TrapPotential.homogeneous(4)


@pytest.fixture(scope="session")
def harmonic_ladder(harmonic) -> VortexLadder:
    """Return a ladder of harmonic vortices on the default radial step"""
    return VortexLadder(harmonic, n_top=8)


@pytest.fixture(scope="session")
def fine_ladder(harmonic) -> VortexLadder:
    """Return a ladder of harmonic vortices on a fine radial step, for the small-a checks"""
    return VortexLadder(harmonic, RadialOptions(step=FINE_STEP), n_top=6)


@pytest.fixture(scope="session")
def vortex_two(harmonic) -> VortexProfile:
    """Return the harmonic 2-vortex at a=50, omega=0.5"""
    return minimize_vortex(2, GpParameters(50, 0.5), harmonic)


@pytest.fixture(scope="session")
def vortex_one(harmonic) -> VortexProfile:
    """Return the harmonic 1-vortex at a=1, omega=0"""
    return minimize_vortex(1, GpParameters(1), harmonic)


@pytest.fixture(scope="session")
def plane() -> Grid2D:
    """Return a 64 x 64 grid on [-6, 6)**2"""
    return Grid2D(64, 6.0)


@pytest.fixture(scope="session")
def dm_rotating(harmonic):
    """Return the harmonic density matrix minimizer at a=10, omega=0.5 on sectors 0..4"""
    from gprotor.dm_solver import DmOptions, minimize_dm

    return minimize_dm(GpParameters(10.0, 0.5), harmonic, opts=DmOptions(j_max=4))
