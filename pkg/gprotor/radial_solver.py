"""Minimize the energy of an n-vortex f(r) e^{in theta} over normalized radial profiles f.

The functional is
    E_n[f] = 2 pi int (f'**2 + n**2 f**2 / r**2 + V f**2) r dr + 2 pi a int f**4 r dr
under 2 pi int f**2 r dr = 1, discretized on a cell-centred RadialGrid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solveh_banded

from gprotor.constants import (
    CONTINUATION_FACTOR,
    CONTINUATION_THRESHOLD,
    ENERGY_TOLERANCE,
    INITIAL_TIME_STEP,
    MAX_ITERATIONS,
    MAX_TIME_STEP,
    MIN_TIME_STEP,
    RADIAL_MARGIN,
    RADIAL_STEP,
    RESIDUAL_TOLERANCE,
)
from gprotor.model import (
    ConvergenceError,
    GpParameters,
    RadialGrid,
    RadialState,
    TrapPotential,
    trial_energy,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadialOptions:
    """Settings for minimize_vortex.

    Parameters:
        step: radial grid spacing used when no grid is passed in
        margin: V(r_max) >= mu_tilde estimate + margin for automatically sized grids
        energy_tolerance: converged once an accepted step lowers the energy by less than this
        residual_tolerance: ...and the Euler-Lagrange residual is below this
        max_iterations: give up (ConvergenceError) after this many steps
        initial_time_step, max_time_step: bounds of the adaptive gradient-flow step
        continuation_threshold: couplings above this are reached through a sequence of solves
        restarts: extra solves from randomly perturbed starting profiles, as a cross-check
        seed: seed of the restart perturbations
    """

    step: float = RADIAL_STEP
    margin: float = RADIAL_MARGIN
    energy_tolerance: float = ENERGY_TOLERANCE
    residual_tolerance: float = RESIDUAL_TOLERANCE
    max_iterations: int = MAX_ITERATIONS
    initial_time_step: float = INITIAL_TIME_STEP
    max_time_step: float = MAX_TIME_STEP
    continuation_threshold: float = CONTINUATION_THRESHOLD
    restarts: int = 0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class VortexProfile:
    """The minimizing radial profile of an n-vortex.

    Parameters:
        n: angular momentum (real, >= 0)
        params: coupling and angular velocity; omega only enters gp_energy and mu
        trap: the confining potential
        grid: the radial grid the profile lives on
        f: normalized radial profile
        g: f / r**n
        energy: E_n(a)
        mu_tilde: chemical potential mu + n omega = E_n + a int f**4
        residual: Euler-Lagrange residual norm at convergence
        iterations: gradient-flow steps spent
    """

    n: float
    params: GpParameters
    trap: TrapPotential
    grid: RadialGrid
    f: RadialState
    g: RadialState
    energy: float
    mu_tilde: float
    residual: float
    iterations: int

    @property
    def a(self) -> float:
        return self.params.a

    @property
    def gp_energy(self) -> float:
        """E_n - n omega, the rotating-frame energy of the vortex."""
        return self.energy - self.n * self.params.omega

    @property
    def mu(self) -> float:
        return self.mu_tilde - self.n * self.params.omega

    @cached_property
    def quartic(self) -> float:
        """2 pi int f**4 r dr."""
        return float(np.sum(self.grid.mass * self.f.values**4))

    @cached_property
    def g_origin(self) -> float:
        return self.grid.extrapolate_origin(self.g.values)

    def with_omega(self, omega: float) -> VortexProfile:
        """The same profile reported at another angular velocity."""
        return replace(self, params=GpParameters(self.params.a, omega))


def _check_samples(values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise ValueError("Radial profile contains NaN or infinite samples")


def _potential(trap: TrapPotential, grid: RadialGrid) -> np.ndarray:
    return trap(grid.r)


def mean_field_action(f: np.ndarray, n: float, a: float, potential: np.ndarray,
                      grid: RadialGrid) -> np.ndarray:
    """(-Delta + n**2/r**2 + V + 2a f**2) f in the discrete sense (divided by the cell areas)."""
    return grid.apply_kinetic(n**2, f) / grid.mass + (potential + 2 * a * f**2) * f


def _energy(f: np.ndarray, n: float, a: float, potential: np.ndarray, grid: RadialGrid) -> float:
    kinetic = float(f @ grid.apply_kinetic(n**2, f))
    return kinetic + float(np.sum(grid.mass * (potential + a * f**2) * f**2))


def _residual(f: np.ndarray, n: float, a: float, potential: np.ndarray,
              grid: RadialGrid) -> tuple[float, float]:
    """(mu_tilde, ||h f - mu_tilde f||) for a normalized f."""
    action = mean_field_action(f, n, a, potential, grid)
    mu_tilde = float(np.sum(grid.mass * f * action))
    return mu_tilde, math.sqrt(float(np.sum(grid.mass * (action - mu_tilde * f) ** 2)))


def energy_functional(f: RadialState, n: float, params: GpParameters, trap: TrapPotential,
                      grid: RadialGrid | None = None) -> float:
    """E_n[f], exactly the quantity minimize_vortex minimizes."""
    grid = grid or f.grid
    if not grid.compatible(f.grid):
        raise ValueError("Radial state and grid do not match")
    _check_samples(f.values)
    return _energy(f.values, n, params.a, _potential(trap, grid), grid)


def energy_gradient(f: RadialState, n: float, params: GpParameters, trap: TrapPotential,
                    grid: RadialGrid | None = None) -> np.ndarray:
    """The gradient G of E_n with respect to the discrete inner product:
    E_n[f + eps w] = E_n[f] + eps sum(mass G w) + O(eps**2)."""
    grid = grid or f.grid
    _check_samples(f.values)
    return 2 * mean_field_action(f.values, n, params.a, _potential(trap, grid), grid)


def initial_profile(n: float, a: float, trap: TrapPotential, grid: RadialGrid) -> np.ndarray:
    """The normalized trial profile r**n exp(-r**2 / (2 lam**2)) with the best trial scale."""
    _, lam = trial_energy(trap, n, a)
    log_f = n * np.log(grid.r) - grid.r**2 / (2 * lam**2)
    f = np.exp(log_f - np.max(log_f))
    return f / math.sqrt(float(np.sum(grid.mass * f**2)))


def _descend(
    n: float,
    a: float,
    potential: np.ndarray,
    grid: RadialGrid,
    f: np.ndarray,
    opts: RadialOptions,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> tuple[np.ndarray, float, float, int]:
    """Normalized gradient flow with backward Euler steps (M + tau H[f]) f_new = M f.

    A step is only accepted if it does not raise the energy; the step size grows after accepted
    steps and halves after rejected ones."""
    mass = grid.mass
    diag_kinetic, off_kinetic = grid.kinetic_bands(n**2)
    f = f / math.sqrt(float(np.sum(mass * f**2)))
    energy = _energy(f, n, a, potential, grid)
    tau = opts.initial_time_step
    residual = math.inf
    bands = np.zeros((2, grid.size))
    for iteration in range(1, opts.max_iterations + 1):
        bands[0, 1:] = tau * off_kinetic
        bands[1] = mass + tau * (diag_kinetic + mass * (potential + 2 * a * f**2))
        trial = solveh_banded(bands, mass * f)
        trial /= math.sqrt(float(np.sum(mass * trial**2)))
        trial_energy_value = _energy(trial, n, a, potential, grid)
        if trial_energy_value > energy + 1e-13 * max(1.0, abs(energy)):
            tau /= 2
            if tau < MIN_TIME_STEP:
                break
            continue
        drop = energy - trial_energy_value
        f, energy = trial, trial_energy_value
        tau = min(tau * 2, opts.max_time_step)
        _, residual = _residual(f, n, a, potential, grid)
        if callback is not None:
            callback(iteration, energy, residual)
        log.debug("n=%g a=%g step %d: E=%.14g residual=%.3e tau=%.3g",
                  n, a, iteration, energy, residual, tau)
        if drop < opts.energy_tolerance and residual < opts.residual_tolerance:
            return f, energy, residual, iteration
    log.error("Radial solve for n=%g a=%g stopped with residual %.3e", n, a, residual)
    raise ConvergenceError(f"Radial minimization for n={n:g}, a={a:g} did not converge",
                           residual, iteration)


def _continuation_path(a: float, opts: RadialOptions) -> list[float]:
    path = []
    current = opts.continuation_threshold
    while current < a:
        path.append(current)
        current *= CONTINUATION_FACTOR
    path.append(a)
    return path


def _make_profile(n, params, trap, grid, f, energy, residual, iterations) -> VortexProfile:
    g = f / grid.r**n
    quartic = float(np.sum(grid.mass * f**4))
    return VortexProfile(
        n=n,
        params=params,
        trap=trap,
        grid=grid,
        f=RadialState(f, grid),
        g=RadialState(g, grid),
        energy=energy,
        mu_tilde=energy + params.a * quartic,
        residual=residual,
        iterations=iterations,
    )


def minimize_vortex(
    n: float,
    params: GpParameters,
    trap: TrapPotential,
    grid: RadialGrid | None = None,
    opts: RadialOptions | None = None,
    initial: RadialState | None = None,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> VortexProfile:
    """Find the minimizing profile of the n-vortex functional.

    Parameters:
        n: angular momentum, any real n >= 0
        params: coupling and angular velocity (omega must lie below the trap's omega_c)
        trap: the confining potential
        grid: radial grid; sized from the trap and a trial energy when omitted
        opts: solver settings
        initial: starting profile; the optimal Gaussian trial profile when omitted
        callback: called as callback(iteration, energy, residual) after every accepted step
    """
    opts = opts or RadialOptions()
    if not n >= 0:
        raise ValueError(f"Vortex angular momentum must be non-negative, got {n}")
    params.validate(trap)
    if grid is None:
        estimate, _ = trial_energy(trap, n, params.a)
        grid = RadialGrid.for_trap(trap, 2 * estimate, opts.step, opts.margin)
    potential = _potential(trap, grid)
    a = params.a

    if initial is not None:
        if not initial.grid.compatible(grid):
            raise ValueError("Initial profile lives on a different grid")
        start = np.array(initial.values)
        path = [a]
    else:
        path = _continuation_path(a, opts) if a > opts.continuation_threshold else [a]
        start = initial_profile(n, path[0], trap, grid)

    iterations = 0
    for coupling in path:
        f, energy, residual, spent = _descend(n, coupling, potential, grid, start, opts, callback)
        iterations += spent
        start = f
        if coupling != a:
            log.debug("Continuation n=%g reached a=%g with E=%.12g", n, coupling, energy)

    if opts.restarts:
        rng = np.random.default_rng(opts.seed)
        energies = [energy]
        for _ in range(opts.restarts):
            perturbed = f * (1 + 0.5 * rng.random(grid.size))
            other, other_energy, other_residual, spent = _descend(
                n, a, potential, grid, perturbed, opts
            )
            energies.append(other_energy)
            if other_energy < energy:
                f, energy, residual = other, other_energy, other_residual
        spread = max(energies) - min(energies)
        if spread > 1e-8 * max(1.0, abs(energy)):
            log.warning("Restarts for n=%g a=%g disagree by %.3e", n, a, spread)

    log.info("Vortex n=%g a=%g: E=%.12g after %d steps", n, a, energy, iterations)
    return _make_profile(n, params, trap, grid, f, energy, residual, iterations)


def chemical_potential(p: VortexProfile, tolerance: float = 1e-6) -> float:
    """mu_tilde = E_n + a int f**4, cross-checked against the Euler-Lagrange equation."""
    potential = _potential(p.trap, p.grid)
    rayleigh, residual = _residual(p.f.values, p.n, p.params.a, potential, p.grid)
    mu_tilde = p.energy + p.params.a * p.quartic
    if residual > tolerance or abs(rayleigh - mu_tilde) > tolerance * max(1.0, abs(mu_tilde)):
        log.warning(
            "Profile n=%g a=%g is not stationary: residual %.3e, mu_tilde %.12g vs %.12g",
            p.n, p.params.a, residual, mu_tilde, rayleigh,
        )
    return mu_tilde


def stationarity_residual(p: VortexProfile) -> float:
    """||(-Delta + n**2/r**2 + V + 2a f**2 - mu_tilde) f|| for the stored profile."""
    _, residual = _residual(p.f.values, p.n, p.params.a, _potential(p.trap, p.grid), p.grid)
    return residual


def virial_check(p: VortexProfile) -> float:
    """|2 pi int f**2 r**3 dr - E_n/2|, which vanishes for minimizers in the harmonic trap."""
    if not p.trap.is_harmonic:
        raise ValueError(f"The virial identity holds for the harmonic trap only, not {p.trap}")
    second_moment = float(np.sum(p.grid.mass * p.grid.r**2 * p.f.values**2))
    return abs(second_moment - p.energy / 2)


def g_is_monotone(p: VortexProfile, tolerance: float = 1e-8) -> bool:
    """Whether g = f / r**n is non-increasing along the grid."""
    return bool(np.max(np.diff(p.g.values)) <= tolerance)


def profile_to_text(p: VortexProfile) -> str:
    """Columnar text: a header line with the scalar data, then r, f(r), g(r) per line."""
    header = (
        f"# n={p.n!r} a={p.params.a!r} omega={p.params.omega!r} energy={p.energy!r} "
        f"mu_tilde={p.mu_tilde!r} step={p.grid.step!r} size={p.grid.size} "
        f"residual={p.residual!r} iterations={p.iterations}"
    )
    lines = [header, "# r f g"]
    for r, f, g in zip(p.grid.r, p.f.values, p.g.values):
        lines.append(f"{r:.17e} {f:.17e} {g:.17e}")
    return "\n".join(lines) + "\n"


def profile_from_text(text: str, trap: TrapPotential) -> VortexProfile:
    """Read back the output of profile_to_text."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("Profile text must start with a header line")
    fields = dict(item.split("=", 1) for item in lines[0][1:].split())
    grid = RadialGrid(float(fields["step"]), int(fields["size"]))
    data = np.loadtxt([line for line in lines if not line.startswith("#")], ndmin=2)
    if data.shape != (grid.size, 3):
        raise ValueError(f"Profile text has {data.shape} values, expected {(grid.size, 3)}")
    n = float(fields["n"])
    params = GpParameters(float(fields["a"]), float(fields["omega"]))
    return VortexProfile(
        n=n,
        params=params,
        trap=trap,
        grid=grid,
        f=RadialState(data[:, 1], grid),
        g=RadialState(data[:, 2], grid),
        energy=float(fields["energy"]),
        mu_tilde=float(fields["mu_tilde"]),
        residual=float(fields["residual"]),
        iterations=int(fields["iterations"]),
    )
