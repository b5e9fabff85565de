"""Minimize the density matrix functional
    E^DM[gamma] = Tr[(-Delta + V - omega L) gamma] + a int rho_gamma**2,  gamma >= 0, Tr gamma = 1.

The minimizer commutes with rotations, so it is sum_j lambda_j |f_j e^{ij theta}><f_j e^{ij theta}|
with one radial orbital per angular momentum sector j >= 0. It is found by a damped
self-consistent iteration: the sector ground states of H_0 + 2a rho give the orbitals, a small
convex problem on the simplex gives the occupations, and the density is mixed with the previous
one as long as the energy goes down.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from gprotor.analytic_bounds import a_omega_equality_bound
from gprotor.constants import (
    DM_DAMPING,
    DM_MAX_ITERATIONS,
    DM_STALL_FACTOR,
    DM_TOLERANCE,
    MIRROR_MAX_ITERATIONS,
    MIRROR_TOLERANCE,
    RADIAL_MARGIN,
    RADIAL_STEP,
    RANK_TOLERANCE,
    SECTOR_PADDING,
    SECTOR_WINDOW,
)
from gprotor.model import (
    ConvergenceError,
    GpParameters,
    RadialGrid,
    RadialState,
    TrapPotential,
    trial_energy,
)
from gprotor.radial_solver import initial_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DmOptions:
    """Settings for minimize_dm.

    Parameters:
        j_max: highest angular momentum sector; 0 picks it from trial vortex energies
        tolerance: converged once the density changes by less than this (sup norm)
        max_iterations: self-consistent steps before ConvergenceError
        damping: initial mixing weight theta of the new density
        mirror_tolerance, mirror_max_iterations: occupation sub-problem settings
        rank_tolerance: occupations above this count towards the rank
        step, margin: radial grid settings used when no grid is passed in
        jobs: worker threads for the sector eigenproblems
    """

    j_max: int = 0
    tolerance: float = DM_TOLERANCE
    max_iterations: int = DM_MAX_ITERATIONS
    damping: float = DM_DAMPING
    mirror_tolerance: float = MIRROR_TOLERANCE
    mirror_max_iterations: int = MIRROR_MAX_ITERATIONS
    rank_tolerance: float = RANK_TOLERANCE
    step: float = RADIAL_STEP
    margin: float = RADIAL_MARGIN
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"Damping must lie in (0, 1], got {self.damping}")
        if self.j_max < 0:
            raise ValueError(f"j_max must be non-negative, got {self.j_max}")


@dataclass
class DmState:
    """A minimizer of the density matrix functional in its angular decomposition.

    Parameters:
        sectors: the angular momenta j the state may occupy
        occupations: lambda_j per sector, summing to one
        orbitals: unit-normalized radial orbital f_j per sector
        rho: the radial density sum_j lambda_j f_j**2
        energy: E^DM
        mu_dm: the chemical potential, lowest sector energy of H_0 + 2a rho
        sector_energies: lowest eigenvalue of H_0 + 2a rho - j omega in each sector
        energies: energy after every accepted self-consistent step
    """

    params: GpParameters
    trap: TrapPotential
    grid: RadialGrid
    sectors: List[int]
    occupations: np.ndarray
    orbitals: List[RadialState]
    rho: RadialState
    energy: float
    mu_dm: float
    sector_energies: np.ndarray
    iterations: int
    converged: bool
    energies: List[float] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return dm_rank(self)

    @property
    def angular_momentum(self) -> float:
        """Tr[L gamma] = sum_j j lambda_j."""
        return float(np.dot(self.sectors, self.occupations))

    def occupied(self, tolerance: float = RANK_TOLERANCE) -> List[int]:
        return [j for j, weight in zip(self.sectors, self.occupations) if weight > tolerance]


def default_j_max(params: GpParameters, trap: TrapPotential, window: float = SECTOR_WINDOW,
                  padding: int = SECTOR_PADDING) -> int:
    """Largest n whose trial vortex energy E_n - n omega lies within window of the smallest one,
    plus padding."""
    rotating = []
    for n in range(0, 200):
        energy, _ = trial_energy(trap, n, params.a)
        rotating.append(energy - n * params.omega)
        lowest = min(rotating)
        if rotating[-1] > lowest + window and n > 2 and rotating[-1] > rotating[-2]:
            break
    lowest = min(rotating)
    within = [n for n, value in enumerate(rotating) if value <= lowest + window]
    return int(math.ceil(max(within))) + padding


def _sector_ground_state(j: int, potential: np.ndarray, grid: RadialGrid,
                         omega: float) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of -Delta + j**2/r**2 + potential - j omega on the radial grid."""
    diag, off = grid.kinetic_bands(j**2)
    scale = np.sqrt(grid.mass)
    main = diag / grid.mass + potential
    band = off / (scale[:-1] * scale[1:])
    values, vectors = eigh_tridiagonal(main, band, select="i", select_range=(0, 0))
    f = vectors[:, 0] / scale
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return float(values[0]) - j * omega, f


def _gram(orbitals: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """G_ij = 2 pi int f_i**2 f_j**2 r dr."""
    squares = orbitals**2
    return (squares * grid.mass) @ squares.T


def _polish(linear: np.ndarray, gram: np.ndarray, a: float, weights: np.ndarray,
            tolerance: float) -> np.ndarray | None:
    """Solve the optimality conditions on the support of weights exactly, if that is consistent."""
    support = np.nonzero(weights > tolerance)[0]
    size = len(support)
    system = np.zeros((size + 1, size + 1))
    system[:size, :size] = 2 * a * gram[np.ix_(support, support)]
    system[:size, size] = -1
    system[size, :size] = 1
    rhs = np.concatenate([-linear[support], [1.0]])
    solution = np.linalg.lstsq(system, rhs, rcond=None)[0]
    candidate = np.zeros_like(weights)
    candidate[support] = solution[:size]
    if np.any(candidate < 0):
        return None
    multiplier = solution[size]
    gradient = linear + 2 * a * gram @ candidate
    if np.any(gradient < multiplier - 1e-10 * max(1.0, abs(multiplier))):
        return None
    return candidate


def optimal_occupations(
    linear: np.ndarray,
    gram: np.ndarray,
    a: float,
    start: np.ndarray | None = None,
    tolerance: float = MIRROR_TOLERANCE,
    max_iterations: int = MIRROR_MAX_ITERATIONS,
) -> np.ndarray:
    """Minimize sum_j lambda_j t_j + a sum_ij lambda_i G_ij lambda_j over the simplex.

    Exponentiated-gradient (mirror) descent, finished by solving the optimality conditions on
    the support it found."""
    size = len(linear)
    if size == 1:
        return np.ones(1)
    weights = np.full(size, 1 / size) if start is None else 0.99 * start + 0.01 / size
    weights = weights / weights.sum()
    lipschitz = 2 * a * float(np.max(np.abs(gram))) * size
    scale = max(lipschitz, float(np.ptp(linear)), 1e-12)
    eta = 1 / scale
    for _ in range(max_iterations):
        gradient = linear + 2 * a * gram @ weights
        shifted = gradient - gradient.min()
        updated = weights * np.exp(-eta * shifted)
        updated /= updated.sum()
        change = float(np.max(np.abs(updated - weights)))
        weights = updated
        if change < tolerance:
            break
    polished = _polish(linear, gram, a, weights, max(tolerance, 1e-12))
    if polished is not None:
        weights = polished
    return weights / weights.sum()


def _dm_energy(linear: float, rho: np.ndarray, a: float, grid: RadialGrid) -> float:
    return linear + a * float(np.sum(grid.mass * rho**2))


def _mixing_step(linear: float, rho: np.ndarray, new_linear: float, new_rho: np.ndarray,
                 a: float, grid: RadialGrid) -> float | None:
    """Exact line search along (1 - theta) gamma + theta gamma_new, where the energy is a
    parabola in theta. None when the energy does not decrease in that direction."""
    difference = new_rho - rho
    slope = new_linear - linear + 2 * a * float(np.sum(grid.mass * rho * difference))
    if slope >= -1e-15 * max(1.0, abs(linear)):
        return None
    curvature = a * float(np.sum(grid.mass * difference**2))
    if curvature <= 0:
        return 1.0
    return min(1.0, -slope / (2 * curvature))


def minimize_dm(
    params: GpParameters,
    trap: TrapPotential,
    grid: RadialGrid | None = None,
    opts: DmOptions | None = None,
    sectors: Sequence[int] | None = None,
    initial_occupations: Sequence[float] | None = None,
) -> DmState:
    """The minimizer of the density matrix functional.

    Parameters:
        params: coupling and angular velocity (omega below the trap's omega_c)
        trap: the confining potential
        grid: radial grid; sized for the highest sector when omitted
        opts: solver settings
        sectors: restrict gamma to these angular momenta; 0..j_max when omitted
        initial_occupations: weights of trial profiles per sector forming the starting density;
            everything in the lowest sector when omitted
    """
    opts = opts or DmOptions()
    params.validate(trap)
    if sectors is None:
        j_max = opts.j_max or default_j_max(params, trap)
        sectors = list(range(j_max + 1))
    else:
        sectors = [int(j) for j in sectors]
        if not sectors or len(set(sectors)) != len(sectors) or min(sectors) < 0:
            raise ValueError(f"Sectors must be distinct non-negative integers, got {sectors}")
    if grid is None:
        estimate, _ = trial_energy(trap, max(sectors) + 1, params.a)
        grid = RadialGrid.for_trap(trap, 2 * estimate, opts.step, opts.margin)
    potential = trap(grid.r)
    a, omega = params.a, params.omega

    if initial_occupations is None:
        start = np.zeros(len(sectors))
        start[0] = 1.0
    else:
        start = np.asarray(initial_occupations, dtype=float)
        if start.shape != (len(sectors),) or np.any(start < 0) or start.sum() <= 0:
            raise ValueError("Initial occupations need one non-negative weight per sector")
        start = start / start.sum()
    rho = sum(w * initial_profile(j, a, trap, grid) ** 2 for j, w in zip(sectors, start) if w)

    def solve_sectors(density: np.ndarray):
        total = potential + 2 * a * density

        def one(j):
            return _sector_ground_state(j, total, grid, omega)

        with ThreadPoolExecutor(max_workers=max(1, opts.jobs)) as executor:
            results = list(executor.map(one, sectors))
        eigen = np.array([value for value, _ in results])
        orbitals = np.array([f for _, f in results])
        return eigen, orbitals

    def occupy(density: np.ndarray, weights: np.ndarray | None):
        """Orbitals at density, occupations for them, and the resulting state."""
        eigen, orbitals = solve_sectors(density)
        # t_j = <f_j|h_j - j omega|f_j>, the sector energies without the mean field
        kinetic = eigen - 2 * a * (orbitals**2 * grid.mass) @ density
        gram = _gram(orbitals, grid)
        weights = optimal_occupations(kinetic, gram, a, weights, opts.mirror_tolerance,
                                      opts.mirror_max_iterations)
        new_rho = weights @ orbitals**2
        return eigen, orbitals, kinetic, weights, float(weights @ kinetic), new_rho

    eigen, orbitals, kinetic, weights, linear, rho_new = occupy(rho, None)
    rho, energy = rho_new, _dm_energy(linear, rho_new, a, grid)
    energies = [energy]
    theta_cap = opts.damping
    change = math.inf
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iterations + 1):
        eigen, orbitals, kinetic, weights, new_linear, rho_new = occupy(rho, weights)
        change = float(np.max(np.abs(rho_new - rho)))
        log.debug("DM step %d: E=%.14g change=%.3e", iterations, energy, change)
        if change < opts.tolerance:
            linear, rho = new_linear, rho_new
            energy = _dm_energy(linear, rho, a, grid)
            converged = True
            break
        theta = _mixing_step(linear, rho, new_linear, rho_new, a, grid)
        if theta is None:
            # no descent towards the self-consistent state: step towards the lowest orbital
            lowest = int(np.argmin(eigen))
            theta = _mixing_step(linear, rho, float(kinetic[lowest]), orbitals[lowest] ** 2, a,
                                 grid)
            if theta is None:
                # stalled; only a nearly self-consistent density is accepted
                if change < DM_STALL_FACTOR * opts.tolerance:
                    linear, rho = new_linear, rho_new
                    energy = _dm_energy(linear, rho, a, grid)
                    converged = True
                break
            new_linear, rho_new = float(kinetic[lowest]), orbitals[lowest] ** 2
        else:
            theta = min(theta, theta_cap)
            theta_cap = min(1.0, 1.5 * theta_cap)
        # the mixture of the two density matrices, whose energy is exact
        linear = (1 - theta) * linear + theta * new_linear
        rho = (1 - theta) * rho + theta * rho_new
        energy = _dm_energy(linear, rho, a, grid)
        energies.append(energy)

    if not converged:
        log.error("DM iteration at a=%g omega=%g stopped with density change %.3e",
                  a, omega, change)
        raise ConvergenceError(f"DM minimization at a={a:g}, omega={omega:g} did not converge",
                               change, iterations)

    mu_dm = float(np.min(eigen))
    state = DmState(
        params=params,
        trap=trap,
        grid=grid,
        sectors=list(sectors),
        occupations=weights,
        orbitals=[RadialState(f, grid) for f in orbitals],
        rho=RadialState(rho, grid),
        energy=energy,
        mu_dm=mu_dm,
        sector_energies=eigen,
        iterations=iterations,
        converged=converged,
        energies=energies,
    )
    _check_state(state, opts)
    log.info("DM minimum at a=%g omega=%g: E=%.12g occupied sectors %s",
             a, omega, energy, state.occupied(opts.rank_tolerance))
    return state


def _check_state(state: DmState, opts: DmOptions):
    if state.occupations[-1] > opts.rank_tolerance and len(state.sectors) > 1:
        log.warning("The highest sector j=%d carries weight %.3e; raise j_max",
                    state.sectors[-1], state.occupations[-1])
    peak = 2 * state.params.a * state.rho.sup()
    if peak > state.mu_dm + 1e-6 * max(1.0, abs(state.mu_dm)):
        log.warning("2a sup(rho) = %.8g exceeds the chemical potential %.8g", peak, state.mu_dm)
    occupied = [e for e, w in zip(state.sector_energies, state.occupations)
                if w > opts.rank_tolerance]
    if occupied and max(occupied) - min(occupied) > 1e-6 * max(1.0, abs(state.mu_dm)):
        log.warning("Occupied sector energies are not degenerate: %s", occupied)


def dm_rank(state: DmState, tolerance: float = RANK_TOLERANCE) -> int:
    """Number of sectors with occupation above tolerance."""
    return int(np.sum(state.occupations > tolerance))


def sector_residual(state: DmState, j: int) -> float:
    """||(H_0 + 2a rho - j omega - e_j) f_j|| for the orbital of sector j."""
    index = state.sectors.index(j)
    grid = state.grid
    f = state.orbitals[index].values
    total = state.trap(grid.r) + 2 * state.params.a * state.rho.values
    action = grid.apply_kinetic(j**2, f) / grid.mass + total * f
    energy = state.sector_energies[index] + j * state.params.omega
    return math.sqrt(float(np.sum(grid.mass * (action - energy * f) ** 2)))


def prop_condition(state: DmState, trap: TrapPotential | None = None) -> bool:
    """omega <= max over omega_tilde of omega_tilde**2 / (4 (C_omega_tilde + mu^DM)), under which
    the GP minimizer has zero angular momentum and E^DM = E^GP."""
    from gprotor.critical import omega_scan

    trap = trap or state.trap
    candidates = list(omega_scan(trap))
    if math.isfinite(trap.omega_c):
        candidates.append(trap.omega_c)
    best = 0.0
    for omega_tilde in candidates:
        constant = trap.c_tilde(float(omega_tilde))
        if math.isfinite(constant) and constant + state.mu_dm > 0:
            best = max(best, omega_tilde**2 / (4 * (constant + state.mu_dm)))
    return state.params.omega <= best


def equality_regime(params: GpParameters, trap: TrapPotential) -> bool:
    """a <= pi (2 - omega) in the harmonic trap, where the DM minimizer has rank one and zero
    angular momentum."""
    if not trap.is_harmonic:
        raise ValueError(f"The equality regime is only known for the harmonic trap, not {trap}")
    params.validate(trap)
    return params.a <= a_omega_equality_bound(params.omega)


class DmGpComparison(NamedTuple):
    e_dm: float
    e_gp: float
    strict_gap: bool
    gap: float


def compare_dm_gp(
    params: GpParameters,
    trap: TrapPotential,
    grid=None,
    dm_opts: DmOptions | None = None,
    solver_opts=None,
    state: DmState | None = None,
    minimizer=None,
    tolerance: float = 1e-6,
) -> DmGpComparison:
    """E^DM against E^GP. The GP energy is the lower of the 2D minimum and the radial vortices
    solved on the DM grid, so that both sides share a discretization where they should agree.

    Parameters:
        grid: the Grid2D for the 2D minimization
        state, minimizer: already computed DM state and 2D minimum to reuse
        tolerance: E^GP - E^DM above this counts as a strict gap
    """
    from gprotor.radial_solver import minimize_vortex
    from gprotor.solver2d import minimize_2d

    state = state or minimize_dm(params, trap, opts=dm_opts)
    minimizer = minimizer or minimize_2d(params, trap, grid, solver_opts)
    vortex_energies = []
    for j in state.occupied():
        profile = minimize_vortex(j, params, trap, state.grid)
        vortex_energies.append(profile.gp_energy)
    e_gp = min([minimizer.energy] + vortex_energies)
    gap = e_gp - state.energy
    if gap < -1e-8 * max(1.0, abs(e_gp)):
        log.warning("E^DM = %.12g lies above E^GP = %.12g", state.energy, e_gp)
    return DmGpComparison(state.energy, e_gp, gap > tolerance, gap)


def dm_state_to_text(state: DmState) -> str:
    """Occupation table (j, lambda_j, sector energy), then columns r, rho, f_j per sector."""
    lines = [
        f"# a={state.params.a!r} omega={state.params.omega!r} energy={state.energy!r} "
        f"mu_dm={state.mu_dm!r} rank={state.rank}",
        "# j lambda sector_energy",
    ]
    for j, weight, energy in zip(state.sectors, state.occupations, state.sector_energies):
        lines.append(f"{j} {weight:.17e} {energy:.17e}")
    lines.append("# r rho " + " ".join(f"f_{j}" for j in state.sectors))
    columns = np.column_stack([state.grid.r, state.rho.values]
                              + [f.values for f in state.orbitals])
    lines.extend(" ".join(f"{v:.12e}" for v in row) for row in columns)
    return "\n".join(lines) + "\n"
