"""Minimize the rotating Gross-Pitaevskii functional on a plane and diagnose broken rotational
symmetry.

    E^GP[phi] = int (|grad phi|**2 + V |phi|**2 - omega conj(phi) L phi + a |phi|**4),
    L = -i (x d/dy - y d/dx), ||phi|| = 1.

Derivatives are spectral on the periodic Grid2D. The minimizer is a preconditioned nonlinear
conjugate gradient on the unit sphere, started from several seeded states; the lowest energy over
the restarts is reported.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import fft

from gprotor.constants import (
    BOUNDARY_TOLERANCE,
    CHANNEL_COPIES,
    CHANNEL_THRESHOLD,
    ENERGY_TOLERANCE_2D,
    GAP_FACTOR,
    GRID_POINTS,
    MAX_ITERATIONS_2D,
    RESIDUAL_TOLERANCE_2D,
    RESTARTS,
    SEED,
)
from gprotor.model import (
    ConvergenceError,
    Field2D,
    GpParameters,
    Grid2D,
    TrapPotential,
    angular_spectrum,
    polar_quadrature,
    polar_samples,
    rotate_values,
    trial_energy,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Solver2DOptions:
    """Settings for minimize_2d and the multi-component solver built on it.

    Parameters:
        points: grid nodes per side when no grid is passed in
        restarts: number of seeded starting states
        tolerance: converged once ||(H_0 + 2a|phi|**2 - mu) phi|| drops below this
        energy_tolerance: ...and the last accepted step lowered the energy by less than this
        max_iterations: conjugate gradient steps per restart
        seed: restart k draws its random numbers from default_rng(seed + k)
        m_max: highest |m| in the reported channel spectrum
        channel_threshold: channels with at least this weight count as occupied
        gap_factor: breaking needs E_vortex - E_2D > gap_factor |E_2D|
        channel_copies: rotations averaged by the channel projection (a multiple of 4)
        jobs: worker threads for the restarts
        strict: raise ConvergenceError when the best restart did not converge
    """

    points: int = GRID_POINTS
    restarts: int = RESTARTS
    tolerance: float = RESIDUAL_TOLERANCE_2D
    energy_tolerance: float = ENERGY_TOLERANCE_2D
    max_iterations: int = MAX_ITERATIONS_2D
    seed: int = SEED
    m_max: int = 12
    channel_threshold: float = CHANNEL_THRESHOLD
    gap_factor: float = GAP_FACTOR
    channel_copies: int = CHANNEL_COPIES
    jobs: int = 1
    strict: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"At least one restart is needed, got {self.restarts}")
        if self.channel_copies < 4 or self.channel_copies % 4:
            raise ValueError(f"Channel copies must be a multiple of 4, got {self.channel_copies}")


def _inner(u: np.ndarray, v: np.ndarray, area: float) -> float:
    """Real inner product Re int conj(u) v."""
    return float(np.real(np.vdot(u, v))) * area


def apply_h0(values: np.ndarray, grid: Grid2D, potential: np.ndarray, omega: float) -> np.ndarray:
    """(-Delta + V - omega L) psi, spectrally."""
    spectrum = fft.fft2(values)
    out = fft.ifft2(grid.laplacian_symbol * spectrum) + potential * values
    if omega:
        out = out - omega * apply_angular_momentum(values, grid, spectrum)
    return out


def apply_angular_momentum(values: np.ndarray, grid: Grid2D,
                           spectrum: np.ndarray | None = None) -> np.ndarray:
    """L psi = -i (x d/dy - y d/dx) psi."""
    if spectrum is None:
        spectrum = fft.fft2(values)
    k = grid.derivative_wavenumbers
    dx = fft.ifft2(1j * k[:, None] * spectrum)
    dy = fft.ifft2(1j * k[None, :] * spectrum)
    x, y = grid.mesh
    return -1j * (x * dy - y * dx)


class _Functional:
    """E^GP on one grid, with its mean-field action."""

    def __init__(self, params: GpParameters, trap: TrapPotential, grid: Grid2D):
        self.params = params
        self.grid = grid
        self.area = grid.cell_area
        self.potential = trap(grid.radius, True)

    def h0(self, values: np.ndarray) -> np.ndarray:
        return apply_h0(values, self.grid, self.potential, self.params.omega)

    def action(self, values: np.ndarray) -> np.ndarray:
        """(H_0 + 2a|psi|**2) psi, half the gradient of the energy."""
        return self.h0(values) + 2 * self.params.a * np.abs(values) ** 2 * values

    def energy(self, values: np.ndarray) -> float:
        linear = _inner(values, self.h0(values), self.area)
        return linear + self.params.a * float(np.sum(np.abs(values) ** 4)) * self.area

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return values / math.sqrt(_inner(values, values, self.area))


def energy_2d(phi: Field2D, params: GpParameters, trap: TrapPotential) -> float:
    """E^GP[phi] on the field's grid."""
    return _Functional(params, trap, phi.grid).energy(phi.values)


def energy_gradient_2d(phi: Field2D, params: GpParameters, trap: TrapPotential) -> np.ndarray:
    """G with E^GP[phi + eps w] = E^GP[phi] + eps Re int conj(G) w + O(eps**2)."""
    return 2 * _Functional(params, trap, phi.grid).action(phi.values)


def rotation_term(phi: Field2D) -> float:
    """<phi|L phi>."""
    raw = complex(np.vdot(phi.values, apply_angular_momentum(phi.values, phi.grid)))
    raw *= phi.grid.cell_area
    if abs(raw.imag) > 1e-8:
        log.warning("<phi|L phi> has imaginary part %.3e", raw.imag)
    return raw.real


def _quarter_turn(values: np.ndarray) -> np.ndarray:
    """Exact counterclockwise rotation by pi/2 on the periodic grid: g(x, y) = f(y, -x)."""
    index = (-np.arange(values.shape[0])) % values.shape[0]
    return values[:, index].T


def project_channel(phi: Field2D, n: int, copies: int = CHANNEL_COPIES) -> Field2D:
    """Projection onto angular momentum n: the average of e^{in alpha} R_alpha phi over
    alpha = 2 pi j / copies. Quarter turns are exact; the rest uses spectral shears."""
    return Field2D(_project_values(phi.values, phi.grid, n, copies), phi.grid)


def _project_values(values: np.ndarray, grid: Grid2D, n: int, copies: int) -> np.ndarray:
    per_quarter = copies // 4
    total = np.zeros_like(values, dtype=complex)
    for j in range(per_quarter):
        beta = 2 * math.pi * j / copies
        turned = rotate_values(values, grid, beta)
        for q in range(4):
            total += np.exp(1j * n * (beta + q * math.pi / 2)) * turned
            turned = _quarter_turn(turned)
    return total / copies


def vortex_positions(phi: Field2D, density_floor: float = 1e-3) -> List[Tuple[float, float, int]]:
    """Plaquettes around which the phase winds, as (x, y, winding), where the mean density on the
    plaquette is at least density_floor times the peak density."""
    values = phi.values
    corners = [values[:-1, :-1], values[1:, :-1], values[1:, 1:], values[:-1, 1:]]
    winding = np.zeros(corners[0].shape)
    for start, end in zip(corners, corners[1:] + corners[:1]):
        winding += np.angle(end * np.conj(start))
    winding = np.rint(winding / (2 * math.pi)).astype(int)
    density = sum(np.abs(c) ** 2 for c in corners) / 4
    bulk = density >= density_floor * float(np.max(np.abs(values) ** 2))
    x = phi.grid.x
    centres = (x[:-1] + x[1:]) / 2
    found = np.argwhere((winding != 0) & bulk)
    return [(float(centres[i]), float(centres[j]), int(winding[i, j])) for i, j in found]


def vortex_count(phi: Field2D, density_floor: float = 1e-3) -> int:
    """Total winding of the vortices in the bulk of the condensate."""
    return sum(w for _, _, w in vortex_positions(phi, density_floor))


def nonradiality(phi: Field2D, n_radial: int | None = None, n_angles: int = 128) -> float:
    """int | |phi|**2 - (angular average of |phi|**2) |, zero exactly when |phi| is radial."""
    radii, weights = polar_quadrature(phi.grid, n_radial)
    density = np.abs(polar_samples(phi, radii, n_angles)) ** 2
    average = density.mean(axis=1, keepdims=True)
    return float(2 * math.pi * np.sum(weights * np.abs(density - average).mean(axis=1)))


def field_to_text(phi: Field2D) -> str:
    """Columns x, y, Re phi, Im phi, |phi|**2."""
    return phi.to_text()


def boundary_leakage(phi: Field2D) -> float:
    """Largest density on the outer rows and columns, relative to the peak density."""
    density = phi.density()
    edge = max(density[0].max(), density[-1].max(), density[:, 0].max(), density[:, -1].max())
    return float(edge / density.max())


def gaussian_vortex(n: int, width: float, grid: Grid2D) -> np.ndarray:
    """(x + iy)**n exp(-r**2 / (2 width**2)), normalized."""
    x, y = grid.mesh
    values = (x + 1j * y) ** n * np.exp(-(x**2 + y**2) / (2 * width**2))
    return values / math.sqrt(_inner(values, values, grid.cell_area))


def seed_field(k: int, seed: int, params: GpParameters, trap: TrapPotential,
               grid: Grid2D) -> np.ndarray:
    """Starting state of restart k: a Gaussian, a single vortex, superpositions of two vortices
    with a random relative phase plus noise, and plain noise under a Gaussian envelope."""
    rng = np.random.default_rng(seed + k)
    _, width = trial_energy(trap, 0, params.a)

    def noise():
        x, y = grid.mesh
        envelope = np.exp(-(x**2 + y**2) / (2 * (1.5 * width) ** 2))
        shape = envelope.shape
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * envelope

    if k == 0:
        return gaussian_vortex(0, width, grid)
    if k == 1:
        return gaussian_vortex(1, trial_energy(trap, 1, params.a)[1], grid)
    if k % 4 == 3:
        values = noise()
    else:
        first = int(rng.integers(0, 3))
        second = first + int(rng.integers(1, 3))
        phase = np.exp(2j * math.pi * rng.random())
        values = (
            gaussian_vortex(first, trial_energy(trap, first, params.a)[1], grid)
            + phase * gaussian_vortex(second, trial_energy(trap, second, params.a)[1], grid)
        )
        values = values + 0.1 * noise() * float(np.max(np.abs(values)))
    return values / math.sqrt(_inner(values, values, grid.cell_area))


@dataclass
class DescentResult:
    values: np.ndarray
    energy: float
    residual: float
    mu: float
    iterations: int
    converged: bool
    seed: int


def _tangent(values: np.ndarray, direction: np.ndarray, area: float) -> np.ndarray:
    return direction - _inner(values, direction, area) * values


def descend(
    functional,
    values: np.ndarray,
    tolerance: float,
    energy_tolerance: float,
    max_iterations: int,
    symbol: np.ndarray,
    projector=None,
    seed: int = 0,
    callback=None,
) -> DescentResult:
    """Preconditioned Polak-Ribiere conjugate gradient on the unit sphere.

    functional must provide energy(values), action(values) (half the gradient) and normalize().
    symbol is the Fourier symbol of the kinetic operator used by the (c + k**2)**-1 preconditioner;
    projector, when given, keeps the iterates in a subspace (for instance one angular channel).
    Fields may carry a leading component axis; the FFT acts on the last two axes.
    """
    area = functional.area
    if projector is not None:
        values = projector(values)
    values = functional.normalize(values)
    energy = functional.energy(values)
    direction = previous_gradient = previous_preconditioned = None
    step = 1.0
    residual, mu, drop = math.inf, 0.0, math.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        action = functional.action(values)
        mu = _inner(values, action, area)
        gradient = action - mu * values
        if projector is not None:
            gradient = projector(gradient)
        residual = math.sqrt(_inner(gradient, gradient, area))
        if callback is not None:
            callback(iterations, energy, residual)
        if residual < tolerance and drop < energy_tolerance:
            return DescentResult(values, energy, residual, mu, iterations, True, seed)

        shift = max(1.0, mu)
        preconditioned = fft.ifft2(fft.fft2(gradient) / (shift + symbol))
        if projector is not None:
            preconditioned = projector(preconditioned)
        preconditioned = _tangent(values, preconditioned, area)
        if direction is None:
            beta = 0.0
        else:
            beta = max(
                0.0,
                _inner(gradient - previous_gradient, preconditioned, area)
                / _inner(previous_gradient, previous_preconditioned, area),
            )
        if direction is None or beta == 0.0:
            direction = -preconditioned
        else:
            direction = -preconditioned + beta * _tangent(values, direction, area)
        slope = 2 * _inner(gradient, direction, area)
        if slope >= 0:
            direction = -preconditioned
            slope = 2 * _inner(gradient, direction, area)

        accepted = _line_search(functional, values, direction, energy, slope, step)
        if accepted is None:
            if beta == 0.0:
                log.debug("Line search stalled at residual %.3e", residual)
                break
            direction = None
            continue
        values, new_energy, step = accepted
        if projector is not None:
            values = functional.normalize(projector(values))
            new_energy = functional.energy(values)
        drop = energy - new_energy
        energy = new_energy
        previous_gradient, previous_preconditioned = gradient, preconditioned
    return DescentResult(values, energy, residual, mu, iterations,
                         bool(residual < tolerance), seed)


def _line_search(functional, values, direction, energy, slope, step):
    """Step along the normalized curve (phi + t d)/||phi + t d|| to a lower energy, refining
    each trial step with the parabola through E(0), E'(0) and E(t)."""
    t = step
    for _ in range(40):
        trial = functional.normalize(values + t * direction)
        trial_energy_value = functional.energy(trial)
        curvature = (trial_energy_value - energy - slope * t) / t**2
        if curvature > 0:
            refined_t = min(-slope / (2 * curvature), 4 * t)
            refined = functional.normalize(values + refined_t * direction)
            refined_energy = functional.energy(refined)
            if refined_energy < trial_energy_value:
                t, trial, trial_energy_value = refined_t, refined, refined_energy
        if trial_energy_value < energy:
            return trial, trial_energy_value, t
        t /= 4
    return None


@dataclass
class Minimizer2D:
    """The lowest state found by minimize_2d.

    Parameters:
        phi: normalized wavefunction
        energy: E^GP[phi]
        l_expectation: <phi|L phi>
        spectrum: channel weights p_m for |m| <= m_max
        breaking_flag: at least two channels carry weight above the threshold
        residual: ||(H_0 + 2a|phi|**2 - mu) phi|| at the end of the best restart
        converged: whether the best restart met the tolerances
        mu: the chemical potential
        seed: the restart the state came from
        energies: final energy of every restart, by restart index
    """

    phi: Field2D
    energy: float
    l_expectation: float
    spectrum: Dict[int, float]
    breaking_flag: bool
    residual: float
    converged: bool
    mu: float
    seed: int
    energies: List[float] = field(default_factory=list)
    params: GpParameters | None = None

    def occupied_channels(self, threshold: float = CHANNEL_THRESHOLD) -> List[int]:
        return sorted(m for m, weight in self.spectrum.items() if weight > threshold)


def _occupied(spectrum: Mapping[int, float], threshold: float) -> int:
    return sum(1 for weight in spectrum.values() if weight > threshold)


def minimize_2d(
    params: GpParameters,
    trap: TrapPotential,
    grid: Grid2D | None = None,
    opts: Solver2DOptions | None = None,
    initial: Field2D | None = None,
    channel: int | None = None,
) -> Minimizer2D:
    """Lowest energy state of the rotating functional found over the seeded restarts.

    Parameters:
        params: coupling and angular velocity (omega must lie below the trap's omega_c)
        trap: the confining potential
        grid: the plane grid; sized to cover the condensate when omitted
        opts: solver settings
        initial: when given, the only starting state (one restart)
        channel: restrict every iterate to angular momentum channel (a pure n-vortex)
    """
    opts = opts or Solver2DOptions()
    params.validate(trap)
    grid = grid or Grid2D.for_trap(trap, params, opts.points)
    functional = _Functional(params, trap, grid)
    projector = None
    if channel is not None:
        def projector(values):
            return _project_values(values, grid, channel, opts.channel_copies)

    if initial is not None:
        if initial.grid != grid:
            raise ValueError("The initial field lives on a different grid")
        starts = [np.array(initial.values)]
    else:
        starts = [seed_field(k, opts.seed, params, trap, grid) for k in range(opts.restarts)]
        if channel is not None:
            _, width = trial_energy(trap, channel, params.a)
            starts[0] = gaussian_vortex(channel, width, grid)

    def run(k: int) -> DescentResult:
        result = descend(functional, starts[k], opts.tolerance, opts.energy_tolerance,
                         opts.max_iterations, grid.laplacian_symbol, projector, seed=k)
        log.debug("Restart %d: E=%.12g residual=%.3e after %d steps",
                  k, result.energy, result.residual, result.iterations)
        return result

    with ThreadPoolExecutor(max_workers=max(1, opts.jobs)) as executor:
        results = list(executor.map(run, range(len(starts))))
    best = min(results, key=lambda result: (result.energy, result.seed))
    if not best.converged:
        log.warning("Best 2D restart (seed %d) stopped at residual %.3e", best.seed, best.residual)
        if opts.strict:
            raise ConvergenceError("2D minimization did not converge", best.residual,
                                   best.iterations)

    phi = Field2D(best.values, grid)
    leakage = boundary_leakage(phi)
    if leakage > BOUNDARY_TOLERANCE:
        log.warning("Density at the grid boundary is %.3e of the peak; enlarge the grid", leakage)
    spectrum = angular_spectrum(phi, opts.m_max)
    minimizer = Minimizer2D(
        phi=phi,
        energy=best.energy,
        l_expectation=rotation_term(phi),
        spectrum=spectrum,
        breaking_flag=_occupied(spectrum, opts.channel_threshold) >= 2,
        residual=best.residual,
        converged=best.converged,
        mu=best.mu,
        seed=best.seed,
        energies=[result.energy for result in results],
        params=params,
    )
    log.info("2D minimum at a=%g omega=%g: E=%.12g <L>=%.6g channels %s",
             params.a, params.omega, minimizer.energy, minimizer.l_expectation,
             minimizer.occupied_channels(opts.channel_threshold))
    return minimizer


@dataclass
class BreakingDiagnosis:
    """Evidence of broken rotational symmetry at one (a, omega).

    Parameters:
        gap: min_n (E_n - n omega) - E^GP_2D
        best_vortex: the n attaining the minimum
        spectrum: channel weights of the 2D state
        occupied: channels above the threshold
        nonradiality: L1 distance of |phi|**2 from its angular average
        vortices: total winding in the bulk
        breaking: gap > tol_gap and at least two occupied channels
    """

    gap: float
    best_vortex: int
    spectrum: Dict[int, float]
    occupied: List[int]
    nonradiality: float
    vortices: int
    breaking: bool

    def __str__(self) -> str:
        verdict = "broken" if self.breaking else "symmetric"
        return (
            f"{verdict}: gap={self.gap:.6e} (best vortex n={self.best_vortex}), "
            f"channels {self.occupied}, nonradiality={self.nonradiality:.3e}, "
            f"vortices={self.vortices}"
        )


def vortex_energies_rotating(vortex_table: Sequence[float] | Mapping[int, float],
                             omega: float) -> Dict[int, float]:
    """E_n - n omega for radial energies given by n."""
    if isinstance(vortex_table, Mapping):
        items = vortex_table.items()
    else:
        items = enumerate(vortex_table)
    return {int(n): float(energy) - n * omega for n, energy in items}


def detect_breaking(
    m: Minimizer2D,
    vortex_table: Sequence[float] | Mapping[int, float],
    params: GpParameters | None = None,
    opts: Solver2DOptions | None = None,
) -> BreakingDiagnosis:
    """Compare the 2D minimum with the best vortex and look at the shape of the 2D state."""
    opts = opts or Solver2DOptions()
    params = params or m.params
    if params is None:
        raise ValueError("detect_breaking needs the parameters of the 2D minimum")
    rotating = vortex_energies_rotating(vortex_table, params.omega)
    if not rotating:
        raise ValueError("detect_breaking needs at least one vortex energy")
    best_vortex = min(rotating, key=lambda n: (rotating[n], n))
    gap = rotating[best_vortex] - m.energy
    occupied = m.occupied_channels(opts.channel_threshold)
    breaking = bool(gap > opts.gap_factor * abs(m.energy) and len(occupied) >= 2)
    diagnosis = BreakingDiagnosis(
        gap=gap,
        best_vortex=best_vortex,
        spectrum=m.spectrum,
        occupied=occupied,
        nonradiality=nonradiality(m.phi),
        vortices=vortex_count(m.phi),
        breaking=breaking,
    )
    log.info("Breaking diagnosis at a=%g omega=%g: %s", params.a, params.omega, diagnosis)
    return diagnosis
