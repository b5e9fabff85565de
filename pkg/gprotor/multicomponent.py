"""The n_c-component rotating functional

    E[phi_1..phi_nc] = sum_i <phi_i|H_0 phi_i> + a int (sum_i |phi_i|**2)**2,
    sum_i ||phi_i||**2 = 1,

which interpolates between the Gross-Pitaevskii functional (n_c = 1) and the density matrix
functional (n_c at least the rank of its minimizer).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Sequence

import numpy as np
from lxml import etree

from gprotor.dm_solver import DmOptions, DmState, compare_dm_gp, minimize_dm
from gprotor.model import (
    ConvergenceError,
    Field2D,
    GpParameters,
    Grid2D,
    RadialGrid,
    RadialState,
    TrapPotential,
    embed_radial,
)
from gprotor.solver2d import (
    Minimizer2D,
    Solver2DOptions,
    apply_h0,
    descend,
    minimize_2d,
    seed_field,
)

log = logging.getLogger(__name__)


class _MultiFunctional:
    """The n_c-component energy on stacked fields of shape (n_c, N, N)."""

    def __init__(self, params: GpParameters, trap: TrapPotential, grid: Grid2D):
        self.params = params
        self.grid = grid
        self.area = grid.cell_area
        self.potential = trap(grid.radius, True)

    def h0(self, values: np.ndarray) -> np.ndarray:
        return apply_h0(values, self.grid, self.potential, self.params.omega)

    def action(self, values: np.ndarray) -> np.ndarray:
        density = np.sum(np.abs(values) ** 2, axis=0)
        return self.h0(values) + 2 * self.params.a * density * values

    def energy(self, values: np.ndarray) -> float:
        linear = float(np.real(np.vdot(values, self.h0(values)))) * self.area
        density = np.sum(np.abs(values) ** 2, axis=0)
        return linear + self.params.a * float(np.sum(density**2)) * self.area

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return values / math.sqrt(float(np.sum(np.abs(values) ** 2)) * self.area)


@dataclass
class MultiState:
    """The lowest multi-component state found.

    Parameters:
        components: phi_1..phi_nc, either Field2D on a plane or RadialState profiles f_i when the
            components were restricted to angular momentum sectors
        energy: E^GP_nc
        sectors: the angular momentum of each radial component, None for plane fields
        residual, converged, seed, energies: as for Minimizer2D
    """

    components: List
    energy: float
    params: GpParameters
    sectors: List[int] | None = None
    residual: float = 0.0
    converged: bool = True
    seed: int = 0
    energies: List[float] = field(default_factory=list)

    @property
    def n_c(self) -> int:
        return len(self.components)

    @property
    def component_norms(self) -> List[float]:
        return [c.norm() for c in self.components]

    @property
    def total_norm(self) -> float:
        return float(sum(self.component_norms))

    def densities(self) -> List[np.ndarray]:
        if self.sectors is None:
            return [c.density() for c in self.components]
        return [c.values**2 for c in self.components]

    def total_density(self) -> np.ndarray:
        return np.sum(self.densities(), axis=0)


def _stack(components: Sequence[Field2D]) -> np.ndarray:
    return np.stack([c.values for c in components])


def energy_multi(components: Sequence[Field2D], params: GpParameters,
                 trap: TrapPotential) -> float:
    """E^GP_nc of the components (no normalization is applied)."""
    if not components:
        raise ValueError("At least one component is needed")
    return _MultiFunctional(params, trap, components[0].grid).energy(_stack(components))


def energy_gradient_multi(components: Sequence[Field2D], params: GpParameters,
                          trap: TrapPotential) -> np.ndarray:
    """Stacked gradients G_i with dE = Re sum_i int conj(G_i) dphi_i."""
    functional = _MultiFunctional(params, trap, components[0].grid)
    return 2 * functional.action(_stack(components))


def _seed_components(k: int, n_c: int, opts: Solver2DOptions, params: GpParameters,
                     trap: TrapPotential, grid: Grid2D) -> np.ndarray:
    """Component 0 starts like restart k of minimize_2d; the others from shifted seeds."""
    stack = [seed_field(k, opts.seed, params, trap, grid)]
    for i in range(1, n_c):
        stack.append(seed_field(k + i, opts.seed + 7919 * i, params, trap, grid) / math.sqrt(n_c))
    return np.stack(stack)


def minimize_multi(
    n_c: int,
    params: GpParameters,
    trap: TrapPotential,
    grid: Grid2D | None = None,
    opts: Solver2DOptions | None = None,
    initial: Sequence[Field2D] | None = None,
) -> MultiState:
    """Lowest energy of n_c components under one total norm constraint, over seeded restarts.

    With n_c = 1 the restarts and iterates coincide with those of minimize_2d."""
    if n_c < 1:
        raise ValueError(f"The number of components must be at least 1, got {n_c}")
    opts = opts or Solver2DOptions()
    params.validate(trap)
    grid = grid or Grid2D.for_trap(trap, params, opts.points)
    functional = _MultiFunctional(params, trap, grid)

    if initial is not None:
        if len(initial) != n_c:
            raise ValueError(f"Expected {n_c} initial components, got {len(initial)}")
        starts = [_stack(initial)]
    else:
        starts = [_seed_components(k, n_c, opts, params, trap, grid)
                  for k in range(opts.restarts)]

    def run(k: int):
        result = descend(functional, starts[k], opts.tolerance, opts.energy_tolerance,
                         opts.max_iterations, grid.laplacian_symbol, seed=k)
        log.debug("Multi restart %d (n_c=%d): E=%.12g residual=%.3e",
                  k, n_c, result.energy, result.residual)
        return result

    with ThreadPoolExecutor(max_workers=max(1, opts.jobs)) as executor:
        results = list(executor.map(run, range(len(starts))))
    best = min(results, key=lambda result: (result.energy, result.seed))
    if not best.converged:
        log.warning("Best %d-component restart stopped at residual %.3e", n_c, best.residual)
        if opts.strict:
            raise ConvergenceError(f"{n_c}-component minimization did not converge",
                                   best.residual, best.iterations)
    state = MultiState(
        components=[Field2D(values, grid) for values in best.values],
        energy=best.energy,
        params=params,
        residual=best.residual,
        converged=best.converged,
        seed=best.seed,
        energies=[result.energy for result in results],
    )
    log.info("%d-component minimum at a=%g omega=%g: E=%.12g", n_c, params.a, params.omega,
             state.energy)
    return state


def minimize_multi_sectors(
    sectors: Sequence[int],
    params: GpParameters,
    trap: TrapPotential,
    grid: RadialGrid | None = None,
    opts: DmOptions | None = None,
) -> MultiState:
    """Components f_i(r) e^{i j_i theta}, one per listed sector.

    Distinct sectors make the components orthogonal, so this is the density matrix functional
    restricted to those sectors: component i is sqrt(lambda_i) times the sector orbital."""
    state = minimize_dm(params, trap, grid, opts, sectors=sectors)
    components = [
        RadialState(math.sqrt(weight) * orbital.values, state.grid)
        for weight, orbital in zip(state.occupations, state.orbitals)
    ]
    return MultiState(
        components=components,
        energy=state.energy,
        params=params,
        sectors=list(state.sectors),
        converged=state.converged,
        energies=list(state.energies),
    )


def components_from_dm(state: DmState, grid: Grid2D, n_c: int | None = None) -> List[Field2D]:
    """sqrt(lambda_j) f_j e^{ij theta} for the occupied sectors, padded with zero fields."""
    occupied = [(j, w, f) for j, w, f in zip(state.sectors, state.occupations, state.orbitals)
                if w > 0]
    occupied.sort(key=lambda item: -item[1])
    n_c = n_c or len(occupied)
    fields = []
    for j, weight, orbital in occupied[:n_c]:
        g = RadialState(orbital.values / state.grid.r**j, state.grid)
        fields.append(Field2D(math.sqrt(weight) * embed_radial(g, j, grid).values, grid))
    while len(fields) < n_c:
        fields.append(Field2D(np.zeros((grid.points, grid.points)), grid))
    total = math.sqrt(sum(f.norm() for f in fields))
    return [Field2D(f.values / total, grid) for f in fields]


def mix_components(state: MultiState, matrix) -> MultiState:
    """Components sum_k A_ik phi_k for a matrix with A^dagger A = 1; the total density and the
    energy do not change."""
    matrix = np.asarray(matrix, dtype=complex)
    n_c = state.n_c
    if matrix.shape != (n_c, n_c):
        raise ValueError(f"Mixing matrix has shape {matrix.shape}, expected {(n_c, n_c)}")
    if not np.allclose(matrix.conj().T @ matrix, np.eye(n_c), atol=1e-10):
        raise ValueError("Mixing matrix is not unitary")
    if state.sectors is not None:
        raise ValueError("Sector-restricted components cannot be mixed")
    mixed = np.einsum("ik,kxy->ixy", matrix, _stack(state.components))
    grid = state.components[0].grid
    return MultiState(
        components=[Field2D(values, grid) for values in mixed],
        energy=state.energy,
        params=state.params,
        residual=state.residual,
        converged=state.converged,
        seed=state.seed,
        energies=list(state.energies),
    )


def density_separation(state: MultiState) -> float:
    """min over pairs i != j of int | |phi_i|**2 - |phi_j|**2 |; zero for one component."""
    densities = state.densities()
    if len(densities) < 2:
        return 0.0
    if state.sectors is None:
        measure = state.components[0].grid.cell_area
    else:
        measure = state.components[0].grid.mass
    return min(float(np.sum(measure * np.abs(first - second)))
               for first, second in combinations(densities, 2))


@dataclass
class TrichotomyCase:
    """What the energies say for one component count.

    case is "i" (equal to E^DM, n_c >= n^DM), "ii" (strictly above E^DM, n_c < n^DM) or "iii"
    (strictly below E^GP, n_c >= 2 in the breaking regime); a count can satisfy both i and iii.
    energy is the plane minimum; sector_bound is the energy with components restricted to the
    occupied DM sectors, an upper bound on E^GP_nc that is only computed for n_c >= n^DM.
    """

    n_c: int
    energy: float
    cases: List[str]
    separation: float
    violations: List[str]
    sector_bound: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class TrichotomyReport:
    params: GpParameters
    e_dm: float
    e_gp: float
    n_dm: int
    breaking: bool
    rows: List[TrichotomyCase]
    chain_violations: List[str]

    @property
    def violations(self) -> List[str]:
        found = list(self.chain_violations)
        for row in self.rows:
            found.extend(f"n_c={row.n_c}: {v}" for v in row.violations)
        return found

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        lines = [
            f"a={self.params.a:g} omega={self.params.omega:g}: E^DM={self.e_dm:.10g} "
            f"E^GP={self.e_gp:.10g} n^DM={self.n_dm} breaking={self.breaking}"
        ]
        for row in self.rows:
            verdict = "OK" if row.ok else "VIOLATED " + "; ".join(row.violations)
            bound = "" if row.sector_bound is None else f" sector bound {row.sector_bound:.10g}"
            lines.append(f"  n_c={row.n_c} E={row.energy:.10g} case {'/'.join(row.cases)} "
                         f"separation={row.separation:.3e}{bound} {verdict}")
        lines.extend(f"  {v}" for v in self.chain_violations)
        return "\n".join(lines)


def verify_trichotomy(
    params: GpParameters,
    trap: TrapPotential,
    grid: Grid2D | None = None,
    opts: Solver2DOptions | None = None,
    dm_opts: DmOptions | None = None,
    state: DmState | None = None,
    minimizer: Minimizer2D | None = None,
    n_c_values: Sequence[int] | None = None,
    tolerance: float = 1e-5,
    separation_tolerance: float = 1e-3,
) -> TrichotomyReport:
    """Classify E^GP_nc against E^DM and E^GP for n_c = 1..n^DM + 1.

    Every check runs on the plane minimum, seeded from the DM components for n_c >= n^DM. The
    energy with components restricted to the occupied DM sectors is reported next to it as an
    upper bound, and a plane minimum above that bound is a violation."""
    opts = opts or Solver2DOptions()
    state = state or minimize_dm(params, trap, opts=dm_opts)
    minimizer = minimizer or minimize_2d(params, trap, grid, opts)
    grid = minimizer.phi.grid
    n_dm = state.rank
    occupied = state.occupied()

    comparison = compare_dm_gp(params, trap, state=state, minimizer=minimizer,
                               tolerance=tolerance)
    e_gp = comparison.e_gp
    breaking = comparison.strict_gap
    n_c_values = list(n_c_values or range(1, n_dm + 2))

    rows = []
    for n_c in n_c_values:
        if n_c == 1:
            multi = MultiState([minimizer.phi], minimizer.energy, params)
            energy = minimizer.energy
        else:
            multi = minimize_multi(n_c, params, trap, grid, opts)
            if n_c >= n_dm:
                seeded = minimize_multi(n_c, params, trap, grid, opts,
                                        initial=components_from_dm(state, grid, n_c))
                if seeded.energy < multi.energy:
                    multi = seeded
            energy = multi.energy
        cases, violations = [], []
        sector_bound = None
        if n_c >= n_dm:
            sector_bound = minimize_multi_sectors(occupied, params, trap, state.grid,
                                                  dm_opts).energy
            if energy > sector_bound + tolerance:
                violations.append(f"E exceeds the sector bound by {energy - sector_bound:.3e}")
        if n_c >= n_dm:
            cases.append("i")
            if abs(energy - state.energy) > tolerance:
                violations.append(f"|E - E^DM| = {abs(energy - state.energy):.3e}")
        else:
            cases.append("ii")
            if not energy > state.energy + tolerance:
                violations.append(f"E - E^DM = {energy - state.energy:.3e} is not positive")
        separation = density_separation(multi)
        if n_c >= 2 and breaking:
            cases.append("iii")
            if not energy < e_gp - tolerance:
                violations.append(f"E^GP - E = {e_gp - energy:.3e} is not positive")
            if n_c <= n_dm and separation <= separation_tolerance:
                violations.append(f"component densities agree to {separation:.3e}")
        rows.append(TrichotomyCase(n_c, energy, cases, separation, violations, sector_bound))

    chain = []
    for row in rows:
        if row.energy < state.energy - tolerance:
            chain.append(f"E^GP_{row.n_c} = {row.energy:.10g} lies below E^DM")
        if row.energy > e_gp + tolerance:
            chain.append(f"E^GP_{row.n_c} = {row.energy:.10g} lies above E^GP")
    for first, second in zip(rows, rows[1:]):
        if second.n_c > first.n_c and second.energy > first.energy + tolerance:
            chain.append(f"E^GP_{second.n_c} exceeds E^GP_{first.n_c}")
    report = TrichotomyReport(params, state.energy, e_gp, n_dm, breaking, rows, chain)
    if not report.ok:
        log.warning("Trichotomy check at a=%g omega=%g: %s", params.a, params.omega,
                    report.violations)
    return report


def trichotomy_to_xml(report: TrichotomyReport) -> str:
    root = etree.Element(
        "trichotomy",
        a=repr(report.params.a),
        omega=repr(report.params.omega),
        e_dm=repr(report.e_dm),
        e_gp=repr(report.e_gp),
        n_dm=str(report.n_dm),
        breaking=str(report.breaking).lower(),
    )
    for row in report.rows:
        node = etree.SubElement(
            root,
            "components",
            n_c=str(row.n_c),
            energy=repr(row.energy),
            case="/".join(row.cases),
            separation=repr(row.separation),
            ok=str(row.ok).lower(),
        )
        if row.sector_bound is not None:
            node.set("sector_bound", repr(row.sector_bound))
        for violation in row.violations:
            etree.SubElement(node, "violation").text = violation
    for violation in report.chain_violations:
        etree.SubElement(root, "violation").text = violation
    return etree.tostring(root, pretty_print=True, encoding="unicode")
