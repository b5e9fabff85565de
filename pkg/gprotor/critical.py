"""Critical frequencies Omega_n(a) = E_{n+1}(a) - E_n(a) and the inequalities they obey."""
from __future__ import annotations

import csv
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, List, NamedTuple, Tuple

import numpy as np

from gprotor.analytic_bounds import b_n, n_omega, xi
from gprotor.constants import BOUND_SLACK, OMEGA_SCAN_CUTOFF, OMEGA_SCAN_POINTS
from gprotor.helpers import positive_part
from gprotor.model import GpParameters, RadialGrid, TrapPotential, trial_energy
from gprotor.radial_solver import RadialOptions, VortexProfile, minimize_vortex

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "n", "a", "E_n", "Omega_n", "slope", "upper", "lower", "slack_upper", "slack_lower",
]


class VortexLadder:
    """Radial vortex solves for one trap, computed on demand and kept for later calls.

    All vortices at the same coupling share one radial grid, sized for the highest winding
    number the ladder expects, so that energy differences do not pick up grid-size effects.
    """

    def __init__(
        self,
        trap: TrapPotential,
        opts: RadialOptions | None = None,
        n_top: int = 8,
        grid: RadialGrid | None = None,
    ):
        self.trap = trap
        self.opts = opts or RadialOptions()
        self.n_top = n_top
        self._fixed_grid = grid
        # set up cache for multiple calls, so we don't have to solve every time
        self._grids: Dict[float, RadialGrid] = {}
        self._profiles: Dict[Tuple[float, float], VortexProfile] = {}
        self._locks: Dict[Tuple[float, float], threading.Lock] = {}
        self._guard = threading.Lock()

    def grid(self, a: float) -> RadialGrid:
        """The radial grid used for every vortex at coupling a."""
        if self._fixed_grid is not None:
            return self._fixed_grid
        with self._guard:
            if a not in self._grids:
                estimate, _ = trial_energy(self.trap, self.n_top + 1, a)
                self._grids[a] = RadialGrid.for_trap(
                    self.trap, 2 * estimate, self.opts.step, self.opts.margin
                )
            return self._grids[a]

    def get(self, n: float, a: float) -> VortexProfile:
        """The minimizing n-vortex profile at coupling a (reported at omega = 0)."""
        key = (float(n), float(a))
        with self._guard:
            if key in self._profiles:
                return self._profiles[key]
            lock = self._locks.setdefault(key, threading.Lock())
        grid = self.grid(a)
        with lock:
            if key not in self._profiles:
                profile = minimize_vortex(n, GpParameters(a), self.trap, grid, self.opts)
                with self._guard:
                    self._profiles[key] = profile
        return self._profiles[key]

    def energy(self, n: float, a: float) -> float:
        return self.get(n, a).energy

    def __len__(self) -> int:
        return len(self._profiles)


def _ladder_for(trap: TrapPotential, grid: RadialGrid | None, ladder: VortexLadder | None,
                n: float) -> VortexLadder:
    if ladder is not None:
        return ladder
    return VortexLadder(trap, n_top=int(math.ceil(n)) + 1, grid=grid)


def critical_frequency(
    n: int,
    a: float,
    trap: TrapPotential,
    grid: RadialGrid | None = None,
    ladder: VortexLadder | None = None,
) -> float:
    """Omega_n(a) = E_{n+1}(a) - E_n(a), the angular velocity at which the (n+1)-vortex takes
    over from the n-vortex."""
    ladder = _ladder_for(trap, grid, ladder, n)
    return ladder.energy(n + 1, a) - ladder.energy(n, a)


def omega_derivative(
    n: int,
    a: float,
    trap: TrapPotential,
    grid: RadialGrid | None = None,
    ladder: VortexLadder | None = None,
) -> float:
    """dOmega_n/da = int |f_{n+1}|**4 - int |f_n|**4 by the Feynman-Hellmann principle."""
    ladder = _ladder_for(trap, grid, ladder, n)
    return ladder.get(n + 1, a).quartic - ladder.get(n, a).quartic


def omega_slope_at_zero(n: int) -> float:
    """dOmega_n/da at a = 0 in the harmonic trap: -(2n)! / (4**(n+1) pi n! (n+1)!)."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    log_value = (
        math.lgamma(2 * n + 1)
        - (n + 1) * math.log(4)
        - math.log(math.pi)
        - math.lgamma(n + 1)
        - math.lgamma(n + 2)
    )
    return -math.exp(log_value)


def small_a_sandwich(n: int, a: float) -> Tuple[float, float]:
    """2 - a int |chi_n|**4 <= Omega_n(a) <= 2 + a int |chi_{n+1}|**4 (harmonic trap), from
    oscillator states used as trial functions."""
    return 2 - a / b_n(n), 2 + a / b_n(n + 1)


def finite_difference_slope(n: int, a: float, trap: TrapPotential,
                            ladder: VortexLadder | None = None) -> float:
    """Centered difference of Omega_n in a with step 1e-3 max(1, a); one-sided at a = 0."""
    ladder = _ladder_for(trap, None, ladder, n)
    step = 1e-3 * max(1.0, a)
    if a < step:
        return (critical_frequency(n, a + step, trap, ladder=ladder)
                - critical_frequency(n, a, trap, ladder=ladder)) / step
    return (critical_frequency(n, a + step, trap, ladder=ladder)
            - critical_frequency(n, a - step, trap, ladder=ladder)) / (2 * step)


class BoundCheck(NamedTuple):
    upper_ok: bool
    lower_ok: bool
    slack: float
    upper: float
    lower: float


def _check(observed: float, upper: float, lower: float) -> BoundCheck:
    slack_upper = upper - observed
    slack_lower = observed - lower
    return BoundCheck(
        upper_ok=slack_upper >= BOUND_SLACK,
        lower_ok=slack_lower >= BOUND_SLACK,
        slack=min(slack_upper, slack_lower),
        upper=upper,
        lower=lower,
    )


def omega_scan(trap: TrapPotential) -> np.ndarray:
    """Values of the auxiliary angular velocity tried by the general lower bound."""
    omega_c = trap.omega_c
    if math.isinf(omega_c):
        return np.geomspace(1e-2, OMEGA_SCAN_CUTOFF, OMEGA_SCAN_POINTS)
    return np.linspace(0.5 * omega_c, omega_c, OMEGA_SCAN_POINTS, endpoint=False)


def general_lower_bound(n: int, energy_next: float, trap: TrapPotential) -> float:
    """max over the scan of (2n+1) omega**2 / (4 (C_omega + E_{n+1}))."""
    best = 0.0
    for omega in omega_scan(trap):
        constant = trap.c_tilde(float(omega))
        if math.isfinite(constant):
            best = max(best, (2 * n + 1) * omega**2 / (4 * (constant + energy_next)))
    return best


def general_upper_bound(n: int, a: float, energy_one: float) -> float:
    """(2n+1)(2 pi e / a) E_1(a) (3 + [ln(a / (2 pi e**2))]_+)."""
    if not a > 0:
        return math.inf
    return (
        (2 * n + 1)
        * (2 * math.pi * math.e / a)
        * energy_one
        * (3 + positive_part(math.log(a / (2 * math.pi * math.e**2))))
    )


def bound_check_general(n: int, a: float, trap: TrapPotential,
                        table: CriticalFrequencyTable) -> BoundCheck:
    """Both bounds on Omega_n that hold for any admissible trap."""
    if not a > 0:
        raise ValueError(f"The general bounds on Omega_n need a > 0, got {a}")
    upper = general_upper_bound(n, a, table.energies[1])
    lower = general_lower_bound(n, table.energies[n + 1], trap)
    return _check(table.omega(n), upper, lower)


def harmonic_upper_bound(n: int, a: float) -> float:
    """(2n+1) Xi(a)."""
    return (2 * n + 1) * xi(a) if a > 0 else math.inf


def harmonic_lower_bound(n: int, a: float) -> float:
    """(2n+1) / ((n+2) sqrt(1 + a / (b_{n+1} (n+2))))."""
    return (2 * n + 1) / ((n + 2) * math.sqrt(1 + a / (b_n(n + 1) * (n + 2))))


def bound_check_harmonic(n: int, a: float, omega_n: float) -> BoundCheck:
    """The harmonic-trap bounds on an observed Omega_n(a)."""
    if a < 0:
        raise ValueError(f"Coupling must be non-negative, got {a}")
    return _check(omega_n, harmonic_upper_bound(n, a), harmonic_lower_bound(n, a))


@dataclass
class CriticalEntry:
    n: int
    energy: float
    omega: float
    upper: float = math.inf
    lower: float = 0.0
    slope: float = math.nan  # dOmega_n/da

    @property
    def slack_upper(self) -> float:
        return self.upper - self.omega

    @property
    def slack_lower(self) -> float:
        return self.omega - self.lower

    @property
    def ok(self) -> bool:
        return self.slack_upper >= BOUND_SLACK and self.slack_lower >= BOUND_SLACK


@dataclass
class CriticalFrequencyTable:
    """Critical frequencies at one coupling, with the bounds that apply to the trap."""

    a: float
    entries: List[CriticalEntry]
    energies: Dict[int, float] = field(default_factory=dict)

    def omega(self, n: int) -> float:
        return self.energies[n + 1] - self.energies[n]

    @property
    def n_max(self) -> int:
        return self.entries[-1].n

    def violations(self) -> List[CriticalEntry]:
        return [entry for entry in self.entries if not entry.ok or entry.omega <= BOUND_SLACK]

    def ordered(self) -> bool:
        """Whether Omega_0 < Omega_1 < ...; observed in the harmonic trap, not guaranteed."""
        omegas = [entry.omega for entry in self.entries]
        return all(x < y for x, y in zip(omegas, omegas[1:]))


def critical_table(
    a: float,
    n_max: int,
    trap: TrapPotential,
    ladder: VortexLadder | None = None,
    jobs: int = 1,
) -> CriticalFrequencyTable:
    """Omega_n(a) for n = 0..n_max with their bounds; the radial solves run concurrently."""
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    ladder = ladder or VortexLadder(trap, n_top=n_max + 1)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        energies = dict(
            zip(range(n_max + 2), executor.map(lambda n: ladder.energy(n, a), range(n_max + 2)))
        )
    table = CriticalFrequencyTable(a, [], energies)
    for n in range(n_max + 1):
        slope = ladder.get(n + 1, a).quartic - ladder.get(n, a).quartic
        entry = CriticalEntry(n, energies[n], table.omega(n), slope=slope)
        if trap.is_harmonic:
            check = bound_check_harmonic(n, a, entry.omega)
        elif a > 0:
            check = bound_check_general(n, a, trap, table)
        else:
            check = None
        if check is not None:
            entry.upper, entry.lower = check.upper, check.lower
        if not entry.ok:
            log.warning("Omega_%d(%g) = %.10g outside [%.10g, %.10g]",
                        n, a, entry.omega, entry.lower, entry.upper)
        table.entries.append(entry)
    if not table.ordered():
        log.info("Critical frequencies at a=%g are not increasing in n", a)
    return table


def frequency_chain_ok(table: CriticalFrequencyTable, tolerance: float = -BOUND_SLACK) -> bool:
    """Omega_{n+1} <= ((2n+3)/(2n+1)) Omega_n for every consecutive pair in the table."""
    for entry, following in zip(table.entries, table.entries[1:]):
        n = entry.n
        if following.omega > (2 * n + 3) / (2 * n + 1) * entry.omega + tolerance:
            return False
    return True


class CentrifugalBounds(NamedTuple):
    omega_lower: float
    omega_n: float
    omega_next: float
    omega_next_upper: float


def centrifugal_bounds(n: int, a: float, ladder: VortexLadder) -> CentrifugalBounds:
    """With I = 2 pi int f_{n+1}**2 / r dr:
    (2n+1) I <= Omega_n and Omega_{n+1} <= (2n+3) I."""
    profile = ladder.get(n + 1, a)
    grid = profile.grid
    inverse_square = float(np.sum(grid.mass * profile.f.values**2 / grid.r**2))
    return CentrifugalBounds(
        (2 * n + 1) * inverse_square,
        critical_frequency(n, a, ladder.trap, ladder=ladder),
        critical_frequency(n + 1, a, ladder.trap, ladder=ladder),
        (2 * n + 3) * inverse_square,
    )


def breaking_sufficient(omega: float, table: CriticalFrequencyTable,
                        n_big: float | None = None) -> bool:
    """Whether a vortex with index >= N beats every vortex below N at this omega:
    omega > max_j (1/(N-j)) sum_{i=j}^{N-1} Omega_i. Combined with the instability of all
    vortices with index >= N = N_omega (harmonic trap) this forces symmetry breaking."""
    big = int(math.ceil(n_big if n_big is not None else n_omega(omega)))
    if big - 1 > table.n_max:
        raise ValueError(f"The table stops at n={table.n_max}, but N={big} is needed")
    omegas = [table.omega(i) for i in range(big)]
    threshold = max(sum(omegas[j:]) / (big - j) for j in range(big))
    return omega > threshold


def table_rows(tables: Iterable[CriticalFrequencyTable]) -> List[Dict[str, float]]:
    rows = []
    for table in tables:
        for entry in table.entries:
            rows.append({
                "n": entry.n,
                "a": table.a,
                "E_n": entry.energy,
                "Omega_n": entry.omega,
                "slope": entry.slope,
                "upper": entry.upper,
                "lower": entry.lower,
                "slack_upper": entry.slack_upper,
                "slack_lower": entry.slack_lower,
            })
    rows.sort(key=lambda row: (row["a"], row["n"]))
    return rows


def table_to_csv(tables: Iterable[CriticalFrequencyTable], stream: IO[str]):
    """Write the tables with the header n, a, E_n, Omega_n, slope, upper, lower, slack_upper,
    slack_lower."""
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in table_rows(tables):
        writer.writerow({key: repr(value) if isinstance(value, float) else value
                         for key, value in row.items()})
