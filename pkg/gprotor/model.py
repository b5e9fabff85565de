"""Domain types shared by all gprotor solvers: traps, parameters, grids, radial states and
complex fields on a plane, with the quadrature and angular Fourier analysis built on them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy import fft
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from gprotor.analytic_bounds import b_n
from gprotor.constants import (
    ENDPOINT_NODES,
    GRID_MARGIN,
    GRID_POINTS,
    RADIAL_MARGIN,
    RADIAL_STEP,
)

log = logging.getLogger(__name__)

# Bernoulli polynomial values B_2k(1/2) / (2k)! for the midpoint Euler-Maclaurin series
_MIDPOINT_SERIES = {1: -1 / 24, 3: 7 / 5760, 5: -31 / 967680}


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerances.

    Parameters:
        message: what was being solved
        residual: the last residual norm reached
        iterations: how many iterations were spent
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class TrapKind(Enum):
    HARMONIC = "harmonic"
    HOMOGENEOUS = "homogeneous"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class TrapPotential:
    """A radial confining potential V(r) >= 0 with inf V = 0.

    Use the constructors harmonic(), homogeneous(), tabulated(), from_file() or from_spec()
    rather than building one directly.

    Parameters:
        kind: the family of the potential
        exponent: nu for V = r**nu; 2 for the harmonic trap
        samples_r: sample radii of a tabulated potential (strictly increasing)
        samples_v: potential values at samples_r
    """

    kind: TrapKind
    exponent: float = 2.0
    samples_r: np.ndarray | None = None
    samples_v: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is TrapKind.HOMOGENEOUS and not self.exponent >= 2:
            raise ValueError(f"Homogeneous trap exponent {self.exponent} must be at least 2")
        if self.kind is TrapKind.TABULATED:
            if self.samples_r is None or self.samples_v is None:
                raise ValueError("A tabulated trap needs both radii and potential samples")
            r = np.array(self.samples_r, dtype=float)
            v = np.array(self.samples_v, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or len(r) < 4:
                raise ValueError(f"Tabulated trap needs two equal 1D sample arrays, got {r.shape}")
            if r[0] < 0 or np.any(np.diff(r) <= 0):
                raise ValueError("Tabulated trap radii must be non-negative and increasing")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("Tabulated trap values must be finite and non-negative")
            r.setflags(write=False)
            v.setflags(write=False)
            object.__setattr__(self, "samples_r", r)
            object.__setattr__(self, "samples_v", v)

    @classmethod
    def harmonic(cls) -> TrapPotential:
        return cls(TrapKind.HARMONIC)

    @classmethod
    def homogeneous(cls, exponent: float) -> TrapPotential:
        return cls(TrapKind.HOMOGENEOUS, exponent=float(exponent))

    @classmethod
    def tabulated(cls, r, v) -> TrapPotential:
        return cls(TrapKind.TABULATED, samples_r=np.asarray(r), samples_v=np.asarray(v))

    @classmethod
    def from_file(cls, path: str | Path) -> TrapPotential:
        """Read a tabulated potential from two whitespace separated columns r, V(r).

        Lines starting with # are ignored."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"No potential table at {path}")
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] < 2:
            raise ValueError(f"Potential table {path} needs two columns, found {data.shape[1]}")
        log.info("Loaded %d potential samples from %s", data.shape[0], path)
        return cls.tabulated(data[:, 0], data[:, 1])

    @classmethod
    def from_spec(cls, spec: str) -> TrapPotential:
        """Build a trap from a short description: 'harmonic', 'homogeneous:4' or a file path."""
        spec = spec.strip()
        if spec.lower() == "harmonic":
            return cls.harmonic()
        if spec.lower().startswith("homogeneous"):
            _, _, exponent = spec.partition(":")
            try:
                return cls.homogeneous(float(exponent))
            except ValueError:
                raise ValueError(f"Could not read the exponent in trap description {spec}")
        return cls.from_file(spec)

    def __str__(self) -> str:
        if self.kind is TrapKind.HOMOGENEOUS:
            return f"homogeneous:{self.exponent:g}"
        if self.kind is TrapKind.TABULATED:
            return f"tabulated[{len(self.samples_r)}]"
        return self.kind.value

    @property
    def is_harmonic(self) -> bool:
        return self.kind is TrapKind.HARMONIC or (
            self.kind is TrapKind.HOMOGENEOUS and self.exponent == 2
        )

    @property
    def r_limit(self) -> float:
        """Largest radius at which the potential may be evaluated."""
        if self.kind is TrapKind.TABULATED:
            return float(self.samples_r[-1])
        return math.inf

    def __call__(self, r, extrapolate: bool = False) -> np.ndarray:
        return evaluate_potential(self, r, extrapolate=extrapolate)

    def derivative(self, r) -> np.ndarray:
        """V'(r)."""
        r = np.asarray(r, dtype=float)
        if self.kind is TrapKind.TABULATED:
            slope = np.gradient(self.samples_v, self.samples_r)
            return np.interp(r, self.samples_r, slope)
        nu = self.exponent
        return nu * r ** (nu - 1)

    @cached_property
    def omega_c(self) -> float:
        """Critical frequency: V(r) - Omega**2 r**2 / 4 is bounded below for all Omega < omega_c.

        For tabulated traps this cannot be decided from finitely many samples. The value reported
        assumes the outer quarter of the table continues with its smallest V/r**2, which is exact
        for quadratic growth and conservative for anything faster."""
        if self.is_harmonic:
            return 2.0
        if self.kind is TrapKind.HOMOGENEOUS:
            return math.inf
        r, v = self.samples_r, self.samples_v
        tail = r >= r[0] + 0.75 * (r[-1] - r[0])
        tail &= r > 0
        ratio = float(np.min(v[tail] / r[tail] ** 2))
        log.warning(
            "Critical frequency of a tabulated trap estimated from the outer samples: %g",
            2 * math.sqrt(ratio),
        )
        return 2 * math.sqrt(ratio)

    def c_tilde(self, omega_tilde: float) -> float:
        """The constant C in V(r) >= omega_tilde**2 r**2 / 4 - C."""
        if omega_tilde < 0:
            raise ValueError(f"omega_tilde must be non-negative, got {omega_tilde}")
        if self.is_harmonic:
            return 0.0 if omega_tilde <= 2 else math.inf
        if self.kind is TrapKind.HOMOGENEOUS:
            nu = self.exponent
            if omega_tilde == 0:
                return 0.0
            r_star = (omega_tilde**2 / (2 * nu)) ** (1 / (nu - 2))
            return omega_tilde**2 * r_star**2 / 4 - r_star**nu
        excess = omega_tilde**2 * self.samples_r**2 / 4 - self.samples_v
        return max(0.0, float(np.max(excess)))

    @property
    def growth(self) -> Tuple[float, float, float]:
        """(C1, C2, s) with V(r) <= C1 + C2 r**s."""
        if self.kind is not TrapKind.TABULATED:
            return 0.0, 1.0, float(self.exponent)
        r, v = self.samples_r, self.samples_v
        inner = r <= 1
        c1 = float(np.max(v[inner])) if np.any(inner) else 0.0
        c2 = float(np.max(v[~inner] / r[~inner] ** 2)) if np.any(~inner) else 0.0
        return c1, c2, 2.0

    @property
    def is_monotone(self) -> bool:
        if self.kind is TrapKind.TABULATED:
            return bool(np.all(np.diff(self.samples_v) >= 0))
        return True

    def check_invariants(self, r) -> List[str]:
        """Return a description of every trap invariant violated on the radii r (empty if none)."""
        r = np.asarray(r, dtype=float)
        v = self(r)
        problems = []
        if np.any(v < 0):
            problems.append("V(r) < 0 somewhere")
        if float(self(0.0, extrapolate=True)) > 1e-12:
            problems.append("inf V is not 0")
        omega_c = self.omega_c
        top = omega_c if math.isfinite(omega_c) else 10.0
        for omega_tilde in np.linspace(0, top, 16, endpoint=False):
            c = self.c_tilde(omega_tilde)
            if np.any(v < omega_tilde**2 * r**2 / 4 - c - 1e-9 * (1 + np.abs(v))):
                problems.append(f"quadratic lower bound fails at omega_tilde={omega_tilde:g}")
                break
        c1, c2, s = self.growth
        if not 2 <= s < math.inf:
            problems.append(f"growth exponent {s} outside [2, inf)")
        if np.any(v > c1 + c2 * r**s + 1e-9 * (1 + np.abs(v))):
            problems.append("polynomial upper bound fails")
        if self.is_harmonic and (omega_c != 2 or self.c_tilde(1.99) != 0):
            problems.append("harmonic trap must report omega_c = 2 and C = 0")
        return problems


def evaluate_potential(trap: TrapPotential, r, extrapolate: bool = False) -> np.ndarray:
    """V(r) for r >= 0.

    A tabulated potential raises ValueError outside its sampled range unless extrapolate is set,
    in which case the end values are held constant (only used for rough estimates)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("The potential is only defined for r >= 0")
    if trap.kind is TrapKind.TABULATED:
        lo, hi = trap.samples_r[0], trap.samples_r[-1]
        if not extrapolate and (np.any(r < lo) or np.any(r > hi)):
            raise ValueError(
                f"Tabulated potential queried outside its sampled range [{lo:g}, {hi:g}]"
            )
        return np.interp(r, trap.samples_r, trap.samples_v)
    if trap.is_harmonic:
        return r**2
    return r**trap.exponent


@dataclass(frozen=True)
class GpParameters:
    """Coupling a >= 0 and angular velocity omega >= 0."""

    a: float
    omega: float = 0.0

    def __post_init__(self):
        if not self.a >= 0 or not math.isfinite(self.a):
            raise ValueError(f"The coupling a must be finite and non-negative, got {self.a}")
        if not self.omega >= 0 or not math.isfinite(self.omega):
            raise ValueError(f"The angular velocity must be finite and >= 0, got {self.omega}")

    def validate(self, trap: TrapPotential):
        """Reject rotation at or above the critical frequency of the trap."""
        if self.omega >= trap.omega_c:
            raise ValueError(
                f"Angular velocity {self.omega} is not below the critical frequency "
                f"{trap.omega_c} of the {trap} trap; the energy is not bounded below"
            )

    def with_a(self, a: float) -> GpParameters:
        return GpParameters(a, self.omega)


def trial_energy(trap: TrapPotential, n: float, a: float) -> Tuple[float, float]:
    """Best energy over the trial family r**n exp(-r**2 / (2 lam**2)), and the best lam.

    For the harmonic trap this is 2(n+1) sqrt(1 + a/(b_n (n+1))). Tabulated traps are held
    constant beyond their last sample."""
    nodes, weights = laggauss(80)
    # <V> for the trial state: E[V(lam sqrt(t))] with t ~ Gamma(n + 1)
    log_density = n * np.log(nodes) - gammaln(n + 1)
    quartic = 1 / b_n(n)
    best = (math.inf, 1.0)
    for lam in np.geomspace(1e-2, 1e2, 400):
        potential = float(np.sum(weights * np.exp(log_density) * trap(lam * np.sqrt(nodes), True)))
        energy = (n + 1) / lam**2 + potential + a * quartic / lam**2
        if energy < best[0]:
            best = (energy, float(lam))
    return best


def _endpoint_corrections() -> np.ndarray:
    """Corrections (in units of h) to the first nodes of the midpoint rule that make it exact
    for polynomials of degree < ENDPOINT_NODES."""
    t = np.arange(ENDPOINT_NODES) + 0.5
    vandermonde = np.vander(t, ENDPOINT_NODES, increasing=True).T
    rhs = np.zeros(ENDPOINT_NODES)
    for order, coefficient in _MIDPOINT_SERIES.items():
        if order < ENDPOINT_NODES:
            rhs[order] = coefficient * math.factorial(order)
    return np.linalg.solve(vandermonde, rhs)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell-centred radial grid r_i = (i + 1/2) h, i = 0..size-1, so r_max = size * h.

    Two sets of weights are carried:
        weights: dr weights of the midpoint rule with high-order end corrections, used by
            quadrature_radial; exact for polynomials of degree <= 5 in r.
        mass: the finite-volume cell areas 2 pi h r_i, used by every discrete functional so that
            the discrete operators are symmetric and share their zero modes.

    No node sits at r = 0, so the centrifugal term k**2 / r**2 is never evaluated there.
    """

    step: float
    size: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"Radial step must be positive, got {self.step}")
        if self.size < 2 * ENDPOINT_NODES:
            raise ValueError(f"A radial grid needs at least {2 * ENDPOINT_NODES} nodes")

    @classmethod
    def for_trap(
        cls,
        trap: TrapPotential,
        mu_estimate: float,
        step: float = RADIAL_STEP,
        margin: float = RADIAL_MARGIN,
    ) -> RadialGrid:
        """Pick r_max so that V(r_max) >= mu_estimate + margin."""
        target = mu_estimate + margin
        if trap.kind is TrapKind.TABULATED:
            above = np.nonzero(trap.samples_v >= target)[0]
            if len(above) == 0:
                log.warning("Tabulated trap never reaches %g; stopping at its last sample", target)
                r_max = trap.r_limit
            else:
                r_max = float(trap.samples_r[above[0]])
            size = max(2 * ENDPOINT_NODES, int(math.floor(r_max / step)))
        else:
            r_max = target ** (1 / trap.exponent)
            size = max(2 * ENDPOINT_NODES, int(math.ceil(r_max / step)))
        return cls(step, size)

    @property
    def r_max(self) -> float:
        return self.step * self.size

    @cached_property
    def r(self) -> np.ndarray:
        r = (np.arange(self.size) + 0.5) * self.step
        r.setflags(write=False)
        return r

    @cached_property
    def faces(self) -> np.ndarray:
        """Radii of the interior cell faces between node i and node i + 1."""
        faces = (np.arange(1, self.size)) * self.step
        faces.setflags(write=False)
        return faces

    @cached_property
    def weights(self) -> np.ndarray:
        weights = np.full(self.size, self.step)
        corrections = self.step * _endpoint_corrections()
        weights[:ENDPOINT_NODES] += corrections
        weights[-ENDPOINT_NODES:] += corrections[::-1]
        weights.setflags(write=False)
        return weights

    @cached_property
    def mass(self) -> np.ndarray:
        mass = 2 * math.pi * self.step * self.r
        mass.setflags(write=False)
        return mass

    def kinetic_bands(self, k2: float) -> Tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of the symmetric matrix S with
        u.S.u = 2 pi int (u'**2 + k2 u**2 / r**2) r dr, Neumann at r_max."""
        flux = 2 * math.pi * self.faces / self.step
        diag = np.zeros(self.size)
        diag[:-1] += flux
        diag[1:] += flux
        diag += self.mass * k2 / self.r**2
        return diag, -flux

    def apply_kinetic(self, k2: float, u: np.ndarray) -> np.ndarray:
        """S u for the matrix of kinetic_bands, without assembling it."""
        diag, off = self.kinetic_bands(k2)
        out = diag * u
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    def extrapolate_origin(self, values: np.ndarray) -> float:
        """Value at r = 0 of a smooth even function sampled on the grid."""
        return float((9 * values[0] - values[1]) / 8)

    def compatible(self, other: RadialGrid) -> bool:
        return self.size == other.size and self.step == other.step


@dataclass(frozen=True, eq=False)
class RadialState:
    """Real samples of a radial function on a RadialGrid."""

    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"Radial state has {values.shape} samples but the grid has {self.grid.size} nodes"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def norm(self) -> float:
        """2 pi int f**2 r dr in the discrete measure of the solvers."""
        return float(np.sum(self.grid.mass * self.values**2))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __len__(self) -> int:
        return self.grid.size


def quadrature_radial(g: RadialState | np.ndarray, grid: RadialGrid) -> float:
    """2 pi sum_i w_i g(r_i) r_i, approximating 2 pi int g r dr over the disk of radius r_max."""
    values = g.values if isinstance(g, RadialState) else np.asarray(g, dtype=float)
    if values.shape != (grid.size,):
        raise ValueError(f"Cannot integrate {values.shape} samples on a grid of {grid.size} nodes")
    return float(2 * math.pi * np.sum(grid.weights * values * grid.r))


@dataclass(frozen=True)
class Grid2D:
    """Square uniform periodic grid on [-extent, extent)**2 with points nodes per side.

    Arrays are indexed [i, j] with x along axis 0 and y along axis 1."""

    points: int
    extent: float

    def __post_init__(self):
        if self.points < 8 or self.points % 2:
            raise ValueError(f"A 2D grid needs an even number (>= 8) of points, got {self.points}")
        if not self.extent > 0:
            raise ValueError(f"Grid extent must be positive, got {self.extent}")

    @classmethod
    def for_trap(
        cls,
        trap: TrapPotential,
        params: GpParameters,
        points: int = GRID_POINTS,
        margin: float = GRID_MARGIN,
    ) -> Grid2D:
        """Cover the rotating Thomas-Fermi radius: V(r) - omega**2 r**2 / 4 >= mu + margin."""
        energy, _ = trial_energy(trap, 0, params.a)
        target = 2 * energy + margin
        r = 1.0
        while float(trap(r, True)) - params.omega**2 * r**2 / 4 < target and r < 1e3:
            r *= 1.05
        if r * math.sqrt(2) > trap.r_limit:
            raise ValueError(f"Tabulated trap does not reach the grid corner at r={r * 1.42:g}")
        return cls(points, r)

    @property
    def spacing(self) -> float:
        return 2 * self.extent / self.points

    @property
    def n_x(self) -> int:
        return self.points

    @property
    def n_y(self) -> int:
        return self.points

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @cached_property
    def x(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.points)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        x, y = self.mesh
        return np.hypot(x, y)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2 * math.pi * fft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        """Wavenumbers for odd derivatives, with the Nyquist mode removed."""
        k = self.wavenumbers.copy()
        k[self.points // 2] = 0.0
        return k

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        k = self.wavenumbers
        return k[:, None] ** 2 + k[None, :] ** 2


@dataclass(frozen=True, eq=False)
class Field2D:
    """Complex samples of a wavefunction on a Grid2D."""

    values: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        shape = (self.grid.points, self.grid.points)
        if values.shape != shape:
            raise ValueError(f"Field has shape {values.shape}, expected {shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def norm(self) -> float:
        """int |phi|**2 d**2x."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_area)

    def normalized(self) -> Field2D:
        norm = self.norm()
        if norm == 0:
            raise ValueError("Cannot normalize a vanishing field")
        return Field2D(self.values / math.sqrt(norm), self.grid)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def rotated(self, angle: float) -> Field2D:
        """The field rotated counterclockwise: phi(R(-angle) x)."""
        return Field2D(rotate_values(self.values, self.grid, angle), self.grid)

    def to_text(self) -> str:
        """Columns x, y, Re phi, Im phi, |phi|**2."""
        x, y = self.grid.mesh
        rows = np.column_stack(
            [x.ravel(), y.ravel(), self.values.real.ravel(), self.values.imag.ravel(),
             self.density().ravel()]
        )
        lines = ["# x y re_phi im_phi density"]
        lines.extend(" ".join(f"{v:.12e}" for v in row) for row in rows)
        return "\n".join(lines) + "\n"


def _shear(values: np.ndarray, grid: Grid2D, shift: float, axis: int) -> np.ndarray:
    """Sample f(x + shift * y, y) (axis 0) or f(x, y + shift * x) (axis 1) spectrally."""
    k = grid.derivative_wavenumbers
    spectrum = fft.fft(values, axis=axis)
    if axis == 0:
        phase = np.exp(1j * np.outer(k, shift * grid.x))
    else:
        phase = np.exp(1j * np.outer(shift * grid.x, k))
    return fft.ifft(spectrum * phase, axis=axis)


def rotate_values(values: np.ndarray, grid: Grid2D, angle: float) -> np.ndarray:
    """Rotate a field counterclockwise by angle, using three spectral shears per step of at
    most pi/8."""
    steps = int(math.ceil(abs(angle) / (math.pi / 8)))
    if steps == 0:
        return np.array(values, dtype=complex)
    theta = -angle / steps
    a = -math.tan(theta / 2)
    b = math.sin(theta)
    out = np.array(values, dtype=complex)
    for _ in range(steps):
        out = _shear(out, grid, a, 0)
        out = _shear(out, grid, b, 1)
        out = _shear(out, grid, a, 0)
    return out


def fourier_interpolate(field: Field2D, xs, ys, chunk: int = 2048) -> np.ndarray:
    """Evaluate the trigonometric interpolant of a field at arbitrary points."""
    grid = field.grid
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    coefficients = fft.fft2(field.values) / grid.points**2
    nyquist = grid.points // 2
    coefficients[nyquist, :] = 0
    coefficients[:, nyquist] = 0
    k = grid.wavenumbers
    out = np.empty(len(xs), dtype=complex)
    for start in range(0, len(xs), chunk):
        stop = start + chunk
        ex = np.exp(1j * np.outer(xs[start:stop] + grid.extent, k))
        ey = np.exp(1j * np.outer(ys[start:stop] + grid.extent, k))
        out[start:stop] = np.sum((ex @ coefficients) * ey, axis=1)
    return out


def polar_samples(field: Field2D, radii, n_angles: int) -> np.ndarray:
    """Samples of the field on circles: shape (len(radii), n_angles), angles 2 pi k / n_angles."""
    radii = np.asarray(radii, dtype=float)
    theta = 2 * math.pi * np.arange(n_angles) / n_angles
    xs = np.outer(radii, np.cos(theta))
    ys = np.outer(radii, np.sin(theta))
    return fourier_interpolate(field, xs, ys).reshape(len(radii), n_angles)


def polar_quadrature(grid: Grid2D, n_radial: int | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre radii on [0, extent] with weights for int (.) r dr."""
    n_radial = n_radial or max(48, grid.points // 2)
    nodes, weights = leggauss(n_radial)
    radii = grid.extent * (nodes + 1) / 2
    return radii, weights * grid.extent / 2 * radii


def angular_coefficients(
    field: Field2D, m_max: int, n_radial: int | None = None, n_angles: int | None = None
) -> Tuple[np.ndarray, np.ndarray, Dict[int, np.ndarray]]:
    """Azimuthal Fourier coefficients c_m(r) on the polar quadrature radii."""
    if m_max < 0:
        raise ValueError(f"m_max must be non-negative, got {m_max}")
    n_angles = n_angles or max(64, 4 * m_max + 8)
    radii, weights = polar_quadrature(field.grid, n_radial)
    samples = polar_samples(field, radii, n_angles)
    coefficients = fft.fft(samples, axis=1) / n_angles
    channels = {m: coefficients[:, m % n_angles] for m in range(-m_max, m_max + 1)}
    return radii, weights, channels


def angular_spectrum(
    phi: Field2D, m_max: int, n_radial: int | None = None, n_angles: int | None = None
) -> Dict[int, float]:
    """Channel weights p_m = ||P_m phi||**2 for m in [-m_max, m_max]."""
    _, weights, channels = angular_coefficients(phi, m_max, n_radial, n_angles)
    return {
        m: float(2 * math.pi * np.sum(weights * np.abs(c) ** 2)) for m, c in channels.items()
    }


def embed_radial(g: RadialState, n: int, grid: Grid2D) -> Field2D:
    """Place (x + iy)**n g(r) = g(r) r**n e^{in theta} on a 2D grid.

    g is interpolated as a smooth function of r**2 and taken as zero beyond the radial grid."""
    if int(n) != n or n < 0:
        raise ValueError(f"Only integer winding numbers can be placed on a plane, got {n}")
    radial = g.grid
    spline = CubicSpline(radial.r**2, g.values)
    x, y = grid.mesh
    r2 = x**2 + y**2
    inside = r2 <= radial.r_max**2
    profile = np.where(inside, spline(np.minimum(r2, radial.r_max**2)), 0.0)
    return Field2D(profile * (x + 1j * y) ** int(n), grid)


def embed_profile(profile, grid: Grid2D) -> Field2D:
    """The vortex f(r) e^{in theta} of a radial profile (anything with n and g) on a 2D grid."""
    return embed_radial(profile.g, profile.n, grid)
