"""Energetic stability of n-vortices.

Around a stationary vortex phi = f(r) e^{in theta} the second variation
    Q(w) = <w|H_0 + 4a|phi|**2 - mu|w> + 2a Re int conj(phi)**2 w**2
splits into channels m >= 0, w_m = A e^{i(n-m) theta} + B e^{i(n+m) theta}. Each channel is a
coupled pair of radial operators on the same finite-volume grid the radial solver uses, so that
the phase mode i phi is an exact discrete zero mode.

Perturbations are passed around as channel components: a dict mapping an angular momentum k to
the complex radial samples c_k(r) of the term c_k(r) e^{ik theta}.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from lxml import etree
from scipy import sparse
from scipy.linalg import eig_banded
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from gprotor.analytic_bounds import c_n, d_n
from gprotor.constants import (
    CONDV_TOLERANCE,
    EIGEN_MODES,
    MIN_CHANNELS,
    STABILITY_TOLERANCE,
    STATIONARITY_TOLERANCE,
    ZERO_MODE_FACTOR,
)
from gprotor.model import (
    ConvergenceError,
    Field2D,
    GpParameters,
    RadialGrid,
    TrapPotential,
    embed_profile,
)
from gprotor.radial_solver import VortexProfile, stationarity_residual

log = logging.getLogger(__name__)

ChannelComponents = Mapping[int, np.ndarray]


class Verdict(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class StabilityOptions:
    """Settings for analyze_stability.

    Parameters:
        channels: highest channel m analyzed; 0 means max(2n, MIN_CHANNELS)
        tolerance: eigenvalues and certificates below -tolerance certify instability
        zero_mode_factor: deflated modes within zero_mode_factor * h**2 of zero are symmetry modes
        eigensolver: 'banded' (LAPACK, exact) or 'arpack' (shift-invert Lanczos)
        modes: eigenpairs computed per channel before deflation
        jobs: worker threads for the channel eigenproblems
        stationarity_tolerance: profiles with a larger Euler-Lagrange residual are refused
        certificates: whether to evaluate the analytic trial functions
    """

    channels: int = 0
    tolerance: float = STABILITY_TOLERANCE
    zero_mode_factor: float = ZERO_MODE_FACTOR
    eigensolver: str = "banded"
    modes: int = EIGEN_MODES
    jobs: int = 1
    stationarity_tolerance: float = STATIONARITY_TOLERANCE
    certificates: bool = True

    def __post_init__(self):
        if self.eigensolver not in ("banded", "arpack"):
            raise ValueError(f"Unknown eigensolver {self.eigensolver}")


@dataclass(frozen=True, eq=False)
class ChannelOperator:
    """The quadratic form of one channel as a symmetric pentadiagonal matrix K.

    Unknowns are interleaved per node: (X_0, Y_0, X_1, Y_1, ...). For m >= 1, X = A and Y = B are
    the real amplitudes of the components with angular momenta n - m and n + m. For m = 0,
    X and Y are the real and imaginary part of the amplitude of the vortex's own component.
    Q(w_m) = x.K.x, and <w_m|w_m> = x.M.x with the diagonal mass M.
    """

    n: int
    m: int
    grid: RadialGrid
    main: np.ndarray
    off1: np.ndarray
    off2: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.grid.size

    @property
    def mass(self) -> np.ndarray:
        return np.repeat(self.grid.mass, 2)

    def join(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        x = np.empty(self.size)
        x[0::2] = first
        x[1::2] = second
        return x

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[0::2], x[1::2]

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = self.main * x
        out[:-1] += self.off1 * x[1:]
        out[1:] += self.off1 * x[:-1]
        out[:-2] += self.off2 * x[2:]
        out[2:] += self.off2 * x[:-2]
        return out

    def quadratic(self, x: np.ndarray) -> float:
        return float(x @ self.apply(x))

    def matrix(self) -> sparse.csr_array:
        return sparse.diags_array(
            [self.off2, self.off1, self.main, self.off1, self.off2], offsets=[-2, -1, 0, 1, 2]
        ).tocsr()

    def symmetrized_bands(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bands of M^(-1/2) K M^(-1/2)."""
        s = 1 / np.sqrt(self.mass)
        return self.main * s * s, self.off1 * s[:-1] * s[1:], self.off2 * s[:-2] * s[2:]

    def coupling(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-node diagonal entries of the X block, the Y block and the X-Y coupling, divided by
        the cell areas."""
        mass = self.grid.mass
        return self.main[0::2] / mass, self.main[1::2] / mass, self.off1[0::2] / mass


def _integer_n(profile: VortexProfile) -> int:
    if float(profile.n) != int(profile.n):
        raise ValueError(f"Stability needs an integer winding number, got n={profile.n}")
    return int(profile.n)


def _resolve_params(profile: VortexProfile, params: GpParameters | None) -> GpParameters:
    if params is None:
        return profile.params
    if params.a != profile.params.a:
        raise ValueError(
            f"Parameters with a={params.a} do not match the profile computed at a={profile.a}"
        )
    params.validate(profile.trap)
    return params


def require_stationary(profile: VortexProfile, tolerance: float = STATIONARITY_TOLERANCE):
    residual = stationarity_residual(profile)
    if residual > tolerance:
        raise ValueError(
            f"Profile n={profile.n:g} a={profile.a:g} is not stationary (residual {residual:.3e});"
            " its second variation is meaningless"
        )


def channel_operator(
    profile: VortexProfile, m: int, params: GpParameters | None = None
) -> ChannelOperator:
    """Assemble the channel-m block of Q around the vortex."""
    if m < 0:
        raise ValueError(f"Channel index must be non-negative, got {m}")
    n = _integer_n(profile)
    params = _resolve_params(profile, params)
    grid = profile.grid
    a, omega = params.a, params.omega
    mass = grid.mass
    f2 = profile.f.values ** 2
    common = profile.trap(grid.r) + 4 * a * f2 - profile.mu_tilde
    if m == 0:
        diag_x, off_x = grid.kinetic_bands(n**2)
        diag_y, off_y = diag_x, off_x
        block_x = diag_x + mass * (common + 2 * a * f2)
        block_y = diag_y + mass * (common - 2 * a * f2)
        cross = np.zeros(grid.size)
    else:
        diag_x, off_x = grid.kinetic_bands((n - m) ** 2)
        diag_y, off_y = grid.kinetic_bands((n + m) ** 2)
        block_x = diag_x + mass * (common + m * omega)
        block_y = diag_y + mass * (common - m * omega)
        cross = mass * 2 * a * f2
    main = np.empty(2 * grid.size)
    main[0::2] = block_x
    main[1::2] = block_y
    off1 = np.zeros(2 * grid.size - 1)
    off1[0::2] = cross
    off2 = np.empty(2 * grid.size - 2)
    off2[0::2] = off_x
    off2[1::2] = off_y
    return ChannelOperator(n, m, grid, main, off1, off2)


def sum_difference_coupling(op: ChannelOperator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node entries of the channel in the basis P = (A + B)/sqrt 2, M = (A - B)/sqrt 2:
    the P block, the M block and the P-M coupling, each divided by the cell areas.

    The coupling is m omega - 2 n m / r**2, and the centrifugal part of both blocks is
    (n**2 + m**2) / r**2."""
    x, y, cross = op.coupling()
    return (x + y) / 2 + cross, (x + y) / 2 - cross, (x - y) / 2


def _lowest_banded(op: ChannelOperator, count: int) -> Tuple[np.ndarray, np.ndarray]:
    main, off1, off2 = op.symmetrized_bands()
    bands = np.zeros((3, op.size))
    bands[0, 2:] = off2
    bands[1, 1:] = off1
    bands[2] = main
    return eig_banded(bands, lower=False, select="i", select_range=(0, count - 1))


def _lowest_arpack(op: ChannelOperator, count: int) -> Tuple[np.ndarray, np.ndarray]:
    main, off1, off2 = op.symmetrized_bands()
    matrix = sparse.diags_array(
        [off2, off1, main, off1, off2], offsets=[-2, -1, 0, 1, 2]
    ).tocsc()
    # Gershgorin bound, so the shift sits strictly below the spectrum
    radius = np.zeros(op.size)
    radius[:-1] += np.abs(off1)
    radius[1:] += np.abs(off1)
    radius[:-2] += np.abs(off2)
    radius[2:] += np.abs(off2)
    shift = float(np.min(main - radius)) - 1.0
    try:
        values, vectors = eigsh(matrix, k=count, sigma=shift, which="LM")
    except ArpackNoConvergence as e:
        raise ConvergenceError(f"ARPACK did not converge in channel m={op.m}", math.nan, 0) from e
    order = np.argsort(values)
    return values[order], vectors[:, order]


def lowest_modes(
    op: ChannelOperator, count: int = EIGEN_MODES, eigensolver: str = "banded"
) -> Tuple[np.ndarray, np.ndarray]:
    """The count lowest eigenvalues of K x = lambda M x, with M-normalized eigenvectors as
    columns."""
    count = min(count, op.size - 1)
    if eigensolver == "arpack":
        values, vectors = _lowest_arpack(op, count)
    else:
        values, vectors = _lowest_banded(op, count)
    return values, vectors / np.sqrt(op.mass)[:, None]


def lowest_eigenvalue(
    op: ChannelOperator,
    deflate: Sequence[np.ndarray] = (),
    count: int = EIGEN_MODES,
    eigensolver: str = "banded",
    zero_modes: List[float] | None = None,
    zero_mode_factor: float = ZERO_MODE_FACTOR,
) -> float:
    """Smallest eigenvalue of the channel on the complement of the deflation vectors.

    An eigenvector counts as deflated when more than half of its weight lies in the span of
    the deflation vectors and its eigenvalue is within zero_mode_factor * h**2 of zero. Deflated
    eigenvalues are appended to zero_modes when a list is given."""
    values, vectors = lowest_modes(op, count + len(deflate), eigensolver)
    if not deflate:
        return float(values[0])
    mass = op.mass
    basis = []
    for vector in deflate:
        vector = np.asarray(vector, dtype=float)
        for other in basis:
            vector = vector - (other @ (mass * vector)) * other
        norm = math.sqrt(float(vector @ (mass * vector)))
        if norm > 0:
            basis.append(vector / norm)
    threshold = zero_mode_factor * op.grid.step**2
    for value, vector in zip(values, vectors.T):
        overlap = sum(float(b @ (mass * vector)) ** 2 for b in basis)
        if overlap > 0.5:
            if abs(value) <= threshold:
                if zero_modes is not None:
                    zero_modes.append(float(value))
                continue
            log.warning(
                "Channel m=%d: mode overlapping the deflation space has eigenvalue %.3e",
                op.m, value,
            )
        return float(value)
    raise ConvergenceError(f"Deflation removed every computed mode of channel m={op.m}",
                           math.nan, 0)


def phase_mode(op: ChannelOperator, profile: VortexProfile) -> np.ndarray:
    """i phi as a vector of the m = 0 channel."""
    return op.join(np.zeros(op.grid.size), profile.f.values)


def _group_channels(
    w: ChannelComponents, n: int, size: int
) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    channels: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for k, values in w.items():
        values = np.asarray(values, dtype=complex)
        if values.shape != (size,):
            raise ValueError(f"Component k={k} has {values.shape} samples, expected {size}")
        m = abs(int(k) - n)
        first, second = channels.get(m, (np.zeros(size, complex), np.zeros(size, complex)))
        if int(k) <= n:
            first = first + values
        else:
            second = second + values
        channels[m] = (first, second)
    return channels


def apply_q_components(
    w: ChannelComponents, profile: VortexProfile, params: GpParameters | None = None
) -> float:
    """Q(w) for channel components, without the stationarity check."""
    n = _integer_n(profile)
    total = 0.0
    for m, (first, second) in _group_channels(w, n, profile.grid.size).items():
        op = channel_operator(profile, m, params)
        if m == 0:
            total += op.quadratic(op.join(first.real, first.imag))
        else:
            total += op.quadratic(op.join(first.real, second.real))
            total += op.quadratic(op.join(first.imag, -second.imag))
    return total


def _q_form_2d(w: Field2D, profile: VortexProfile, params: GpParameters) -> float:
    from gprotor.solver2d import apply_h0

    grid = w.grid
    phi = embed_profile(profile, grid).values
    mu = profile.mu_tilde - profile.n * params.omega
    potential = profile.trap(grid.radius, True)
    values = w.values
    action = apply_h0(values, grid, potential, params.omega)
    action = action + (4 * params.a * np.abs(phi) ** 2 - mu) * values
    linear = float(np.real(np.sum(np.conj(values) * action)))
    quartic = float(np.real(np.sum(np.conj(phi) ** 2 * values**2)))
    return (linear + 2 * params.a * quartic) * grid.cell_area


def q_form(
    w: ChannelComponents | Field2D,
    profile: VortexProfile,
    params: GpParameters | None = None,
    tolerance: float = STATIONARITY_TOLERANCE,
) -> float:
    """The second variation Q(w) around a stationary vortex.

    Parameters:
        w: either channel components {k: c_k(r)} on the profile's grid, evaluated with the
            channel operators, or a field on a plane, evaluated spectrally
        profile: the vortex; refused when its Euler-Lagrange residual exceeds tolerance
        params: angular velocity to analyze at (defaults to the profile's)
    """
    params = _resolve_params(profile, params)
    require_stationary(profile, tolerance)
    if isinstance(w, Field2D):
        return _q_form_2d(w, profile, params)
    return apply_q_components(w, profile, params)


def channel_energy(
    components: ChannelComponents, profile: VortexProfile, params: GpParameters | None = None
) -> float:
    """E^GP[psi] - mu int |psi|**2 for psi = sum_k c_k(r) e^{ik theta}, on the profile's grid.

    The quartic term is averaged over enough angles to be exact for the given components, so
    second differences of this energy around the vortex reproduce 2 Q(w)."""
    params = _resolve_params(profile, params)
    grid = profile.grid
    mu = profile.mu_tilde - profile.n * params.omega
    potential = profile.trap(grid.r)
    keys = sorted(int(k) for k in components)
    total = 0.0
    for k in keys:
        c = np.asarray(components[k], dtype=complex)
        if c.shape != (grid.size,):
            raise ValueError(f"Component k={k} has {c.shape} samples, expected {grid.size}")
        total += float(c.real @ grid.apply_kinetic(k**2, c.real))
        total += float(c.imag @ grid.apply_kinetic(k**2, c.imag))
        total += float(np.sum(grid.mass * (potential - params.omega * k - mu) * np.abs(c) ** 2))
    spread = keys[-1] - keys[0] if keys else 0
    angles = 4 * spread + 4
    theta = 2 * math.pi * np.arange(angles) / angles
    phases = np.exp(1j * np.outer(keys, theta))
    coefficients = np.array([np.asarray(components[k], dtype=complex) for k in keys])
    psi = coefficients.T @ phases
    quartic = float(np.sum(grid.mass * np.mean(np.abs(psi) ** 4, axis=1)))
    return total + params.a * quartic


def vortex_components(profile: VortexProfile) -> Dict[int, np.ndarray]:
    """The vortex itself as channel components."""
    return {_integer_n(profile): profile.f.values.astype(complex)}


def d_mode_components(profile: VortexProfile, d: int) -> Dict[int, np.ndarray]:
    """The trial perturbation (A + B) e^{i(n-d) theta} + (A - B) e^{i(n+d) theta} with
    A = f'/r**(d-1) and B = n f / r**d, written through g = f / r**n:
    A + B = 2n r**(n-d) g + r**(n-d+1) g' and A - B = r**(n-d+1) g'."""
    n = _integer_n(profile)
    if d < 1 or (d > n and d != 1):
        raise ValueError(f"The d-mode needs 1 <= d <= n, got d={d}, n={n}")
    r = profile.grid.r
    g = profile.g.values
    dg = np.gradient(g, r)
    plus = 2 * n * r ** (n - d) * g + r ** (n - d + 1) * dg
    minus = r ** (n - d + 1) * dg
    return {n - d: plus.astype(complex), n + d: minus.astype(complex)}


def condv_curve(trap: TrapPotential, r: np.ndarray, d: int) -> np.ndarray:
    """(r (V / r**(2(d-1)))')' by finite differences on the nodes r."""
    scaled = trap(r) / r ** (2 * (d - 1))
    inner = r * np.gradient(scaled, r)
    return np.gradient(inner, r)


def condv_holds(trap: TrapPotential, grid: RadialGrid, d: int,
                tolerance: float = CONDV_TOLERANCE) -> bool:
    """Whether (r (V / r**(2(d-1)))')' <= 0 at every node."""
    curve = condv_curve(trap, grid.r, d)
    return bool(np.max(curve) <= tolerance)


def condmu_holds(profile: VortexProfile, d: int, params: GpParameters | None = None) -> bool:
    """mu_tilde > n omega (1 + 2/(d-1))."""
    if d < 2:
        raise ValueError(f"The chemical potential condition needs d >= 2, got {d}")
    params = _resolve_params(profile, params)
    return profile.mu_tilde > profile.n * params.omega * (1 + 2 / (d - 1))


def condomega_holds(profile: VortexProfile, params: GpParameters | None = None) -> bool:
    """Harmonic trap, n >= 2: omega < 1 + (1 + a int |phi|**4) / (2n) implies instability."""
    params = _resolve_params(profile, params)
    if not profile.trap.is_harmonic:
        raise ValueError("The angular velocity condition is stated for the harmonic trap")
    if profile.n < 2:
        return False
    return params.omega < 1 + (1 + params.a * profile.quartic) / (2 * profile.n)


def certificate_large_n(profile: VortexProfile, params: GpParameters | None = None) -> float:
    """Q of the Gaussian bump (2/pi)**0.5 exp(-r**2) rescaled to the core size
    1/(c_n mu_tilde**0.5), placed at angular momentum zero."""
    params = _resolve_params(profile, params)
    n = _integer_n(profile)
    if n < 1:
        raise ValueError("The large-n certificate needs n >= 1")
    scale = c_n(n) * math.sqrt(profile.mu_tilde)
    r = profile.grid.r
    bump = scale * math.sqrt(2 / math.pi) * np.exp(-((scale * r) ** 2))
    return q_form({0: bump.astype(complex)}, profile, params)


def large_n_bound(profile: VortexProfile, params: GpParameters | None = None) -> float:
    """n omega - mu_tilde (1 - d_n), above the large-n certificate in the harmonic trap."""
    params = _resolve_params(profile, params)
    return profile.n * params.omega - profile.mu_tilde * (1 - d_n(profile.n))


def certificate_d_mode(
    profile: VortexProfile, d: int, params: GpParameters | None = None
) -> float:
    """Q of the d-mode trial perturbation. Negative values certify instability; the conditions
    on the trap and on mu_tilde under which negativity is guaranteed are checked and logged."""
    params = _resolve_params(profile, params)
    n = _integer_n(profile)
    if d < 2:
        raise ValueError(f"The d-mode certificate needs d >= 2, got {d}")
    if d > n:
        raise ValueError(f"The d-mode certificate needs d <= n, got d={d}, n={n}")
    if not condv_holds(profile.trap, profile.grid, d):
        log.warning("Trap %s violates the curvature condition for d=%d", profile.trap, d)
    if not condmu_holds(profile, d, params):
        log.info("mu_tilde=%g is below n omega (1 + 2/(d-1)) for n=%d d=%d",
                 profile.mu_tilde, n, d)
    return q_form(d_mode_components(profile, d), profile, params)


def d_mode_expression(
    profile: VortexProfile, d: int, params: GpParameters | None = None
) -> float:
    """Closed form of the d-mode Q value for a stationary vortex:
    8 pi int f**2 / r**(2d-1) (-mu (d-1)**2 + a (d-1)**2 f**2 + (d-1) n omega
                               + r**(2d-1) (r (V/r**(2(d-1)))')' / 4) dr."""
    params = _resolve_params(profile, params)
    n = profile.n
    grid = profile.grid
    r = grid.r
    f2 = profile.f.values ** 2
    mu = profile.mu_tilde - n * params.omega
    k = d - 1
    integrand = f2 / r ** (2 * d - 1) * (
        -mu * k**2 + params.a * k**2 * f2 + k * n * params.omega
    ) + f2 * condv_curve(profile.trap, r, d) / 4
    # 8 pi int F dr = 4 sum(mass F / r)
    return float(4 * np.sum(grid.mass * integrand / r))


def certificate_small_a(profile: VortexProfile, params: GpParameters | None = None) -> float:
    """Q of the Gaussian ground state pi**-0.5 exp(-r**2/2) at angular momentum zero; at most
    n (omega - 2) + a/pi in the harmonic trap."""
    params = _resolve_params(profile, params)
    if not profile.trap.is_harmonic:
        raise ValueError("The small coupling certificate needs the harmonic trap")
    n = _integer_n(profile)
    if n < 1:
        raise ValueError("The small coupling certificate needs n >= 1")
    r = profile.grid.r
    gaussian = np.exp(-(r**2) / 2) / math.sqrt(math.pi)
    return q_form({0: gaussian.astype(complex)}, profile, params)


def small_a_bound(profile: VortexProfile, params: GpParameters | None = None) -> float:
    params = _resolve_params(profile, params)
    return profile.n * (params.omega - 2) + params.a / math.pi


def certificate_translation(profile: VortexProfile, params: GpParameters | None = None) -> float:
    """Q(d phi / dx). Non-negative whenever (r V')' >= 0, for instance in homogeneous traps."""
    params = _resolve_params(profile, params)
    # d/dx (f e^{in theta}) = ((A+B) e^{i(n-1) theta} + (A-B) e^{i(n+1) theta}) / 2
    components = d_mode_components(profile, 1)
    return q_form({k: v / 2 for k, v in components.items()}, profile, params)


@dataclass
class StabilityReport:
    """Per-channel lowest eigenvalues of Q around an n-vortex, with the analytic certificates.

    Parameters:
        n: winding number of the vortex
        params: coupling and angular velocity analyzed
        channels: (m, lowest eigenvalue) with symmetry modes deflated
        verdict: stable, unstable or marginal
        certificates: (name, Q value) of the analytic trial perturbations
        zero_modes: (m, eigenvalue) of the deflated symmetry modes
    """

    n: int
    params: GpParameters
    channels: List[Tuple[int, float]]
    verdict: Verdict
    certificates: List[Tuple[str, float]] = field(default_factory=list)
    zero_modes: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def lowest(self) -> Tuple[int, float]:
        return min(self.channels, key=lambda item: item[1])

    def __str__(self) -> str:
        lines = [f"{self.n}-vortex a={self.params.a:g} omega={self.params.omega:g}: "
                 f"{self.verdict.value}"]
        for m, value in self.channels:
            lines.append(f"  channel {m:3d}  lambda_min = {value: .10e}")
        for name, value in self.certificates:
            lines.append(f"  certificate {name:<12s} Q = {value: .10e}")
        return "\n".join(lines)


def judge_channels(channels, certificates, tolerance: float) -> Verdict:
    """Unstable when any channel or certificate is below -tolerance. Marginal only when every
    channel minimum lies inside (-tolerance, tolerance). Stable otherwise."""
    if any(value < -tolerance for _, value in channels):
        return Verdict.UNSTABLE
    if any(value < -tolerance for _, value in certificates):
        return Verdict.UNSTABLE
    if channels and all(abs(value) < tolerance for _, value in channels):
        return Verdict.MARGINAL
    return Verdict.STABLE


def analyze_stability(
    profile: VortexProfile,
    params: GpParameters | None = None,
    opts: StabilityOptions | None = None,
) -> StabilityReport:
    """Lowest eigenvalue of Q in every channel 0..M, plus the certificates that apply.

    Stability is only certified up to the channel cutoff and the grid resolution; negative
    values certify instability."""
    opts = opts or StabilityOptions()
    params = _resolve_params(profile, params)
    require_stationary(profile, opts.stationarity_tolerance)
    n = _integer_n(profile)
    top = opts.channels or max(2 * n, MIN_CHANNELS)

    def solve(m: int) -> Tuple[int, float, List[float]]:
        op = channel_operator(profile, m, params)
        deflate = [phase_mode(op, profile)] if m == 0 else []
        zero_modes: List[float] = []
        value = lowest_eigenvalue(op, deflate, opts.modes, opts.eigensolver, zero_modes,
                                  opts.zero_mode_factor)
        log.debug("n=%d channel %d: lambda_min=%.10g", n, m, value)
        return m, value, zero_modes

    with ThreadPoolExecutor(max_workers=max(1, opts.jobs)) as executor:
        results = sorted(executor.map(solve, range(top + 1)))
    channels = [(m, value) for m, value, _ in results]
    zero_modes = [(m, z) for m, _, zs in results for z in zs]

    certificates: List[Tuple[str, float]] = []
    if opts.certificates:
        certificates.append(("translation", certificate_translation(profile, params)))
        if n >= 1:
            certificates.append(("large_n", certificate_large_n(profile, params)))
            if profile.trap.is_harmonic:
                certificates.append(("small_a", certificate_small_a(profile, params)))
        for d in range(2, n + 1):
            if condv_holds(profile.trap, profile.grid, d):
                certificates.append((f"d_mode_{d}", certificate_d_mode(profile, d, params)))

    verdict = judge_channels(channels, certificates, opts.tolerance)
    log.info("Stability of the %d-vortex at a=%g omega=%g: %s (lowest %d: %.6g)",
             n, params.a, params.omega, verdict.value, *min(channels, key=lambda c: c[1]))
    return StabilityReport(n, params, channels, verdict, certificates, zero_modes)


def report_to_xml(report: StabilityReport) -> str:
    """Structured text export of a stability report."""
    root = etree.Element(
        "stability",
        n=str(report.n),
        a=repr(report.params.a),
        omega=repr(report.params.omega),
        verdict=report.verdict.value,
    )
    for m, value in report.channels:
        etree.SubElement(root, "channel", m=str(m), lambda_min=repr(value))
    for m, value in report.zero_modes:
        etree.SubElement(root, "zero_mode", m=str(m), value=repr(value))
    for name, value in report.certificates:
        etree.SubElement(root, "certificate", name=name, q=repr(value))
    return etree.tostring(root, pretty_print=True, encoding="unicode")
