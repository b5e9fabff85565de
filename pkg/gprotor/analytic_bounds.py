"""Closed-form constants and bounds for rotating condensates, and the BoundReport tree that pairs
each bound with the value a solver observed.

Every evaluator here is a pure function of its arguments. Functions that take a vortex profile
only read its attributes (n, params, trap, energy, mu_tilde, f, g, grid), so this module does not
import the solvers.
"""
from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Iterator, List, Tuple

import numpy as np
from anytree import NodeMixin, PreOrderIter, RenderTree
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln

from gprotor.constants import BOUND_SLACK, XI_BRACKET, XI_TOLERANCE
from gprotor.helpers import positive_part

if TYPE_CHECKING:
    from gprotor.model import Field2D
    from gprotor.radial_solver import VortexProfile

log = logging.getLogger(__name__)


def c_n(n: float) -> float:
    """The constant c_n bounding the growth of g = f / r**n near the vortex core.

    For 0 < n <= 1 the closed form with csc(n pi / 2) is used, for n >= 1 the Gamma-function
    form (sqrt(pi)/n) Gamma(n + 1/2) / Gamma(n); both give pi/2 at n = 1."""
    if not n > 0:
        raise ValueError(f"c_n needs n > 0, got {n}")
    if n <= 1:
        log_power = (
            -n * math.log(2)
            + (n / 2) * math.log((2 - n) / n)
            + math.log(math.pi)
            - math.log(math.sin(n * math.pi / 2))
            - math.log(2 - n)
            - gammaln(n)
        )
        return math.exp(log_power / n)
    return math.sqrt(math.pi) / n * math.exp(gammaln(n + 0.5) - gammaln(n))


def b_n(n: float) -> float:
    """b_n = 2 pi 4**n (n!)**2 / (2n)!, evaluated through log-Gamma.

    1/b_n is the quartic integral of the normalized oscillator state with angular momentum n."""
    if n < 0:
        raise ValueError(f"b_n needs n >= 0, got {n}")
    return math.exp(
        math.log(2 * math.pi) + n * math.log(4) + 2 * gammaln(n + 1) - gammaln(2 * n + 1)
    )


def chi_quartic(n: float) -> float:
    """int |chi_n|**4 for the normalized oscillator state chi_n ~ r**n e^{in theta} e^{-r**2/2}."""
    return 1 / b_n(n)


def energy_upper_bound(n: float, a: float) -> float:
    """Upper bound 2(n+1) sqrt(1 + a / (b_n (n+1))) on E_n(a) in the harmonic trap."""
    if n < 0 or a < 0:
        raise ValueError(f"energy_upper_bound needs n, a >= 0, got n={n}, a={a}")
    return 2 * (n + 1) * math.sqrt(1 + a / (b_n(n) * (n + 1)))


def mu_tilde_upper_bound(n: float, a: float) -> float:
    """mu_tilde <= 2n + 2(1 + 2 sqrt(a (n+1) / b_n)) in the harmonic trap."""
    return 2 * n + 2 * (1 + 2 * math.sqrt(a * (n + 1) / b_n(n)))


def d_n(n: float) -> float:
    """The constant in the large-n instability criterion mu_tilde >= n Omega / (1 - d_n).

    Minimum of 2/e**2 + 2 pi Gamma(n+1/2)**2 / (n**2 Gamma(n)**2) + 2**(1-n) gamma(n+1, 2)
    and 19/n, where gamma(n+1, 2) = n! - Gamma(n+1, 2) is the lower incomplete Gamma function."""
    if n < 1:
        raise ValueError(f"d_n needs n >= 1, got {n}")
    core = 2 * math.pi * math.exp(2 * (gammaln(n + 0.5) - gammaln(n))) / n**2
    regularized = gammainc(n + 1, 2.0)
    if regularized > 0:
        tail = math.exp((1 - n) * math.log(2) + gammaln(n + 1) + math.log(regularized))
    else:
        tail = 0.0
    return min(2 / math.e**2 + core + tail, 19 / n)


def xi(a: float) -> float:
    """Xi(a) = (2 pi e / a)(1 + sqrt(2a/pi))(3 + [ln(a / (2 pi e**2))]_+), strictly decreasing."""
    if not a > 0:
        raise ValueError(f"xi needs a > 0, got {a}")
    return (
        (2 * math.pi * math.e / a)
        * (1 + math.sqrt(2 * a / math.pi))
        * (3 + positive_part(math.log(a / (2 * math.pi * math.e**2))))
    )


def xi_inverse(y: float) -> float:
    """The a with xi(a) = y. The bracket grows past its default end when y is very small."""
    if not y > 0:
        raise ValueError(f"xi_inverse needs y > 0, got {y}")
    low, high = XI_BRACKET
    while xi(high) > y:
        high *= 10
        if high > 1e300:
            raise ValueError(f"xi never drops to {y}")
    if xi(low) < y:
        raise ValueError(f"xi_inverse({y}) lies below the bracket start {low}")
    return brentq(lambda a: xi(a) - y, low, high, xtol=1e-300, rtol=XI_TOLERANCE, maxiter=500)


def n_omega(omega: float) -> float:
    """Vortex index above which all n-vortices are unstable: 2 for omega <= 1, else 38/(2-omega)."""
    if not 0 < omega < 2:
        raise ValueError(f"n_omega needs 0 < omega < 2, got {omega}")
    return 2.0 if omega <= 1 else 38 / (2 - omega)


def a_omega_bounds(omega: float) -> Tuple[float, float]:
    """Lower and upper bounds on the coupling beyond which the harmonic ground state breaks
    rotational symmetry."""
    lower = math.pi * max(2 - omega, 1 / (8 * omega**2) - 2)
    upper = xi_inverse(omega / (2 * n_omega(omega) - 1))
    return lower, upper


def a_omega_equality_bound(omega: float) -> float:
    """pi (2 - omega): up to this coupling the harmonic DM and GP energies coincide."""
    return math.pi * (2 - omega)


def breaking_threshold_met(a: float, omega: float) -> bool:
    """Xi(a) <= omega / (2 N_omega - 1), sufficient for symmetry breaking in the harmonic trap."""
    return xi(a) <= omega / (2 * n_omega(omega) - 1)


class BoundReport(NodeMixin):
    """One evaluated bound, optionally paired with the value a solver observed.

    Parameters:
        name: identifier of the bound
        bound_value: the value of the bound
        observed_value: the computed quantity being bounded, if any
        kind: 'upper' (observed <= bound), 'lower' (observed >= bound) or 'identity'
            (observed == bound within tolerance)
        inputs: the parameters the bound was evaluated at
        tolerance: allowed violation; identities use it as the accepted residual
    """

    def __init__(
        self,
        name: str,
        bound_value: float,
        observed_value: float | None = None,
        kind: str = "upper",
        inputs: dict | None = None,
        tolerance: float = -BOUND_SLACK,
        parent=None,
    ):
        if kind not in ("upper", "lower", "identity"):
            raise ValueError(f"Unknown bound kind {kind}")
        self.name = name
        self.bound_value = float(bound_value)
        self.observed_value = None if observed_value is None else float(observed_value)
        self.kind = kind
        self.inputs = dict(inputs or {})
        self.tolerance = tolerance
        self.parent = parent

    @property
    def slack(self) -> float | None:
        if self.observed_value is None:
            return None
        if self.kind == "upper":
            return self.bound_value - self.observed_value
        if self.kind == "lower":
            return self.observed_value - self.bound_value
        return -abs(self.observed_value - self.bound_value)

    @property
    def satisfied(self) -> bool:
        slack = self.slack
        return slack is None or slack >= -self.tolerance

    def __str__(self) -> str:
        if self.observed_value is None:
            return f"{self.name}: {self.bound_value:.10g}"
        relation = {"upper": "<=", "lower": ">=", "identity": "=="}[self.kind]
        status = "OK" if self.satisfied else "VIOLATED"
        return (
            f"{self.name}: {self.observed_value:.10g} {relation} {self.bound_value:.10g}"
            f" (slack {self.slack:.3e}) {status}"
        )

    def __repr__(self) -> str:
        return f"BoundReport({self.name!r}, {self.bound_value!r}, {self.observed_value!r})"


class BoundSuite(NodeMixin):
    """A named group of bound reports (and nested suites)."""

    def __init__(self, name: str, parent=None):
        self.name = name
        self.parent = parent

    def reports(self) -> Iterator[BoundReport]:
        return (node for node in PreOrderIter(self) if isinstance(node, BoundReport))

    def violations(self) -> List[BoundReport]:
        return [report for report in self.reports() if not report.satisfied]

    @property
    def satisfied(self) -> bool:
        return not self.violations()

    def __str__(self) -> str:
        return self.name


def render_suite(root: BoundSuite) -> str:
    """Text tree of a suite, one bound per line."""
    return "\n".join(f"{prefix}{node}" for prefix, _, node in RenderTree(root))


def constants_suite(n: float, a: float, omega: float, parent=None) -> BoundSuite:
    """Suite of the closed-form constants at (n, a, omega), without observed values."""
    suite = BoundSuite(f"constants n={n:g} a={a:g} omega={omega:g}", parent=parent)
    inputs = {"n": n, "a": a, "omega": omega}
    if n > 0:
        BoundReport("c_n", c_n(n), inputs=inputs, parent=suite)
    BoundReport("b_n", b_n(n), inputs=inputs, parent=suite)
    BoundReport("E_n upper bound (harmonic)", energy_upper_bound(n, a), inputs=inputs, parent=suite)
    BoundReport("mu_tilde upper bound (harmonic)", mu_tilde_upper_bound(n, a), inputs=inputs,
                parent=suite)
    if n >= 1:
        BoundReport("d_n", d_n(n), inputs=inputs, parent=suite)
    if a > 0:
        BoundReport("xi(a)", xi(a), inputs=inputs, parent=suite)
    if 0 < omega < 2:
        lower, upper = a_omega_bounds(omega)
        BoundReport("N_omega", n_omega(omega), inputs=inputs, parent=suite)
        BoundReport("a_omega lower bound", lower, inputs=inputs, parent=suite)
        BoundReport("a_omega upper bound", upper, inputs=inputs, parent=suite)
        BoundReport("DM = GP coupling threshold", a_omega_equality_bound(omega), inputs=inputs,
                    parent=suite)
    return suite


def f_sup_bound(profile: VortexProfile) -> BoundReport:
    """||f||_inf**2 <= mu_tilde / (2a)."""
    a = profile.params.a
    if a <= 0:
        raise ValueError("The sup bound on f needs a > 0")
    return BoundReport(
        "sup f^2 <= mu_tilde/(2a)",
        profile.mu_tilde / (2 * a),
        profile.f.sup() ** 2,
        inputs={"n": profile.n, "a": a},
    )


def f_sup_improved_bound(profile: VortexProfile) -> BoundReport:
    """||f||_inf**2 <= (mu_tilde - 2n) / (2a), harmonic trap only."""
    a = profile.params.a
    if a <= 0 or not profile.trap.is_harmonic:
        raise ValueError("The improved sup bound on f needs a > 0 and the harmonic trap")
    return BoundReport(
        "sup f^2 <= (mu_tilde-2n)/(2a)",
        (profile.mu_tilde - 2 * profile.n) / (2 * a),
        profile.f.sup() ** 2,
        inputs={"n": profile.n, "a": a},
    )


def g_sup_bound(profile: VortexProfile) -> BoundReport:
    """||g||_inf <= ||f||_inf (c_n**2 mu_tilde)**(n/2)."""
    n = profile.n
    if not n > 0:
        raise ValueError("The bound on g needs n > 0")
    return BoundReport(
        "sup g <= sup f (c_n^2 mu_tilde)^(n/2)",
        profile.f.sup() * (c_n(n) ** 2 * profile.mu_tilde) ** (n / 2),
        max(profile.g.sup(), profile.g_origin),
        inputs={"n": n, "a": profile.params.a},
    )


def vortex_core_size_bound(profile: VortexProfile) -> Tuple[float, float]:
    """Observed core size (g(0) / ||f||_inf)**(-1/n) and its lower bound 1/(mu_tilde**0.5 c_n)."""
    n = profile.n
    if not n > 0:
        raise ValueError("A vortex core needs n > 0")
    observed = (profile.g_origin / profile.f.sup()) ** (-1 / n)
    lower = 1 / (math.sqrt(profile.mu_tilde) * c_n(n))
    return observed, lower


def quartic_lower_bound(phi: Field2D) -> Tuple[float, float]:
    """int |phi|**4 and its lower bound (4 / 9 pi)(int |phi|**2)**3 / int |phi|**2 r**2."""
    density = phi.density()
    area = phi.grid.cell_area
    second_moment = float(np.sum(density * phi.grid.radius**2) * area)
    if second_moment <= 0:
        raise ValueError("The quartic bound needs a field with a positive second moment")
    lhs = float(np.sum(density**2) * area)
    rhs = 4 / (9 * math.pi) * (float(np.sum(density) * area)) ** 3 / second_moment
    return lhs, rhs


def profile_bound_suite(profile: VortexProfile, virial_tolerance: float | None = None,
                        parent=None) -> BoundSuite:
    """Every bound that applies to a converged vortex profile, paired with the observed values."""
    from gprotor.radial_solver import virial_check

    n, a = profile.n, profile.params.a
    inputs = {"n": n, "a": a, "omega": profile.params.omega}
    suite = BoundSuite(f"vortex n={n:g} a={a:g}", parent=parent)
    harmonic = profile.trap.is_harmonic
    if harmonic:
        BoundReport("E_n <= 2(n+1)sqrt(1+a/(b_n(n+1)))", energy_upper_bound(n, a),
                    profile.energy, inputs=inputs, parent=suite)
        BoundReport("mu_tilde-2n <= 2(1+2sqrt(a(n+1)/b_n))", mu_tilde_upper_bound(n, a),
                    profile.mu_tilde, inputs=inputs, parent=suite)
    if a > 0:
        f_sup_bound(profile).parent = suite
        if harmonic:
            f_sup_improved_bound(profile).parent = suite
    if n > 0:
        g_sup_bound(profile).parent = suite
        observed, lower = vortex_core_size_bound(profile)
        BoundReport("core size s >= 1/(mu_tilde^(1/2) c_n)", lower, observed, kind="lower",
                    inputs=inputs, parent=suite)
    if harmonic:
        if virial_tolerance is None:
            virial_tolerance = 10 * profile.grid.step**2 * max(1.0, profile.energy)
        BoundReport("virial 2pi int f^2 r^3 dr = E_n/2", 0.0, virial_check(profile),
                    kind="identity", inputs=inputs, tolerance=virial_tolerance, parent=suite)
    return suite
