"""
Closed-form Gaussian moment dynamics of the system mode.

Stored moments are rotating-frame quantities <a~>, <a~^2>, <a~^dag a~>; the
master equation makes them relax exponentially towards rate-weighted
averages of the bath occupations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditioningError, InputError, PhysicalityError, SemanticsError
from .gaussian import PHYS_TOL, BathSpec, GaussianState, gaussian_entropy


@dataclass(frozen=True)
class Moments:
    a_mean: complex
    a_sq: complex
    n: float

    def __post_init__(self):
        object.__setattr__(self, "a_mean", complex(self.a_mean))
        object.__setattr__(self, "a_sq", complex(self.a_sq))
        object.__setattr__(self, "n", float(self.n))

    @classmethod
    def vacuum(cls) -> "Moments":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def thermal(cls, nbar: float) -> "Moments":
        return cls(0.0, 0.0, nbar)

    @classmethod
    def coherent(cls, alpha: complex) -> "Moments":
        return cls(alpha, alpha**2, abs(alpha) ** 2)

    def centered(self) -> tuple[float, complex]:
        """(n - |<a>|^2, <a^2> - <a>^2)."""
        return self.n - abs(self.a_mean) ** 2, self.a_sq - self.a_mean**2

    def is_physical(self, tol: float = PHYS_TOL) -> bool:
        c, u = self.centered()
        return c >= -tol and (c + 0.5) ** 2 - abs(u) ** 2 >= 0.25 - tol

    def gaussian(self) -> GaussianState:
        if not self.is_physical():
            raise PhysicalityError(f"moments {self} violate the uncertainty relation")
        return GaussianState.from_moments(self.a_mean, self.a_sq, self.n)

    def covariance(self) -> np.ndarray:
        c, u = self.centered()
        return np.array([[c + 0.5 + u.real, u.imag], [u.imag, c + 0.5 - u.real]])


def total_decay(baths: Sequence[BathSpec]) -> float:
    if not baths:
        raise InputError("need at least one bath")
    return float(sum(b.gamma for b in baths))


def fixed_point(baths: Sequence[BathSpec], omega: float) -> Moments:
    Gamma = total_decay(baths)
    n = u = 0.0
    for b in baths:
        nb, ub = b.occupations(omega)
        n += b.gamma * nb
        u += b.gamma * ub
    return Moments(0.0, u / Gamma, n / Gamma)


def evolve_moments(m0: Moments, baths: Sequence[BathSpec], omega: float, t: float) -> Moments:
    """Exact solution of the linear moment equations after time ``t`` (negative allowed)."""
    Gamma = total_decay(baths)
    fp = fixed_point(baths, omega)
    decay = math.exp(-Gamma * t)
    return Moments(
        m0.a_mean * math.exp(-0.5 * Gamma * t),
        fp.a_sq + (m0.a_sq - fp.a_sq) * decay,
        fp.n + (m0.n - fp.n) * decay,
    )


def moment_trajectory(m0: Moments, baths: Sequence[BathSpec], omega: float, times) -> list[Moments]:
    return [evolve_moments(m0, baths, omega, float(t)) for t in times]


def moment_rates(m: Moments, baths: Sequence[BathSpec], omega: float) -> Moments:
    """Right-hand side of the moment equations (returned as a Moments-shaped triple)."""
    da = dsq = dn = 0.0
    for b in baths:
        nb, ub = b.occupations(omega)
        da += -0.5 * b.gamma * m.a_mean
        dsq += -b.gamma * (m.a_sq - ub)
        dn += -b.gamma * (m.n - nb)
    return Moments(da, dsq, dn)


def heat_current(m: Moments, bath: BathSpec, omega: float) -> float:
    """Energy per unit time entering the system from ``bath``."""
    nb, _ = bath.occupations(omega)
    return -omega * bath.gamma * (m.n - nb)


def chi_alpha(m: Moments, bath: BathSpec, omega: float) -> float:
    """tr[ln rho_ss^(alpha) L_alpha[rho]] in closed form.

    (Omega/T) gamma ( cosh2r (n - n~) - sinh2r Re[e^{-i theta}(<a^2> - u~)] )
    """
    nb, ub = bath.occupations(omega)
    phase = complex(math.cos(bath.theta), -math.sin(bath.theta))
    sq = (phase * (m.a_sq - ub)).real
    return omega * bath.beta * bath.gamma * (math.cosh(2 * bath.r) * (m.n - nb) - math.sinh(2 * bath.r) * sq)


def system_entropy_from_moments(m: Moments) -> float:
    return gaussian_entropy(m.gaussian())


def _log_weight(m: Moments) -> tuple[float, np.ndarray]:
    """(kappa, sigma^-1) with -ln rho = kappa/2 (R-mu)^T sigma^-1 (R-mu) + const."""
    cov = m.covariance()
    nu = math.sqrt(max(np.linalg.det(cov), 0.25))
    if nu - 0.5 < 1e-13:
        raise ConditioningError("pure system state: ln rho is unbounded")
    kappa = nu * math.log((nu + 0.5) / (nu - 0.5))
    return kappa, np.linalg.inv(cov)


def entropy_flow(m: Moments, bath: BathSpec, omega: float) -> float:
    """-tr[L_alpha[rho] ln rho] for the Gaussian state with moments ``m``."""
    kappa, inv = _log_weight(m)
    nb, ub = bath.occupations(omega)
    target = Moments(0.0, ub, nb).covariance()
    cov_rate = -bath.gamma * (m.covariance() - target)
    return 0.5 * kappa * float(np.trace(inv @ cov_rate))


def entropy_rate(m: Moments, baths: Sequence[BathSpec], omega: float) -> float:
    """dS_S/dt under the master equation (Gaussian closed form)."""
    return sum(entropy_flow(m, b, omega) for b in baths)


def spohn_rate_gaussian(m: Moments, bath: BathSpec, omega: float) -> float:
    """R_Sp^(alpha) for a Gaussian system state, without a Fock truncation."""
    return chi_alpha(m, bath, omega) + entropy_flow(m, bath, omega)


def _entropy_derivative(m: Moments, baths, omega, step) -> float:
    back = evolve_moments(m, baths, omega, -step)
    if back.is_physical(tol=0.0):
        s_plus = system_entropy_from_moments(evolve_moments(m, baths, omega, step))
        return (s_plus - system_entropy_from_moments(back)) / (2 * step)
    s0 = system_entropy_from_moments(m)
    s1 = system_entropy_from_moments(evolve_moments(m, baths, omega, step))
    s2 = system_entropy_from_moments(evolve_moments(m, baths, omega, 2 * step))
    return (-3 * s0 + 4 * s1 - s2) / (2 * step)


def thermal_epr(trajectory: Sequence[Moments], baths: Sequence[BathSpec], omega: float,
                step: float | None = None) -> np.ndarray:
    """dS/dt - sum_alpha Qdot_alpha / T_alpha along a trajectory.

    dS/dt is a centered finite difference of the Gaussian entropy with
    step 1e-3/Gamma, taken on the exact moment flow through each sample.
    Only defined for thermal baths.
    """
    if any(not b.is_thermal for b in baths):
        raise SemanticsError(
            "R_ep needs thermal baths: with squeezing the bath temperature is not well "
            "defined and dQ/T is not the bath entropy flow"
        )
    if any(b.temperature == 0 for b in baths):
        raise InputError("R_ep needs T > 0 for every bath")
    step = step or 1e-3 / total_decay(baths)
    out = np.empty(len(trajectory))
    for i, m in enumerate(trajectory):
        flow = sum(heat_current(m, b, omega) / b.temperature for b in baths)
        out[i] = _entropy_derivative(m, baths, omega, step) - flow
    return out


@dataclass
class RateReport:
    """Entropic bookkeeping of the system at one instant."""

    t: float
    S_S: float
    dS_S: float
    heat: list[float]
    chi: list[float]
    spohn: list[float]
    R_Sp: float = field(init=False)
    R_ep: float | None = None
    R_I: float | None = None

    def __post_init__(self):
        self.R_Sp = float(sum(self.spohn))


def rate_report(t: float, m: Moments, baths: Sequence[BathSpec], omega: float, with_epr: bool | None = None) -> RateReport:
    """Closed-form report for a Gaussian state; R_ep filled when every bath is thermal."""
    with_epr = all(b.is_thermal for b in baths) if with_epr is None else with_epr
    heat = [heat_current(m, b, omega) for b in baths]
    chi = [chi_alpha(m, b, omega) for b in baths]
    spohn = [spohn_rate_gaussian(m, b, omega) for b in baths]
    dS = entropy_rate(m, baths, omega)
    rep = None
    if with_epr:
        rep = float(thermal_epr([m], baths, omega)[0])
    return RateReport(t, system_entropy_from_moments(m), dS, heat, chi, spohn, R_ep=rep)
