"""
Truncated Fock-space engine for one boson mode in squeezed thermal baths.

Everything lives in the interaction picture, so the free commutator
i[rho, Omega a^dag a] is absent from the equation of motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .errors import InputError, IntegrationError, TruncationError
from .gaussian import BathSpec, GaussianState
from .matfuncs import hermitize, logm_psd, real_part_checked, vn_entropy
from .moments import Moments

TAIL_BUDGET = 1e-8
DEFAULT_DIM = 40
MAX_DIM = 120
INVARIANT_TOL = 1e-10


@dataclass(frozen=True)
class SystemSpec:
    omega: float
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if not self.omega > 0:
            raise InputError(f"system frequency must be > 0, got {self.omega}")
        if self.dim < 2:
            raise InputError(f"truncation dimension must be >= 2, got {self.dim}")


@lru_cache(maxsize=32)
def _ladder(dim: int):
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    a.setflags(write=False)
    return a


def annihilation(dim: int) -> NDArray[np.float64]:
    return _ladder(dim)


def number_operator(dim: int) -> NDArray[np.float64]:
    return np.diag(np.arange(dim, dtype=float))


@dataclass(frozen=True)
class Dissipator:
    """Four-channel squeezed-bath dissipator acting on d x d matrices.

    The anomalous channels enter as ``-gamma u~ (a^dag rho a^dag - ...)`` and
    ``-gamma u~* (a rho a - ...)``.  ``variant="flipped_sign"`` flips the sign of
    the second one; that form is not Hermiticity-preserving and exists only so
    the discrepancy can be demonstrated.
    """

    bath: BathSpec
    system: SystemSpec
    variant: str = "hermitian"
    n: float = field(init=False)
    u: complex = field(init=False)

    def __post_init__(self):
        if self.variant not in ("hermitian", "flipped_sign"):
            raise InputError(f"unknown dissipator variant {self.variant!r}")
        n, u = self.bath.occupations(self.system.omega)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "u", u)

    @property
    def dim(self) -> int:
        return self.system.dim

    @property
    def gamma(self) -> float:
        return self.bath.gamma

    def coefficients(self) -> tuple[float, float, complex, complex]:
        """Weights of a^dag.a, a.a^dag, a^dag.a^dag and a.a sandwich channels."""
        g = self.gamma
        sign = 1.0 if self.variant == "hermitian" else -1.0
        return g * self.n, g * (self.n + 1), -g * self.u, -sign * g * np.conj(self.u)

    def apply(self, rho):
        return _apply_channels(self.coefficients(), rho, self.dim)

    __call__ = apply

    def log_steady_state(self) -> NDArray[np.complex128]:
        """ln rho_ss for this bath, from the quadratic generator of the squeezed Gibbs state.

        ln rho_ss = -beta Omega S a^dag a S^dag + ln(1 - e^{-beta Omega}) with
        S a^dag a S^dag = cosh2r a^dag a + sinh^2 r - sinh2r (e^{i theta} a^dag^2 + h.c.)/2.
        Eigenvalue clipping of a numerical rho_ss cannot resolve the deep
        squeezed-number levels, so the generator is used directly.
        """
        if self.bath.temperature == 0:
            raise InputError("ln rho_ss is unbounded for a zero-temperature bath")
        a = annihilation(self.dim)
        ad = a.T
        r, th = self.bath.r, self.bath.theta
        phase = complex(math.cos(th), math.sin(th))
        quad = (
            math.cosh(2 * r) * (ad @ a)
            + math.sinh(r) ** 2 * np.eye(self.dim)
            - 0.5 * math.sinh(2 * r) * (phase * (ad @ ad) + np.conj(phase) * (a @ a))
        )
        x = self.system.omega * self.bath.beta
        return -x * quad + math.log(-math.expm1(-x)) * np.eye(self.dim)

    def kossakowski(self) -> NDArray[np.complex128]:
        """Coefficient matrix in the basis (a, a^dag)."""
        g = self.gamma
        return g * np.array([[self.n + 1, -np.conj(self.u)], [-self.u, self.n]])

    def jump_operators(self) -> list[NDArray[np.complex128]]:
        """Lindblad operators V_k with L[rho] = sum V rho V^dag - {V^dag V, rho}/2."""
        if self.variant != "hermitian":
            raise InputError("the flipped_sign variant has no Lindblad form")
        a = annihilation(self.dim)
        w, U = np.linalg.eigh(self.kossakowski())
        ops = []
        for lam, col in zip(w, U.T):
            if lam > 1e-14:
                ops.append(math.sqrt(lam) * (col[0] * a + col[1] * a.T))
        return ops


@lru_cache(maxsize=32)
def _ladder_weights(dim: int):
    w = np.sqrt(np.arange(1, dim, dtype=float))
    w.setflags(write=False)
    return w


# Products with the bidiagonal ladder operators as O(d^2) shifts.
def _a_left(x, w):
    out = np.zeros_like(x)
    out[:-1] = w[:, None] * x[1:]
    return out


def _ad_left(x, w):
    out = np.zeros_like(x)
    out[1:] = w[:, None] * x[:-1]
    return out


def _a_right(x, w):
    out = np.zeros_like(x)
    out[:, 1:] = x[:, :-1] * w
    return out


def _ad_right(x, w):
    out = np.zeros_like(x)
    out[:, :-1] = x[:, 1:] * w
    return out


def _apply_channels(coeffs, rho, dim):
    cn, cn1, cu, cv = coeffs
    w = _ladder_weights(dim)
    ra = _a_right(rho, w)
    rad = _ad_right(rho, w)
    out = cn * _ad_left(ra, w) + cn1 * _a_left(rad, w) + cu * _ad_left(rad, w) + cv * _a_left(ra, w)
    # K = cn a a^dag + cn1 a^dag a + cu a^dag^2 + cv a^2, with a a^dag and a^dag a diagonal
    k = np.arange(dim, dtype=float)
    diag = cn * np.append(k[1:], 0.0) + cn1 * k
    Krho = diag[:, None] * rho + cu * _ad_left(_ad_left(rho, w), w) + cv * _a_left(_a_left(rho, w), w)
    rhoK = rho * diag[None, :] + cu * _ad_right(_ad_right(rho, w), w) + cv * _a_right(_a_right(rho, w), w)
    return out - 0.5 * (Krho + rhoK)


def combined_coefficients(dissipators: Sequence[Dissipator]):
    dims = {d.dim for d in dissipators}
    if len(dims) != 1:
        raise InputError("dissipators act on different truncations")
    total = np.zeros(4, dtype=complex)
    for d in dissipators:
        total += np.array(d.coefficients())
    return tuple(total), dims.pop()


def total_rate(dissipators: Sequence[Dissipator]) -> float:
    return float(sum(d.gamma for d in dissipators))


def default_step(dissipators: Sequence[Dissipator]) -> float:
    """RK4 step: 0.02/Gamma, tightened by the spectral radius of the truncated generator."""
    Gamma = total_rate(dissipators)
    dim = dissipators[0].dim
    radius = sum(d.gamma * (2 * d.n + 1 + 2 * abs(d.u)) for d in dissipators) * (dim - 1)
    return min(0.02 / Gamma, 0.5 / radius)


def build_dissipator(bath: BathSpec, system: SystemSpec) -> Dissipator:
    return Dissipator(bath, system)


# ---------------------------------------------------------------------------
# states


def fock_state(k: int, dim: int) -> NDArray[np.complex128]:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[k, k] = 1.0
    return rho


def thermal_rho(nbar: float, dim: int) -> NDArray[np.complex128]:
    if nbar == 0:
        return fock_state(0, dim)
    k = np.arange(dim)
    p = (nbar / (nbar + 1)) ** k / (nbar + 1)
    return np.diag(p / p.sum()).astype(complex)


def _working_dim(dim: int) -> int:
    return 2 * dim + 60


def _crop(big, dim: int, budget: float | None):
    rho = big[:dim, :dim]
    tail = tail_population(rho)
    if budget is not None and tail > budget:
        raise TruncationError(f"truncation at d={dim} leaves tail population {tail:.3e} > {budget:.1e}")
    rho = hermitize(rho)
    return rho / np.trace(rho).real


def squeeze_operator(zeta: complex, dim: int) -> NDArray[np.complex128]:
    """S(zeta) = exp(zeta a^dag^2 / 2 - zeta* a^2 / 2) on a truncated space."""
    a = annihilation(dim)
    ad = a.T
    gen = 0.5 * zeta * (ad @ ad) - 0.5 * np.conj(zeta) * (a @ a)
    return expm(gen)


def displacement_operator(alpha: complex, dim: int) -> NDArray[np.complex128]:
    a = annihilation(dim)
    return expm(alpha * a.T - np.conj(alpha) * a)


def squeezed_thermal_rho(nbar: float, r: float, theta: float, dim: int, budget: float | None = TAIL_BUDGET):
    """S(r e^{i theta}) rho_th S^dag, so <a^2> = e^{i theta} sinh(2r)(nbar + 1/2)."""
    big = _working_dim(dim)
    S = squeeze_operator(r * complex(math.cos(theta), math.sin(theta)), big)
    rho = S @ thermal_rho(nbar, big) @ S.conj().T
    return _crop(rho, dim, budget)


def coherent_rho(alpha: complex, dim: int, budget: float | None = TAIL_BUDGET):
    big = _working_dim(dim)
    D = displacement_operator(alpha, big)
    rho = D @ fock_state(0, big) @ D.conj().T
    return _crop(rho, dim, budget)


def gaussian_rho(state: GaussianState | Moments, dim: int, budget: float | None = TAIL_BUDGET):
    """Fock matrix of a single-mode Gaussian state (displaced squeezed thermal)."""
    if isinstance(state, Moments):
        state = state.gaussian()
    if state.n_modes != 1:
        raise InputError("gaussian_rho needs a single-mode state")
    alpha, N, M = state.moments()
    alpha = alpha[0]
    u = M[0, 0] - alpha**2
    nu = math.sqrt(max(np.linalg.det(state.cov), 0.25))
    r = 0.5 * math.asinh(abs(u) / nu)
    phi = float(np.angle(u)) if abs(u) > 0 else 0.0
    big = _working_dim(dim)
    S = squeeze_operator(r * complex(math.cos(phi), math.sin(phi)), big)
    rho = S @ thermal_rho(nu - 0.5, big) @ S.conj().T
    if alpha != 0:
        D = displacement_operator(alpha, big)
        rho = D @ rho @ D.conj().T
    return _crop(rho, dim, budget)


def tail_population(rho) -> float:
    """Largest population of the two highest levels (squeezed states alternate in parity)."""
    return float(max(rho[-1, -1].real, rho[-2, -2].real))


def required_dimension(nbar: float, r: float, budget: float = TAIL_BUDGET, start: int = DEFAULT_DIM, cap: int = MAX_DIM) -> int:
    """Smallest d (stepping by 10 from ``start``) holding a squeezed thermal state within ``budget``."""
    d = start
    while d <= cap:
        try:
            squeezed_thermal_rho(nbar, r, 0.0, d, budget)
            return d
        except TruncationError:
            d += 10
    raise TruncationError(f"squeezed thermal state (nbar={nbar}, r={r}) needs d > {cap}")


def partial_steady_state(bath: BathSpec, system: SystemSpec, budget: float = TAIL_BUDGET):
    """State annihilated by this bath's dissipator alone: a squeezed Gibbs state."""
    return squeezed_thermal_rho(bath.planck(system.omega), bath.r, bath.theta, system.dim, budget)


# ---------------------------------------------------------------------------
# dynamics


@dataclass
class FockTrajectory:
    times: NDArray[np.float64]
    states: list

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))


def _rk4(coeffs, dim, x, dt, n_steps):
    f = lambda y: _apply_channels(coeffs, y, dim)  # noqa: E731
    for _ in range(n_steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def propagate(x, dissipators: Sequence[Dissipator], duration: float, dt: float | None = None):
    """Apply the flow exp(duration * sum L) to any d x d matrix (not only states)."""
    if duration < 0:
        raise InputError("cannot propagate backwards")
    if duration == 0:
        return np.array(x, dtype=complex)
    coeffs, dim = combined_coefficients(dissipators)
    dt = dt or default_step(dissipators)
    n_steps = max(1, math.ceil(duration / dt - 1e-9))
    return _rk4(coeffs, dim, np.array(x, dtype=complex), duration / n_steps, n_steps)


def check_density_matrix(rho, time=None, tail_budget: float | None = TAIL_BUDGET, tol: float = INVARIANT_TOL):
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise IntegrationError("density matrix lost Hermiticity", time)
    if abs(np.trace(rho) - 1) > tol:
        raise IntegrationError(f"trace drifted to {np.trace(rho).real:.12f}", time)
    if np.linalg.eigvalsh(hermitize(rho))[0] < -tol:
        raise IntegrationError("density matrix lost positivity", time)
    if tail_budget is not None and tail_population(rho) > tail_budget:
        raise TruncationError(f"tail population {tail_population(rho):.3e} exceeds budget at t={time}")


def evolve(rho0, dissipators: Sequence[Dissipator], times: Sequence[float], dt: float | None = None,
           tail_budget: float | None = TAIL_BUDGET) -> FockTrajectory:
    """Integrate sum_alpha L_alpha with fixed-step RK4, returning snapshots at ``times``.

    ``times`` must be non-decreasing and start at or after 0; every snapshot is
    checked for Hermiticity, unit trace, positivity and tail population.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise InputError("sample times must be non-negative and sorted")
    Gamma = total_rate(dissipators)
    if dt is not None and dt > 0.05 / Gamma:
        raise InputError(f"step {dt} exceeds 0.05/Gamma = {0.05 / Gamma}")
    dt = dt or default_step(dissipators)
    check_density_matrix(rho0, 0.0, tail_budget)
    rho = np.array(rho0, dtype=complex)
    states = []
    t_prev = 0.0
    for t in times:
        rho = propagate(rho, dissipators, t - t_prev, dt)
        rho = hermitize(rho)
        check_density_matrix(rho, t, tail_budget)
        states.append(rho)
        t_prev = t
    return FockTrajectory(times, states)


def generator_rate(rho, dissipators: Sequence[Dissipator]):
    coeffs, dim = combined_coefficients(dissipators)
    return _apply_channels(coeffs, rho, dim)


# ---------------------------------------------------------------------------
# entropic functionals


def von_neumann_entropy(rho) -> float:
    return vn_entropy(rho)


def entropy_rate(rho, dissipators: Sequence[Dissipator]) -> float:
    """dS/dt = -tr[rho_dot ln rho] under the master equation."""
    rate = generator_rate(rho, dissipators)
    return -real_part_checked(np.trace(rate @ logm_psd(rho)))


def _log_ss(diss: Dissipator, rho_ss):
    return diss.log_steady_state() if rho_ss is None else logm_psd(rho_ss)


def spohn_rate(rho, diss: Dissipator, rho_ss=None) -> float:
    """tr[(ln rho_ss - ln rho) L[rho]] for one bath.

    With ``rho_ss=None`` the bath's analytic ln rho_ss is used; passing a
    matrix switches to its clipped matrix logarithm.
    """
    Lr = diss.apply(rho)
    val = np.trace((_log_ss(diss, rho_ss) - logm_psd(rho)) @ Lr)
    return real_part_checked(val, scale=float(np.abs(Lr).sum()))


def chi_fock(rho, diss: Dissipator, rho_ss=None) -> float:
    """tr[ln rho_ss L[rho]]."""
    Lr = diss.apply(rho)
    return real_part_checked(np.trace(_log_ss(diss, rho_ss) @ Lr), scale=float(np.abs(Lr).sum()))


def entropy_flow_term(rho, diss: Dissipator) -> float:
    """tr[ln rho L[rho]]."""
    Lr = diss.apply(rho)
    return real_part_checked(np.trace(logm_psd(rho) @ Lr), scale=float(np.abs(Lr).sum()))


def heat_current_fock(rho, diss: Dissipator) -> float:
    """tr[H_S L[rho]], positive for energy entering the system."""
    H = diss.system.omega * number_operator(diss.dim)
    return real_part_checked(np.trace(H @ diss.apply(rho)))


# ---------------------------------------------------------------------------
# correlations and moments


def two_time_correlation(rho0, dissipators: Sequence[Dissipator], t: float, s: float, kind: str = "ada",
                         dt: float | None = None) -> complex:
    """Rotating-frame correlation <a^dag(t) a(s)> (``"ada"``) or <a(t) a(s)> (``"aa"``), t >= s.

    Regression recipe: evolve to s, multiply by a, evolve the resulting
    operator for t - s, then trace against a^dag or a.
    """
    if s > t:
        raise InputError("need s <= t")
    if s < 0:
        raise InputError("need s >= 0")
    if kind not in ("ada", "aa"):
        raise InputError(f"unknown correlation kind {kind!r}")
    dim = dissipators[0].dim
    a = annihilation(dim)
    rho_s = propagate(rho0, dissipators, s, dt)
    x = propagate(a @ rho_s, dissipators, t - s, dt)
    probe = a.T if kind == "ada" else a
    return complex(np.trace(probe @ x))


def moments_from_rho(rho) -> Moments:
    dim = rho.shape[0]
    a = annihilation(dim)
    a_mean = complex(np.trace(rho @ a))
    a_sq = complex(np.trace(rho @ a @ a))
    n = float(np.trace(rho @ number_operator(dim)).real)
    return Moments(a_mean, a_sq, n)


__all__ = [
    "Dissipator",
    "FockTrajectory",
    "SystemSpec",
    "annihilation",
    "build_dissipator",
    "chi_fock",
    "coherent_rho",
    "entropy_flow_term",
    "entropy_rate",
    "evolve",
    "fock_state",
    "gaussian_rho",
    "heat_current_fock",
    "moments_from_rho",
    "partial_steady_state",
    "propagate",
    "required_dimension",
    "spohn_rate",
    "squeezed_thermal_rho",
    "thermal_rho",
    "two_time_correlation",
    "von_neumann_entropy",
]
