"""
Exact system + discretized-bath Gaussian dynamics.

The coupling a^dag B + a B^dag conserves excitation number, so the total
Hamiltonian is a quadratic form c^dag h c in the mode operators
c = (a, b_1, ..., b_M).  Heisenberg evolution is c(t) = U(t) c with
U = exp(-i h t), and the centered moments transform as

    N(t) = U* N U^T,   M(t) = U M U^T,

which is the complex-basis form of the symplectic map sigma -> S sigma S^T.
Everything is computed in the lab frame; interaction-picture moments only
pick up phases.

Bath squeezing layouts
----------------------
``"pair"``  two-mode squeezing of mirror pairs (omega_k, 2 Omega - omega_k).
            The system sees a stationary squeezed reservoir with
            <a^2>_ss -> u~.  Default.
``"mode"``  every bath mode squeezed on its own.  Its anomalous moments
            rotate at 2 omega_k, so the correlation seen by the system
            depends on t + t' and dephases; the reservoir then acts as an
            effectively unsqueezed one at long times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .errors import InputError, RecurrenceError
from .gaussian import (
    BathSpec,
    GaussianState,
    complex_moments,
    covariance_from_moments,
    gaussian_entropy,
    squeezed_thermal_occupations,
    symplectic_eigenvalues,
)
from .moments import Moments, chi_alpha, evolve_moments, spohn_rate_gaussian, total_decay

MIN_MODES = 50
MIN_WIDTH_FACTOR = 20.0
DEFAULT_WIDTH_FACTOR = 40.0
RECURRENCE_GUARD = 0.8
LAYOUTS = ("pair", "mode")


@dataclass(frozen=True)
class WeightedBathObservable:
    """Sum_k f_k <b_k^dag b_k> + 2 Re Sum_k h_k X_k over one bath.

    X_k is <b~_k^2> for single-mode squeezing and <b~_k b~_kbar> (the mirror
    partner) for pair squeezing; interaction-picture moments throughout.
    """

    f: NDArray[np.float64]
    h: NDArray[np.complex128]

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        h = np.broadcast_to(np.asarray(self.h, dtype=complex), f.shape).copy()
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(h))):
            raise InputError("weights must be finite")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class BathModes:
    """One bath discretized on a uniform midpoint grid with a flat spectrum."""

    bath: BathSpec
    system_omega: float
    omegas: NDArray[np.float64]
    couplings: NDArray[np.float64]
    layout: str = "pair"

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    @property
    def delta_omega(self) -> float:
        return float(self.omegas[1] - self.omegas[0])

    @property
    def band(self) -> tuple[float, float]:
        half = 0.5 * self.delta_omega
        return float(self.omegas[0] - half), float(self.omegas[-1] + half)

    @property
    def recurrence_time(self) -> float:
        return 2 * math.pi / self.delta_omega

    @property
    def effective_gamma(self) -> float:
        """Spectral density 2 pi g^2 / delta_omega at the system frequency."""
        k = int(np.argmin(np.abs(self.omegas - self.system_omega)))
        return 2 * math.pi * self.couplings[k] ** 2 / self.delta_omega

    @property
    def partner(self) -> NDArray[np.int64]:
        """Index of the mirror mode 2 Omega - omega_k (pair layout) or k itself."""
        idx = np.arange(self.n_modes)
        return idx[::-1] if self.layout == "pair" else idx

    def thermal_occupations(self) -> NDArray[np.float64]:
        return np.array([self.bath.planck(w) for w in self.omegas])

    def initial_moments(self) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        """Centered (N, M) of the bath block.

        Anomalous moments carry a minus sign relative to u~ because the
        coupling hands the system the noise -i B.
        """
        nth = self.thermal_occupations()
        r, theta = self.bath.r, self.bath.theta
        phase = complex(math.cos(theta), math.sin(theta))
        if self.layout == "mode":
            occ = [squeezed_thermal_occupations(n, r, theta) for n in nth]
            N = np.diag([o[0] for o in occ]).astype(complex)
            M = -np.diag([o[1] for o in occ])
            return N, M
        c2, s2, cs = math.cosh(r) ** 2, math.sinh(r) ** 2, math.cosh(r) * math.sinh(r)
        mirror = nth[self.partner]
        N = np.diag(c2 * nth + s2 * (mirror + 1)).astype(complex)
        M = np.zeros((self.n_modes, self.n_modes), dtype=complex)
        M[np.arange(self.n_modes), self.partner] = -phase * cs * (nth + mirror + 1)
        return N, M

    def entropy_weights(self) -> WeightedBathObservable:
        """Weights with Sum f<b^dag b> + 2 Re Sum h X = -<ln rho_B(0)> + const."""
        T = self.bath.temperature
        if T == 0:
            raise InputError("entropy weights need T > 0")
        r, theta = self.bath.r, self.bath.theta
        conj_phase = complex(math.cos(theta), -math.sin(theta))
        w = self.omegas
        if self.layout == "mode":
            return WeightedBathObservable(w * math.cosh(2 * r) / T, w * math.sinh(2 * r) * conj_phase / (2 * T))
        mirror = w[self.partner]
        f = (w * math.cosh(r) ** 2 + mirror * math.sinh(r) ** 2) / T
        h = 0.5 * (w + mirror) * math.sinh(2 * r) * conj_phase / (2 * T)
        return WeightedBathObservable(f, h)


def discretize_bath(bath: BathSpec, omega: float, n_modes: int = 200, width: float | None = None,
                    layout: str = "pair", gamma_total: float | None = None) -> BathModes:
    """Flat band of ``n_modes`` midpoints over [omega - W/2, omega + W/2].

    ``width`` defaults to 40 Gamma, with Gamma the total decay rate if
    given, else this bath's rate.
    """
    if layout not in LAYOUTS:
        raise InputError(f"layout must be one of {LAYOUTS}")
    if n_modes < MIN_MODES:
        raise InputError(f"need at least {MIN_MODES} bath modes, got {n_modes}")
    if layout == "pair" and n_modes % 2:
        raise InputError("pair squeezing needs an even number of modes")
    Gamma = gamma_total if gamma_total is not None else bath.gamma
    width = DEFAULT_WIDTH_FACTOR * Gamma if width is None else float(width)
    if width < MIN_WIDTH_FACTOR * Gamma * (1 - 1e-12):
        raise InputError(f"band width {width} is below {MIN_WIDTH_FACTOR} Gamma")
    dw = width / n_modes
    omegas = omega - 0.5 * width + (np.arange(n_modes) + 0.5) * dw
    if omegas[0] <= 0:
        raise InputError("grid reaches non-positive frequencies; narrow the band or raise omega")
    couplings = np.full(n_modes, math.sqrt(bath.gamma * dw / (2 * math.pi)))
    return BathModes(bath, float(omega), omegas, couplings, layout)


@dataclass(frozen=True)
class MicroModel:
    omega: float
    baths: tuple[BathModes, ...]

    def __post_init__(self):
        object.__setattr__(self, "baths", tuple(self.baths))
        if not self.baths:
            raise InputError("need at least one bath")

    @property
    def n_modes(self) -> int:
        return 1 + sum(b.n_modes for b in self.baths)

    @property
    def gamma_total(self) -> float:
        return total_decay([b.bath for b in self.baths])

    @property
    def recurrence_time(self) -> float:
        return min(b.recurrence_time for b in self.baths)

    def bath_indices(self, alpha: int) -> NDArray[np.int64]:
        start = 1 + sum(b.n_modes for b in self.baths[:alpha])
        return np.arange(start, start + self.baths[alpha].n_modes)

    def all_bath_indices(self) -> NDArray[np.int64]:
        return np.arange(1, self.n_modes)

    def single_particle_hamiltonian(self) -> NDArray[np.float64]:
        h = np.zeros((self.n_modes, self.n_modes))
        h[0, 0] = self.omega
        for alpha, b in enumerate(self.baths):
            idx = self.bath_indices(alpha)
            h[idx, idx] = b.omegas
            h[0, idx] = h[idx, 0] = b.couplings
        return h


def build_micro_model(baths: Sequence[BathSpec], omega: float, n_modes: int = 200,
                      width_factor: float = DEFAULT_WIDTH_FACTOR, layout: str = "pair") -> MicroModel:
    """Every bath gets the same grid of width ``width_factor`` times the total rate."""
    Gamma = total_decay(baths)
    return MicroModel(omega, tuple(
        discretize_bath(b, omega, n_modes, width_factor * Gamma, layout, gamma_total=Gamma) for b in baths))


def build_initial_total_state(model: MicroModel, system: Moments | GaussianState) -> GaussianState:
    """Product of the system state and the squeezed thermal baths."""
    if isinstance(system, Moments):
        system = system.gaussian()
    if system.n_modes != 1:
        raise InputError("system state must be single-mode")
    symplectic_eigenvalues(system)
    alpha, N_s, M_s = system.moments()
    n = model.n_modes
    N = np.zeros((n, n), dtype=complex)
    M = np.zeros((n, n), dtype=complex)
    N[0, 0] = N_s[0, 0] - abs(alpha[0]) ** 2
    M[0, 0] = M_s[0, 0] - alpha[0] ** 2
    for k, b in enumerate(model.baths):
        idx = model.bath_indices(k)
        Nb, Mb = b.initial_moments()
        N[np.ix_(idx, idx)] = Nb
        M[np.ix_(idx, idx)] = Mb
    mean = np.zeros(2 * n)
    mean[:2] = system.mean
    return GaussianState(mean, covariance_from_moments(N, M))


def _block_entropy(N, M, idx) -> float:
    sub = np.ix_(idx, idx)
    return gaussian_entropy(covariance_from_moments(N[sub], M[sub]))


@dataclass
class MicroTrajectory:
    """Per-sample reductions of the total state (lab-frame moments)."""

    model: MicroModel
    times: NDArray[np.float64]
    sys_mean: NDArray[np.complex128]
    sys_n: NDArray[np.float64]
    sys_sq: NDArray[np.complex128]
    S_S: NDArray[np.float64]
    S_B: NDArray[np.float64]  # (samples, baths)
    S_B_joint: NDArray[np.float64]
    S_SB: float
    bath_n: list
    bath_x: list
    cross: list
    check_times: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    total_entropy: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    spectrum_drift: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def _rot(self, freq):
        return np.exp(1j * np.outer(self.times, np.atleast_1d(freq)))

    def system_moments(self) -> list[Moments]:
        """Rotating-frame moments <a~>, <a~^2>, <a~^dag a~>."""
        ph = np.exp(1j * self.model.omega * self.times)
        return [Moments(m * p, s * p * p, n) for m, s, n, p in zip(self.sys_mean, self.sys_sq, self.sys_n, ph)]

    def anomalous(self, alpha: int) -> NDArray[np.complex128]:
        """Interaction-picture X_k (see :class:`WeightedBathObservable`)."""
        b = self.model.baths[alpha]
        return self.bath_x[alpha] * self._rot(b.omegas + b.omegas[b.partner])

    def mutual_information(self) -> NDArray[np.float64]:
        """I_SB = S_S + S_B - S_SB, with S_SB the conserved total entropy."""
        return self.S_S + self.S_B_joint - self.S_SB

    def energies(self) -> dict:
        """Lab-frame <H_S>, <H_B alpha> and <V_SB> per sample."""
        out = {"system": self.model.omega * self.sys_n, "interaction": np.zeros(len(self))}
        for k, b in enumerate(self.model.baths):
            out[f"bath{k}"] = self.bath_n[k] @ b.omegas
            out["interaction"] = out["interaction"] + 2 * np.real(self.cross[k] @ b.couplings)
        return out


def evolve_total(state: GaussianState, model: MicroModel, horizon: float, n_steps: int = 400,
                 check_stride: int = 40) -> MicroTrajectory:
    """Sample the exact evolution at ``n_steps + 1`` equally spaced times.

    The total symplectic spectrum is recomputed every ``check_stride`` samples
    as a unitarity check.
    """
    if horizon <= 0 or n_steps < 2:
        raise InputError("need a positive horizon and at least two steps")
    if horizon > RECURRENCE_GUARD * model.recurrence_time:
        raise RecurrenceError(
            f"horizon {horizon:.4g} exceeds {RECURRENCE_GUARD} x recurrence time {model.recurrence_time:.4g}")
    dt = horizon / n_steps
    U = expm(-1j * dt * model.single_particle_hamiltonian())
    Ut = U.T
    Uc = U.conj()

    alpha = (state.mean[0::2] + 1j * state.mean[1::2]) / math.sqrt(2)
    N, M = complex_moments(state.cov)
    nu0 = symplectic_eigenvalues(state)
    S_SB = gaussian_entropy(state)

    n_samples = n_steps + 1
    nb = len(model.baths)
    all_bath = model.all_bath_indices()
    idx = [model.bath_indices(k) for k in range(nb)]
    sys_mean = np.empty(n_samples, complex)
    sys_n = np.empty(n_samples)
    sys_sq = np.empty(n_samples, complex)
    S_S = np.empty(n_samples)
    S_B = np.empty((n_samples, nb))
    S_joint = np.empty(n_samples)
    bath_n = [np.empty((n_samples, i.size)) for i in idx]
    bath_x = [np.empty((n_samples, i.size), complex) for i in idx]
    cross = [np.empty((n_samples, i.size), complex) for i in idx]
    check_t, check_S, drift = [], [], []

    for s in range(n_samples):
        a0 = alpha[0]
        sys_mean[s] = a0
        sys_n[s] = N[0, 0].real + abs(a0) ** 2
        sys_sq[s] = M[0, 0] + a0**2
        S_S[s] = _block_entropy(N, M, [0])
        for k, i in enumerate(idx):
            S_B[s, k] = _block_entropy(N, M, i)
            al = alpha[i]
            bath_n[k][s] = N[i, i].real + np.abs(al) ** 2
            part = i[model.baths[k].partner]
            bath_x[k][s] = M[i, part] + al * alpha[part]
            cross[k][s] = N[0, i] + np.conj(a0) * al
        S_joint[s] = S_B[s, 0] if nb == 1 else _block_entropy(N, M, all_bath)
        if s % check_stride == 0 or s == n_samples - 1:
            cov = covariance_from_moments(N, M)
            nu = symplectic_eigenvalues(cov)
            check_t.append(s * dt)
            check_S.append(gaussian_entropy(cov))
            drift.append(float(np.max(np.abs(nu - nu0))))
        if s < n_steps:
            alpha = U @ alpha
            N = Uc @ N @ Ut
            M = U @ M @ Ut

    return MicroTrajectory(model, np.arange(n_samples) * dt, sys_mean, sys_n, sys_sq, S_S, S_B, S_joint, S_SB,
                           bath_n, bath_x, cross, np.array(check_t), np.array(check_S), np.array(drift))


def _rate(series, dt):
    return np.gradient(np.asarray(series), dt, edge_order=2)


def weighted_sum(traj: MicroTrajectory, obs: WeightedBathObservable, alpha: int) -> NDArray[np.float64]:
    return traj.bath_n[alpha] @ obs.f + 2 * np.real(traj.anomalous(alpha) @ obs.h)


@dataclass
class BathEntropyRates:
    finite_difference: NDArray[np.float64]
    fixed_reference: NDArray[np.float64]


def bath_entropy_rate(traj: MicroTrajectory, alpha: int) -> BathEntropyRates:
    """(i) dS_B/dt of the bath block and (ii) -tr[rho_B' ln rho_B(0)]."""
    weights = traj.model.baths[alpha].entropy_weights()
    return BathEntropyRates(_rate(traj.S_B[:, alpha], traj.dt), _rate(weighted_sum(traj, weights, alpha), traj.dt))


def mutual_information_rate(traj: MicroTrajectory) -> NDArray[np.float64]:
    return _rate(traj.mutual_information(), traj.dt)


def energy_balance(traj: MicroTrajectory) -> NDArray[np.float64]:
    """d<H_S>/dt + sum d<H_B>/dt + d<V_SB>/dt, which vanishes for a closed system."""
    return sum(_rate(v, traj.dt) for v in traj.energies().values())


def _interp(obs_values, omegas, omega):
    if np.iscomplexobj(obs_values):
        return complex(np.interp(omega, omegas, obs_values.real), np.interp(omega, omegas, obs_values.imag))
    return float(np.interp(omega, omegas, obs_values))


@dataclass
class FkReport:
    times: NDArray[np.float64]
    lhs_f: NDArray[np.float64]
    rhs_f: NDArray[np.float64]
    lhs_h: NDArray[np.float64]
    rhs_h: NDArray[np.float64]

    @property
    def lhs(self):
        return self.lhs_f + self.lhs_h

    @property
    def rhs(self):
        return self.rhs_f + self.rhs_h

    def relative_residual(self) -> NDArray[np.float64]:
        scale = np.maximum(np.abs(self.rhs), 1e-300)
        return np.abs(self.lhs - self.rhs) / scale


def verify_fk_relations(traj: MicroTrajectory, obs: WeightedBathObservable, alpha: int,
                        reference: str = "moment_engine") -> FkReport:
    """Weighted bath-moment rates against f(Omega), h(Omega) times the system relaxation.

    ``reference`` selects where the system moments on the right come from:
    the closed-form master-equation solution from the same initial state, or
    the micro run's own system block.
    """
    model = traj.model
    b = model.baths[alpha]
    nb_, ub = b.bath.occupations(model.omega)
    if reference == "moment_engine":
        baths = [x.bath for x in model.baths]
        m0 = traj.system_moments()[0]
        sysm = [evolve_moments(m0, baths, model.omega, t) for t in traj.times]
    elif reference == "micro":
        sysm = traj.system_moments()
    else:
        raise InputError("reference must be 'moment_engine' or 'micro'")
    n = np.array([m.n for m in sysm])
    sq = np.array([m.a_sq for m in sysm])
    f0 = _interp(obs.f, b.omegas, model.omega)
    h0 = _interp(obs.h, b.omegas, model.omega)
    g = b.bath.gamma
    lhs_f = _rate(traj.bath_n[alpha] @ obs.f, traj.dt)
    lhs_h = _rate(2 * np.real(traj.anomalous(alpha) @ obs.h), traj.dt)
    rhs_f = f0 * g * (n - nb_)
    rhs_h = -2 * np.real(h0 * g * (sq - ub))
    return FkReport(traj.times, lhs_f, rhs_f, lhs_h, rhs_h)


# ---------------------------------------------------------------------------
# comparison with the master equation


@dataclass
class MicroComparison:
    """Micro-model rates next to their master-equation counterparts."""

    times: NDArray[np.float64]
    window: NDArray[np.bool_]
    mutual_information: NDArray[np.float64]
    R_I: NDArray[np.float64]
    R_Sp: NDArray[np.float64]
    R_Sp_micro: NDArray[np.float64]
    chi: NDArray[np.float64]  # (samples, baths), closed form
    dS_B_fd: NDArray[np.float64]
    dS_B_ref: NDArray[np.float64]

    def max_relative(self, a, b) -> float:
        a, b = np.asarray(a)[self.window], np.asarray(b)[self.window]
        return float(np.max(np.abs(a - b) / np.abs(b)))


def compare_with_master(traj: MicroTrajectory, window: tuple[float, float] = (1.0, 4.0)) -> MicroComparison:
    """Rates of the micro run and of the closed-form master equation.

    ``window`` is in units of 1/Gamma.  R_Sp comes from the closed-form
    moments started from the same system state; ``R_Sp_micro`` evaluates the
    same formula on the micro run's own system moments.
    """
    model = traj.model
    baths = [b.bath for b in model.baths]
    Gamma = model.gamma_total
    own = traj.system_moments()
    closed = [evolve_moments(own[0], baths, model.omega, t) for t in traj.times]
    mask = (traj.times >= window[0] / Gamma - 1e-12) & (traj.times <= window[1] / Gamma + 1e-12)

    def spohn(ms):
        out = np.full(len(ms), np.nan)
        for i, m in enumerate(ms):
            if i == 0 and m.n == 0:
                continue
            out[i] = sum(spohn_rate_gaussian(m, b, model.omega) for b in baths)
        return out

    chi = np.array([[chi_alpha(m, b, model.omega) for b in baths] for m in closed])
    fd = np.empty((len(traj), len(baths)))
    ref = np.empty_like(fd)
    for k in range(len(baths)):
        rates = bath_entropy_rate(traj, k)
        fd[:, k] = rates.finite_difference
        ref[:, k] = rates.fixed_reference
    return MicroComparison(traj.times, mask, traj.mutual_information(), mutual_information_rate(traj),
                           spohn(closed), spohn(own), chi, fd, ref)


def run_micro(baths: Sequence[BathSpec], omega: float, system: Moments | GaussianState | None = None,
              n_modes: int = 200, width_factor: float = DEFAULT_WIDTH_FACTOR, horizon_factor: float = 5.0,
              n_steps: int = 400, layout: str = "pair") -> MicroTrajectory:
    """Build, initialize and evolve over ``horizon_factor / Gamma``."""
    model = build_micro_model(baths, omega, n_modes, width_factor, layout)
    state = build_initial_total_state(model, system if system is not None else Moments.vacuum())
    return evolve_total(state, model, horizon_factor / model.gamma_total, n_steps)
