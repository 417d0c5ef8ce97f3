"""
Gaussian-state algebra for bosonic modes.

Conventions: quadratures x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)),
interleaved ordering (x1, p1, x2, p2, ...), covariance
sigma_ij = <{dR_i, dR_j}>/2 so the vacuum has sigma = I/2.  hbar = k_B = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import xlogy

from .errors import InputError, PhysicalityError

PHYS_TOL = 1e-9


def planck_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(exp(omega/T) - 1); zero at T = 0."""
    if temperature < 0:
        raise InputError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    return 1.0 / math.expm1(omega / temperature)


def temperature_for_occupation(omega: float, nbar: float) -> float:
    if nbar < 0:
        raise InputError(f"occupation must be >= 0, got {nbar}")
    if nbar == 0:
        return 0.0
    return omega / math.log1p(1.0 / nbar)


def squeezed_thermal_occupations(nbar: float, r: float, theta: float) -> tuple[float, complex]:
    """Normal and anomalous moments of a squeezed thermal mode.

    Returns ``(n, u)`` with ``n = cosh(2r)(nbar + 1/2) - 1/2`` and
    ``u = exp(i theta) sinh(2r)(nbar + 1/2)``.
    """
    if not (np.isfinite(nbar) and np.isfinite(r) and np.isfinite(theta)):
        raise InputError("non-finite squeeze parameters")
    if nbar < 0 or r < 0:
        raise InputError(f"need nbar >= 0 and r >= 0, got nbar={nbar}, r={r}")
    half = nbar + 0.5
    n = math.cosh(2 * r) * half - 0.5
    u = complex(math.cos(theta), math.sin(theta)) * math.sinh(2 * r) * half
    return n, u


@dataclass(frozen=True)
class BathSpec:
    """One squeezed thermal bath.

    ``gamma`` is the coupling rate at the system frequency, ``r`` and
    ``theta`` the squeeze amplitude and phase.  ``temperature == 0`` is
    accepted as the T -> 0+ limit.
    """

    temperature: float
    gamma: float
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.temperature >= 0:
            raise InputError(f"temperature must be >= 0, got {self.temperature}")
        if not self.gamma > 0:
            raise InputError(f"gamma must be > 0, got {self.gamma}")
        if not self.r >= 0:
            raise InputError(f"squeeze amplitude must be >= 0, got {self.r}")

    @classmethod
    def from_occupation(cls, nbar: float, omega: float, gamma: float, r: float = 0.0, theta: float = 0.0):
        return cls(temperature_for_occupation(omega, nbar), gamma, r, theta)

    @property
    def is_thermal(self) -> bool:
        return self.r == 0

    @property
    def beta(self) -> float:
        if self.temperature == 0:
            raise InputError("inverse temperature undefined at T = 0")
        return 1.0 / self.temperature

    def planck(self, omega: float) -> float:
        return planck_occupation(omega, self.temperature)

    def occupations(self, omega: float) -> tuple[float, complex]:
        """(n~, u~) of the bath at frequency ``omega``."""
        return squeezed_thermal_occupations(self.planck(omega), self.r, self.theta)


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of ``n`` bosonic modes."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    n_modes: int = field(init=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise InputError(f"covariance must be 2n x 2n, got shape {cov.shape}")
        if mean.shape[0] != cov.shape[0]:
            raise InputError("mean and covariance sizes differ")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-10 * scale:
            raise InputError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "n_modes", cov.shape[0] // 2)

    @classmethod
    def vacuum(cls, n_modes: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))

    @classmethod
    def thermal(cls, nbar: float) -> "GaussianState":
        return cls(np.zeros(2), (nbar + 0.5) * np.eye(2))

    @classmethod
    def from_moments(cls, a_mean: complex, a_sq: complex, n: float) -> "GaussianState":
        """Single-mode state from <a>, <a^2>, <a^dag a>."""
        a_mean = complex(a_mean)
        c = n - abs(a_mean) ** 2 + 0.5
        u = complex(a_sq) - a_mean**2
        cov = np.array([[c + u.real, u.imag], [u.imag, c - u.real]])
        mean = math.sqrt(2) * np.array([a_mean.real, a_mean.imag])
        return cls(mean, cov)

    @classmethod
    def squeezed_thermal(cls, nbar: float, r: float, theta: float = 0.0) -> "GaussianState":
        """Squeezed thermal mode with <a^2> = exp(i theta) sinh(2r)(nbar + 1/2)."""
        n, u = squeezed_thermal_occupations(nbar, r, theta)
        return cls.from_moments(0.0, u, n)

    @classmethod
    def two_mode_squeezed(cls, r: float, theta: float = 0.0) -> "GaussianState":
        """Two-mode squeezed vacuum, <a1 a2> = exp(i theta) sinh(2r)/2."""
        N = np.diag([math.sinh(r) ** 2] * 2).astype(complex)
        m = complex(math.cos(theta), math.sin(theta)) * math.sinh(2 * r) / 2
        M = np.array([[0, m], [m, 0]])
        return cls(np.zeros(4), covariance_from_moments(N, M))

    def moments(self) -> tuple[NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128]]:
        """Return (<a_i>, N_ij = <a_i^dag a_j>, M_ij = <a_i a_j>), all uncentered."""
        alpha = (self.mean[0::2] + 1j * self.mean[1::2]) / math.sqrt(2)
        N, M = complex_moments(self.cov)
        N = N + np.outer(alpha.conj(), alpha)
        M = M + np.outer(alpha, alpha)
        return alpha, N, M


def covariance_from_moments(N, M) -> NDArray[np.float64]:
    """Quadrature covariance from centered <a_i^dag a_j> and <a_i a_j>."""
    N = np.asarray(N, dtype=complex)
    M = np.asarray(M, dtype=complex)
    n = N.shape[0]
    cov = np.empty((2 * n, 2 * n))
    eye = 0.5 * np.eye(n)
    cov[0::2, 0::2] = M.real + N.real + eye
    cov[1::2, 1::2] = -M.real + N.real + eye
    xp = M.imag + N.imag
    cov[0::2, 1::2] = xp
    cov[1::2, 0::2] = xp.T
    return cov


def complex_moments(cov) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Inverse of :func:`covariance_from_moments`: centered (N, M)."""
    xx = cov[0::2, 0::2]
    pp = cov[1::2, 1::2]
    xp = cov[0::2, 1::2]
    px = cov[1::2, 0::2]
    n = xx.shape[0]
    N = 0.5 * (xx + pp + 1j * (xp - px)) - 0.5 * np.eye(n)
    M = 0.5 * (xx - pp + 1j * (xp + px))
    return N, M


def symplectic_eigenvalues(state: GaussianState | NDArray) -> NDArray[np.float64]:
    """Williamson spectrum in descending order.

    Raises :class:`PhysicalityError` when an eigenvalue falls below 1/2 by
    more than ``PHYS_TOL``; marginal violations are clamped to 1/2.
    """
    if not isinstance(state, GaussianState):
        state = GaussianState(np.zeros(np.shape(state)[0]), state)
    cov = state.cov
    n = state.n_modes
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise PhysicalityError("covariance matrix is not positive definite") from None
    # i L^T Omega L is Hermitian and shares the +-nu spectrum of i Omega sigma
    herm = 1j * (chol.T @ symplectic_form(n) @ chol)
    ev = np.linalg.eigvalsh(herm)
    nu = np.sort(ev[n:])[::-1]
    if nu[-1] < 0.5 - PHYS_TOL:
        raise PhysicalityError(f"symplectic eigenvalue {nu[-1]:.12g} < 1/2")
    # rounding leaves pure modes a few ulps above 1/2
    return np.where(nu < 0.5 + 1e-14, 0.5, nu)


def entropy_from_spectrum(nu) -> float:
    nu = np.asarray(nu, dtype=float)
    return float(np.sum(xlogy(nu + 0.5, nu + 0.5) - xlogy(nu - 0.5, nu - 0.5)))


def gaussian_entropy(state: GaussianState | NDArray) -> float:
    """von Neumann entropy (nats) of a Gaussian state."""
    return entropy_from_spectrum(symplectic_eigenvalues(state))


def _quadrature_index(modes: Sequence[int], n_modes: int) -> NDArray[np.int64]:
    modes = np.asarray(list(modes), dtype=int)
    if modes.size == 0:
        raise InputError("mode subset is empty")
    if modes.min() < 0 or modes.max() >= n_modes:
        raise InputError(f"mode index out of range for {n_modes} modes")
    if np.unique(modes).size != modes.size:
        raise InputError("repeated mode index")
    return np.stack([2 * modes, 2 * modes + 1], axis=1).reshape(-1)


def partial_state(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    idx = _quadrature_index(modes, state.n_modes)
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def direct_sum(*states: GaussianState) -> GaussianState:
    """Product state of uncorrelated blocks."""
    from scipy.linalg import block_diag

    return GaussianState(np.concatenate([s.mean for s in states]), block_diag(*[s.cov for s in states]))


def mutual_information(state: GaussianState, part_a: Sequence[int], part_b: Sequence[int] | None = None) -> float:
    """I(A:B) = S_A + S_B - S_AB for a bipartition of the modes."""
    part_a = list(part_a)
    if part_b is None:
        part_b = [m for m in range(state.n_modes) if m not in set(part_a)]
    part_b = list(part_b)
    if not part_a or not part_b or set(part_a) & set(part_b):
        raise InputError("partition must consist of two nonempty disjoint sets")
    if sorted(part_a + part_b) != list(range(state.n_modes)):
        raise InputError("partition does not cover all modes")
    s_a = gaussian_entropy(partial_state(state, part_a))
    s_b = gaussian_entropy(partial_state(state, part_b))
    return s_a + s_b - gaussian_entropy(state)


def random_symplectic(n_modes: int, rng: np.random.Generator, scale: float = 1.0) -> NDArray[np.float64]:
    """exp(Omega K) with K random symmetric; always symplectic."""
    from scipy.linalg import expm

    K = rng.normal(size=(2 * n_modes, 2 * n_modes)) * scale
    K = 0.5 * (K + K.T)
    return expm(symplectic_form(n_modes) @ K)


def gibbs_matrix(state: GaussianState | NDArray) -> NDArray[np.float64]:
    """G with rho = exp(-(R-mu)^T G (R-mu)/2)/Z, i.e. G = 2 i Omega arccoth(2 i sigma Omega).

    Needs every symplectic eigenvalue strictly above 1/2.
    """
    cov = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    omega = symplectic_form(cov.shape[0] // 2)
    w, v = np.linalg.eig(2j * cov @ omega)
    if np.min(np.abs(w)) <= 1.0 + 1e-12:
        raise PhysicalityError("state has a pure mode: ln rho is unbounded")
    G = 2j * omega @ ((v * np.arctanh(1.0 / w)) @ np.linalg.inv(v))
    return np.real(0.5 * (G + G.T))
