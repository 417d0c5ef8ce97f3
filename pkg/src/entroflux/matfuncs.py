"""Matrix functions of density matrices via Hermitian eigendecomposition."""

from __future__ import annotations

import numpy as np

from .errors import ConditioningError

CLIP_EPS = 1e-12
CLIP_TRACE_TOL = 1e-8


def hermitize(x):
    return 0.5 * (x + x.conj().T)


def clipped_eigh(rho, eps: float = CLIP_EPS):
    """Eigenpairs of ``rho`` with eigenvalues raised to at least ``eps``.

    Raises :class:`ConditioningError` if clipping shifts the trace by more
    than ``CLIP_TRACE_TOL``.
    """
    w, v = np.linalg.eigh(hermitize(rho))
    clipped = np.maximum(w, eps)
    shift = float(np.sum(clipped - w))
    if shift > CLIP_TRACE_TOL:
        raise ConditioningError(f"eigenvalue clipping moved the trace by {shift:.3e}")
    return clipped, v


def logm_psd(rho, eps: float = CLIP_EPS):
    w, v = clipped_eigh(rho, eps)
    return (v * np.log(w)) @ v.conj().T


def powm_psd(rho, q: float, eps: float = CLIP_EPS):
    w, v = clipped_eigh(rho, eps)
    return (v * w**q) @ v.conj().T


def vn_entropy(rho) -> float:
    """-tr[rho ln rho] with 0 ln 0 := 0."""
    w = np.linalg.eigvalsh(hermitize(rho))
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def relative_entropy(rho, sigma, eps: float = CLIP_EPS) -> float:
    """S(rho || sigma) = tr[rho (ln rho - ln sigma)]."""
    return float(np.real(np.trace(rho @ (logm_psd(rho, eps) - logm_psd(sigma, eps)))))


def _sqrtm_psd(rho):
    w, v = np.linalg.eigh(hermitize(rho))
    w = np.where(w > 1e-15 * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr|sqrt(rho) sqrt(sigma)|)^2.

    Singular values of the product keep absolute rounding errors at machine
    precision, which matters when both states are close to pure.
    """
    sv = np.linalg.svd(_sqrtm_psd(rho) @ _sqrtm_psd(sigma), compute_uv=False)
    return float(np.sum(sv) ** 2)


def real_part_checked(z, tol: float = 1e-9, scale: float = 1.0) -> float:
    """Drop an imaginary residue, insisting it is rounding-sized."""
    z = complex(z)
    if abs(z.imag) > tol * max(1.0, scale):
        raise ConditioningError(f"trace has imaginary part {z.imag:.3e}")
    return z.real


__all__ = [
    "CLIP_EPS",
    "clipped_eigh",
    "fidelity",
    "hermitize",
    "logm_psd",
    "powm_psd",
    "real_part_checked",
    "relative_entropy",
    "vn_entropy",
]
