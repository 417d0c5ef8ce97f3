"""
Generic finite-dimensional GKSL machinery: vectorized generators, steady
states, Spohn rates and randomized probes of Lieb concavity/convexity.

Vectorization is row-major, vec(A X B) = (A kron B^T) vec(X).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import spsolve

from .errors import ConditioningError, DegeneracyError, InputError
from .matfuncs import hermitize, logm_psd, powm_psd, real_part_checked, relative_entropy

RESIDUAL_TOL = 1e-10
DEGENERACY_RATIO = 1e-8


@dataclass(frozen=True)
class GkslGenerator:
    """d x d Lindbladian with jump operators grouped by bath label."""

    dim: int
    hamiltonian: np.ndarray
    jumps: Mapping[str, Sequence[np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.hamiltonian, dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise InputError("Hamiltonian has the wrong shape")
        if np.max(np.abs(H - H.conj().T)) > 1e-12:
            raise InputError("Hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "jumps", {k: [np.asarray(v, dtype=complex) for v in vs] for k, vs in self.jumps.items()})

    @property
    def labels(self) -> list[str]:
        return list(self.jumps)

    def _ops(self, label):
        if label is None:
            return [v for vs in self.jumps.values() for v in vs]
        if label not in self.jumps:
            raise InputError(f"unknown bath label {label!r}")
        return self.jumps[label]

    def apply(self, rho, label: str | None = None):
        """Total generator (with Hamiltonian) for ``label=None``, else one bath's dissipator."""
        out = np.zeros_like(rho, dtype=complex)
        if label is None:
            out += 1j * (rho @ self.hamiltonian - self.hamiltonian @ rho)
        for V in self._ops(label):
            VdV = V.conj().T @ V
            out += V @ rho @ V.conj().T - 0.5 * (VdV @ rho + rho @ VdV)
        return out

    def superoperator(self, label: str | None = None, sparse: bool = False):
        d = self.dim
        if sparse:
            eye = sp.identity(d, format="csr", dtype=complex)
            kron = lambda A, B: sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr")  # noqa: E731
            L = sp.csr_matrix((d * d, d * d), dtype=complex)
        else:
            eye = np.eye(d)
            kron = np.kron
            L = np.zeros((d * d, d * d), dtype=complex)
        if label is None:
            H = self.hamiltonian
            L = L - 1j * kron(H, eye) + 1j * kron(eye, H.T)
        for V in self._ops(label):
            VdV = V.conj().T @ V
            L = L + kron(V, V.conj()) - 0.5 * kron(VdV, eye) - 0.5 * kron(eye, VdV.T)
        return L

    def restricted(self, label: str) -> "GkslGenerator":
        return GkslGenerator(self.dim, np.zeros((self.dim, self.dim)), {label: self.jumps[label]})


def from_dissipators(dissipators, hamiltonian=None, labels: Sequence[str] | None = None) -> GkslGenerator:
    """Lindblad-form generator equivalent to a list of Fock-space dissipators."""
    dim = dissipators[0].dim
    labels = labels or [f"bath{i}" for i in range(len(dissipators))]
    H = np.zeros((dim, dim)) if hamiltonian is None else hamiltonian
    return GkslGenerator(dim, H, {lab: d.jump_operators() for lab, d in zip(labels, dissipators)})


def amplitude_damping(gamma: float = 1.0) -> GkslGenerator:
    """Qubit decay |1> -> |0> with rate gamma (basis order |0>, |1>)."""
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    return GkslGenerator(2, np.zeros((2, 2)), {"bath0": [math.sqrt(gamma) * lower]})


def _complex_gaussian(rng, shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2)


def random_gksl(d: int, jumps_per_bath: int = 2, baths: int = 1, seed: int | None = None,
                hamiltonian: bool = True) -> GkslGenerator:
    """Reproducible random generator; each bath's dissipator is scaled to unit spectral norm."""
    if d < 2:
        raise InputError("need d >= 2")
    rng = np.random.default_rng(seed)
    H = np.zeros((d, d), dtype=complex)
    if hamiltonian:
        G = _complex_gaussian(rng, (d, d))
        H = 0.5 * (G + G.conj().T)
    jumps = {}
    for b in range(baths):
        ops = [_complex_gaussian(rng, (d, d)) for _ in range(jumps_per_bath)]
        label = f"bath{b}"
        norm = np.linalg.norm(GkslGenerator(d, np.zeros((d, d)), {label: ops}).superoperator(), 2)
        jumps[label] = [V / math.sqrt(norm) for V in ops]
    return GkslGenerator(d, H, jumps)


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    """Wishart-type full-rank density matrix G G^dag / tr."""
    G = _complex_gaussian(rng, (d, d))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def _finish_state(x, d):
    rho = x.reshape(d, d)
    rho = rho / np.trace(rho)
    rho = hermitize(rho)
    w, v = np.linalg.eigh(rho)
    rho = (v * np.maximum(w, 0)) @ v.conj().T
    return rho / np.trace(rho).real


def steady_state(gen: GkslGenerator, label: str | None = None, method: str = "svd") -> np.ndarray:
    """Trace-one kernel element of the (total or single-bath) generator.

    ``method="svd"`` also certifies that the kernel is one-dimensional;
    ``"sparse"`` replaces one equation with the trace condition and solves by
    sparse LU, which scales to the large truncations of squeezed states.
    """
    d = gen.dim
    if method == "svd":
        L = gen.superoperator(label)
        _, s, vh = np.linalg.svd(L)
        if s[-2] < DEGENERACY_RATIO * s[0]:
            kernel = int(np.sum(s < DEGENERACY_RATIO * s[0]))
            raise DegeneracyError("steady state is not unique", kernel)
        rho = _finish_state(vh[-1].conj(), d)
    elif method == "sparse":
        L = gen.superoperator(label, sparse=True).tolil()
        trace_row = np.zeros(d * d, dtype=complex)
        trace_row[:: d + 1] = 1.0
        L[0, :] = trace_row
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        rho = _finish_state(spsolve(L.tocsc(), rhs), d)
    else:
        raise InputError(f"unknown method {method!r}")
    return rho


def steady_state_residual(gen: GkslGenerator, rho, label: str | None = None) -> float:
    return float(np.linalg.norm(gen.apply(rho, label)))


def spohn_rate_general(rho, gen: GkslGenerator, label: str, rho_ss) -> float:
    """tr[L_alpha[rho] (ln rho_ss - ln rho)]."""
    Lr = gen.apply(rho, label)
    return real_part_checked(np.trace(Lr @ (logm_psd(rho_ss) - logm_psd(rho))), scale=float(np.abs(Lr).sum()))


def total_spohn_rate(rho, gen: GkslGenerator, partial_states: Mapping[str, np.ndarray] | None = None) -> float:
    """Sum over baths of the per-bath Spohn rates, each with its own partial steady state."""
    partial_states = partial_states or {lab: steady_state(gen, lab) for lab in gen.labels}
    return sum(spohn_rate_general(rho, gen, lab, partial_states[lab]) for lab in gen.labels)


def evolve_gksl(gen: GkslGenerator, rho0, times) -> list[np.ndarray]:
    """Exact propagation via the exponential of the vectorized generator."""
    d = gen.dim
    L = gen.superoperator()
    out = []
    vec = np.asarray(rho0, dtype=complex).reshape(-1)
    t_prev = 0.0
    cache = {}
    for t in times:
        step = float(t) - t_prev
        key = round(step, 15)
        if key not in cache:
            cache[key] = expm(L * step)
        vec = cache[key] @ vec
        out.append(hermitize(vec.reshape(d, d)))
        t_prev = float(t)
    return out


def relative_entropy_rate(states: Sequence[np.ndarray], rho_ss, dt: float) -> np.ndarray:
    """-d/dt S(rho(t) || rho_ss) by finite differences (centered inside, second order at the ends)."""
    rel = np.array([relative_entropy(r, rho_ss) for r in states])
    return -np.gradient(rel, dt, edge_order=2)


# ---------------------------------------------------------------------------
# Lieb functional probes


@dataclass(frozen=True)
class ConvexityProbe:
    V: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    lam: float
    q: float

    def __post_init__(self):
        if not 0 <= self.lam <= 1 or not 0 <= self.q <= 1:
            raise InputError("mixing weight and exponent must lie in [0, 1]")


def lieb_functional(rho, V, q: float) -> float:
    """f_q(rho) = -tr[rho^q V rho^{1-q} V^dag]."""
    val = np.trace(powm_psd(rho, q) @ V @ powm_psd(rho, 1 - q) @ V.conj().T)
    return -real_part_checked(val, scale=float(np.abs(V).sum() ** 2))


def lieb_convexity_probe(probe: ConvexityProbe) -> float:
    """lam f(rho1) + (1-lam) f(rho2) - f(mixture); non-negative by Lieb's theorem."""
    lam, q, V = probe.lam, probe.q, probe.V
    mix = lam * probe.rho1 + (1 - lam) * probe.rho2
    return lam * lieb_functional(probe.rho1, V, q) + (1 - lam) * lieb_functional(probe.rho2, V, q) - lieb_functional(mix, V, q)


def lieb_derivative(rho, V, eps: float = 1e-5) -> float:
    """Forward difference of f_q in q at q = 0 (second order)."""
    f0 = lieb_functional(rho, V, 0.0)
    f1 = lieb_functional(rho, V, eps)
    f2 = lieb_functional(rho, V, 2 * eps)
    return (-3 * f0 + 4 * f1 - f2) / (2 * eps)


def single_jump_entropy_term(rho, V) -> float:
    """-tr[L_V[rho] ln rho] with L_V[rho] = V rho V^dag - {V^dag V, rho}/2."""
    gen = GkslGenerator(rho.shape[0], np.zeros(rho.shape), {"v": [V]})
    return -real_part_checked(np.trace(gen.apply(rho, "v") @ logm_psd(rho)))


def random_probe(d: int, rng: np.random.Generator) -> ConvexityProbe:
    return ConvexityProbe(_complex_gaussian(rng, (d, d)), random_state(d, rng), random_state(d, rng),
                          float(rng.uniform()), float(rng.uniform()))


# ---------------------------------------------------------------------------
# randomized sweeps


@dataclass
class SweepResult:
    name: str
    samples: int
    minimum: float
    tolerance: float
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def _encode(m) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def dump_counterexample(path, seed: int, dim: int, matrices: Mapping[str, np.ndarray], **extra) -> str:
    """Write one counterexample as JSON (matrices row-major, entries [re, im]) atomically."""
    payload = {"seed": int(seed), "dimension": int(dim), **extra,
               "matrices": {k: _encode(v) for k, v in matrices.items()}}
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=1)
    os.replace(tmp, path)
    return path


def load_counterexample(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    payload["matrices"] = {k: np.array([[complex(*z) for z in row] for row in v]) for k, v in payload["matrices"].items()}
    return payload


def spohn_positivity_sweep(samples: int = 10_000, dims: Sequence[int] = (2, 3, 4, 6), seed: int = 0,
                           tol: float = 1e-8, dump_dir=None) -> SweepResult:
    """Spohn rate of random (generator, state) pairs; each sample has its own child seed."""
    result = SweepResult("spohn_positivity", samples, math.inf, tol)
    seeds = np.random.SeedSequence(seed).generate_state(samples)
    for i, s in enumerate(seeds):
        d = dims[i % len(dims)]
        rng = np.random.default_rng(int(s))
        gen = random_gksl(d, jumps_per_bath=int(rng.integers(1, 4)), baths=1, seed=int(s))
        rho_ss = steady_state(gen, "bath0")
        rho = random_state(d, rng)
        try:
            val = spohn_rate_general(rho, gen, "bath0", rho_ss)
        except ConditioningError:
            continue
        result.minimum = min(result.minimum, val)
        if val < -tol:
            entry = {"seed": int(s), "value": val}
            if dump_dir is not None:
                mats = {"rho": rho, "rho_ss": rho_ss, **{f"V{k}": V for k, V in enumerate(gen.jumps["bath0"])}}
                entry["path"] = dump_counterexample(os.path.join(dump_dir, f"spohn_{int(s)}.json"), int(s), d, mats, value=val)
            result.counterexamples.append(entry)
    return result


def lieb_convexity_sweep(samples: int = 10_000, dims: Sequence[int] = (2, 3, 4), seed: int = 0,
                         tol: float = 1e-9, dump_dir=None) -> SweepResult:
    result = SweepResult("lieb_convexity", samples, math.inf, tol)
    seeds = np.random.SeedSequence(seed).generate_state(samples)
    for i, s in enumerate(seeds):
        d = dims[i % len(dims)]
        probe = random_probe(d, np.random.default_rng(int(s)))
        margin = lieb_convexity_probe(probe)
        result.minimum = min(result.minimum, margin)
        if margin < -tol:
            entry = {"seed": int(s), "value": margin}
            if dump_dir is not None:
                mats = {"V": probe.V, "rho1": probe.rho1, "rho2": probe.rho2}
                entry["path"] = dump_counterexample(os.path.join(dump_dir, f"lieb_{int(s)}.json"), int(s), d, mats,
                                                    value=margin, lam=probe.lam, q=probe.q)
            result.counterexamples.append(entry)
    return result
