import math

import numpy as np
import pytest

from entroflux.errors import InputError, IntegrationError, TruncationError
from entroflux.fock import (
    Dissipator,
    SystemSpec,
    annihilation,
    chi_fock,
    coherent_rho,
    default_step,
    entropy_rate,
    evolve,
    fock_state,
    gaussian_rho,
    heat_current_fock,
    moments_from_rho,
    partial_steady_state,
    propagate,
    required_dimension,
    spohn_rate,
    squeezed_thermal_rho,
    tail_population,
    thermal_rho,
    two_time_correlation,
    von_neumann_entropy,
)
from entroflux.gaussian import BathSpec
from entroflux.matfuncs import logm_psd
from entroflux.moments import (
    Moments,
    chi_alpha,
    entropy_rate as gaussian_entropy_rate,
    evolve_moments,
    heat_current,
    spohn_rate_gaussian,
    system_entropy_from_moments,
)

OMEGA = 1.0


def squeezed_bath(nbar=0.5, r=0.5, theta=1.0, gamma=0.05):
    return BathSpec.from_occupation(nbar, OMEGA, gamma, r, theta)


def random_rho(d, rng, rank=3):
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    G[d // 3:] = 0
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def test_dissipator_is_trace_preserving_and_hermitian(rng):
    diss = Dissipator(squeezed_bath(), SystemSpec(OMEGA, 30))
    rho = random_rho(30, rng)
    out = diss(rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T, atol=1e-12)


def test_flipped_sign_variant_is_not_hermiticity_preserving(rng):
    diss = Dissipator(squeezed_bath(), SystemSpec(OMEGA, 30), variant="flipped_sign")
    out = diss(random_rho(30, rng))
    assert np.max(np.abs(out - out.conj().T)) > 1e-3
    with pytest.raises(InputError):
        diss.jump_operators()


def test_jump_operators_reproduce_dissipator(rng):
    diss = Dissipator(squeezed_bath(r=0.7, theta=2.0), SystemSpec(OMEGA, 25))
    rho = random_rho(25, rng)
    out = np.zeros_like(rho)
    for V in diss.jump_operators():
        VdV = V.conj().T @ V
        out += V @ rho @ V.conj().T - 0.5 * (VdV @ rho + rho @ VdV)
    assert np.allclose(out, diss(rho), atol=1e-12)


def test_thermal_steady_state():
    bath = BathSpec(1.0, 0.1)
    diss = Dissipator(bath, SystemSpec(OMEGA, 40))
    rho = thermal_rho(bath.planck(OMEGA), 40)
    assert np.linalg.norm(diss(rho)) < 1e-12
    k = np.arange(40)
    nbar = bath.planck(OMEGA)
    exact = np.diag(k * math.log(nbar / (1 + nbar)) - math.log1p(nbar))
    assert np.allclose(diss.log_steady_state(), exact, atol=1e-9)
    assert np.allclose(diss.log_steady_state()[:10, :10], logm_psd(rho)[:10, :10], atol=1e-9)


def test_squeezed_partial_steady_state():
    bath = squeezed_bath(r=0.5)
    system = SystemSpec(OMEGA, required_dimension(0.5, 0.5, budget=1e-11))
    rho = partial_steady_state(bath, system, budget=1e-11)
    assert np.linalg.norm(Dissipator(bath, system)(rho)) < 1e-8
    m = moments_from_rho(rho)
    n, u = bath.occupations(OMEGA)
    assert m.n == pytest.approx(n, abs=1e-8)
    assert m.a_sq == pytest.approx(u, abs=1e-8)


def test_truncation_budget():
    with pytest.raises(TruncationError):
        squeezed_thermal_rho(1.0, 1.0, 0.0, 40)
    assert tail_population(fock_state(0, 10)) == 0.0
    with pytest.raises(TruncationError):
        required_dimension(1.0, 1.0, cap=60)


def test_gaussian_rho_matches_moments():
    m = Moments(0.4 - 0.3j, 0.3 + 0.2j, 0.8)
    rho = gaussian_rho(m, 60)
    f = moments_from_rho(rho)
    assert f.a_mean == pytest.approx(m.a_mean, abs=1e-9)
    assert f.a_sq == pytest.approx(m.a_sq, abs=1e-9)
    assert f.n == pytest.approx(m.n, abs=1e-9)
    assert von_neumann_entropy(rho) == pytest.approx(system_entropy_from_moments(m), abs=1e-8)


def test_coherent_state():
    f = moments_from_rho(coherent_rho(1.2j, 40))
    assert f.a_mean == pytest.approx(1.2j, abs=1e-10)
    assert f.n == pytest.approx(1.44, abs=1e-10)


def test_rates_match_closed_forms():
    baths = [squeezed_bath(r=0.6, theta=0.4, gamma=0.03), BathSpec(1.5, 0.02)]
    m = Moments(0.3, 0.4 + 0.1j, 1.1)
    dim = 70
    rho = gaussian_rho(m, dim, budget=1e-11)
    diss = [Dissipator(b, SystemSpec(OMEGA, dim)) for b in baths]
    for d, b in zip(diss, baths):
        assert heat_current_fock(rho, d) == pytest.approx(heat_current(m, b, OMEGA), abs=1e-8)
        assert chi_fock(rho, d) == pytest.approx(chi_alpha(m, b, OMEGA), abs=1e-6)
        assert spohn_rate(rho, d) == pytest.approx(spohn_rate_gaussian(m, b, OMEGA), abs=1e-6)
    assert entropy_rate(rho, diss) == pytest.approx(gaussian_entropy_rate(m, baths, OMEGA), abs=1e-6)


def test_evolution_tracks_moment_equations():
    baths = [squeezed_bath(r=0.4, gamma=0.1)]
    dim = 50
    diss = [Dissipator(b, SystemSpec(OMEGA, dim)) for b in baths]
    m0 = Moments.coherent(0.5)
    traj = evolve(gaussian_rho(m0, dim), diss, [0.0, 5.0, 20.0])
    for t, rho in traj:
        f, c = moments_from_rho(rho), evolve_moments(m0, baths, OMEGA, t)
        assert abs(f.n - c.n) < 1e-7 and abs(f.a_sq - c.a_sq) < 1e-7 and abs(f.a_mean - c.a_mean) < 1e-7


def test_step_guard_and_sample_order():
    diss = [Dissipator(BathSpec(1.0, 0.1), SystemSpec(OMEGA, 20))]
    with pytest.raises(InputError):
        evolve(fock_state(0, 20), diss, [1.0], dt=1.0)
    with pytest.raises(InputError):
        evolve(fock_state(0, 20), diss, [2.0, 1.0])
    assert default_step(diss) <= 0.02 / 0.1


def test_invariant_breach_reports_time():
    diss = [Dissipator(BathSpec(1.0, 0.1), SystemSpec(OMEGA, 20))]
    bad = fock_state(0, 20) * 1.5
    with pytest.raises(IntegrationError) as info:
        evolve(bad, diss, [1.0])
    assert info.value.time == 0.0


def test_tail_budget_guard_during_evolution():
    diss = [Dissipator(BathSpec.from_occupation(3.0, OMEGA, 0.1), SystemSpec(OMEGA, 20))]
    with pytest.raises(TruncationError):
        evolve(fock_state(0, 20), diss, [50.0])


def test_regression_decay():
    baths = [squeezed_bath(r=0.3, theta=0.5, gamma=0.04)]
    dim = 40
    diss = [Dissipator(b, SystemSpec(OMEGA, dim)) for b in baths]
    rho0 = coherent_rho(0.5, dim)
    s = 10.0
    n_s = moments_from_rho(propagate(rho0, diss, s)).n
    for tau in (5.0, 25.0):
        corr = two_time_correlation(rho0, diss, s + tau, s)
        assert abs(corr) == pytest.approx(n_s * math.exp(-0.02 * tau), abs=1e-7)
    a = annihilation(dim)
    assert two_time_correlation(rho0, diss, s, s) == pytest.approx(np.trace(a.T @ a @ propagate(rho0, diss, s)))
    with pytest.raises(InputError):
        two_time_correlation(rho0, diss, 1.0, 2.0)
