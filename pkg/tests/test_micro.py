import math

import numpy as np
import pytest

from entroflux.errors import InputError, RecurrenceError
from entroflux.gaussian import (
    BathSpec,
    complex_moments,
    covariance_from_moments,
    gibbs_matrix,
    random_symplectic,
)
from entroflux.micro import (
    BathModes,
    WeightedBathObservable,
    bath_entropy_rate,
    build_initial_total_state,
    build_micro_model,
    compare_with_master,
    discretize_bath,
    energy_balance,
    evolve_total,
    run_micro,
    verify_fk_relations,
)
from entroflux.moments import Moments, evolve_moments, heat_current

OMEGA = 1.0
GAMMA = 0.02


@pytest.fixture(scope="module")
def thermal_run():
    return run_micro([BathSpec(1.0, GAMMA)], OMEGA, Moments.thermal(2.0), n_modes=100, horizon_factor=4, n_steps=200)


@pytest.fixture(scope="module")
def squeezed_run():
    bath = BathSpec.from_occupation(0.5, OMEGA, GAMMA, 0.6, 1.0)
    return run_micro([bath], OMEGA, Moments.vacuum(), n_modes=100, horizon_factor=4, n_steps=200)


def test_discretization_grid():
    modes = discretize_bath(BathSpec(1.0, 0.05), OMEGA, n_modes=200)
    lo, hi = modes.band
    assert lo == pytest.approx(0.0) and hi == pytest.approx(2.0)
    assert modes.delta_omega == pytest.approx(0.01)
    assert modes.couplings[0] == pytest.approx(math.sqrt(0.05 * 0.01 / (2 * math.pi)))
    assert modes.effective_gamma == pytest.approx(0.05)
    assert modes.recurrence_time == pytest.approx(2 * math.pi / 0.01)
    assert np.allclose(modes.omegas + modes.omegas[modes.partner], 2 * OMEGA)


@pytest.mark.parametrize("kwargs", [
    {"n_modes": 40},
    {"n_modes": 101},
    {"width": 0.2},
    {"layout": "ring"},
])
def test_discretization_rejects_bad_grids(kwargs):
    with pytest.raises(InputError):
        discretize_bath(BathSpec(1.0, GAMMA), OMEGA, **kwargs)


def test_grid_must_stay_positive():
    with pytest.raises(InputError):
        discretize_bath(BathSpec(1.0, 0.1), 0.5, n_modes=100)


def test_entropy_weights_match_gibbs_matrix(rng):
    bath = BathSpec.from_occupation(0.5, OMEGA, GAMMA, 0.6, 1.0)
    for layout in ("pair", "mode"):
        modes = BathModes(bath, OMEGA, np.array([0.7, 0.9, 1.1, 1.3]), np.zeros(4), layout)
        N, M = modes.initial_moments()
        cov = covariance_from_moments(N, M)
        S = random_symplectic(4, rng, 0.3)
        N2, M2 = complex_moments(S @ cov @ S.T)
        w = modes.entropy_weights()

        def weighted(N, M):
            return np.diag(N).real @ w.f + 2 * np.real(M[np.arange(4), modes.partner] @ w.h)

        expected = 0.5 * np.trace(gibbs_matrix(cov) @ (S @ cov @ S.T - cov))
        assert weighted(N2, M2) - weighted(N, M) == pytest.approx(expected, rel=1e-10)


def test_weighted_observable_validation():
    with pytest.raises(InputError):
        WeightedBathObservable(np.array([1.0, np.nan]), 0.0)


def test_initial_state_is_a_product(squeezed_run):
    assert squeezed_run.mutual_information()[0] == pytest.approx(0.0, abs=1e-10)


def test_unitarity_and_energy(thermal_run, squeezed_run):
    for traj in (thermal_run, squeezed_run):
        assert np.max(traj.spectrum_drift) < 1e-9
        assert np.max(np.abs(traj.total_entropy - traj.S_SB)) < 1e-8
        scale = np.max(np.abs(np.gradient(traj.energies()["system"], traj.dt)))
        assert np.max(np.abs(energy_balance(traj))) < 1e-6 * max(scale, 1.0)
        assert np.all(traj.mutual_information() > -1e-9)


def test_decoupled_system_is_frozen():
    model = build_micro_model([BathSpec(1.0, GAMMA)], OMEGA, n_modes=50)
    model.baths[0].couplings[:] = 0.0
    traj = evolve_total(build_initial_total_state(model, Moments.thermal(0.7)), model, 20.0, 50)
    assert np.allclose(traj.sys_n, 0.7, atol=1e-12)
    assert np.allclose(traj.S_B[:, 0], traj.S_B[0, 0], atol=1e-10)


def test_mean_decay_follows_master_equation():
    bath = BathSpec(0.5, GAMMA)
    traj = run_micro([bath], OMEGA, Moments.coherent(1.0), n_modes=200, horizon_factor=3, n_steps=150)
    mask = traj.times >= 0.5 / GAMMA
    own = np.abs([m.a_mean for m in traj.system_moments()])[mask]
    expected = np.exp(-GAMMA * traj.times[mask] / 2)
    assert np.max(np.abs(own - expected) / expected) < 0.02


def test_recurrence_guard():
    model = build_micro_model([BathSpec(1.0, GAMMA)], OMEGA, n_modes=50)
    state = build_initial_total_state(model, Moments.vacuum())
    with pytest.raises(RecurrenceError):
        evolve_total(state, model, 0.9 * model.recurrence_time)


def test_energy_flux_relation(thermal_run):
    b = thermal_run.model.baths[0]
    rep = verify_fk_relations(thermal_run, WeightedBathObservable(b.omegas, 0.0), 0)
    mask = (thermal_run.times > 1 / GAMMA) & (thermal_run.times < 3 / GAMMA)
    assert np.max(rep.relative_residual()[mask]) < 0.10
    ms = [evolve_moments(Moments.thermal(2.0), [b.bath], OMEGA, t) for t in thermal_run.times]
    q = np.array([heat_current(m, b.bath, OMEGA) for m in ms])
    assert np.allclose(rep.rhs[mask], -q[mask])
    with pytest.raises(InputError):
        verify_fk_relations(thermal_run, WeightedBathObservable(b.omegas, 0.0), 0, reference="other")


def test_thermal_fixed_reference_rate_is_heat_over_temperature(thermal_run):
    rates = bath_entropy_rate(thermal_run, 0)
    cmp = compare_with_master(thermal_run, window=(1, 3))
    T = thermal_run.model.baths[0].bath.temperature
    ms = [evolve_moments(Moments.thermal(2.0), [BathSpec(1.0, GAMMA)], OMEGA, t) for t in thermal_run.times]
    q = np.array([heat_current(m, BathSpec(1.0, GAMMA), OMEGA) for m in ms])
    assert cmp.max_relative(rates.fixed_reference, -q / T) < 0.10


def test_pair_layout_transfers_squeezing(squeezed_run):
    own = np.array([m.a_sq for m in squeezed_run.system_moments()])
    _, u = squeezed_run.model.baths[0].bath.occupations(OMEGA)
    late = squeezed_run.times > 3 / GAMMA
    assert np.max(np.abs(own[late] - u * (1 - np.exp(-GAMMA * squeezed_run.times[late])))) < 0.1 * abs(u)


def test_mode_layout_does_not_transfer_squeezing():
    bath = BathSpec.from_occupation(0.5, OMEGA, GAMMA, 0.6, 1.0)
    traj = run_micro([bath], OMEGA, Moments.vacuum(), n_modes=100, horizon_factor=3, n_steps=60, layout="mode")
    _, u = bath.occupations(OMEGA)
    late = traj.times > 2 / GAMMA
    assert np.max(np.abs(traj.sys_sq[late])) < 0.05 * abs(u)
