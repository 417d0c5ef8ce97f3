import json

import numpy as np
import pytest

from entroflux.errors import DegeneracyError, InputError
from entroflux.fock import Dissipator, SystemSpec, fock_state, thermal_rho
from entroflux.gaussian import BathSpec
from entroflux.gksl import (
    ConvexityProbe,
    GkslGenerator,
    amplitude_damping,
    dump_counterexample,
    evolve_gksl,
    from_dissipators,
    lieb_convexity_probe,
    lieb_convexity_sweep,
    lieb_derivative,
    load_counterexample,
    random_gksl,
    random_state,
    relative_entropy_rate,
    single_jump_entropy_term,
    spohn_positivity_sweep,
    spohn_rate_general,
    steady_state,
    steady_state_residual,
    total_spohn_rate,
)


def test_amplitude_damping_steady_state():
    gen = amplitude_damping(1.0)
    rho = steady_state(gen)
    assert np.allclose(rho, np.diag([1.0, 0.0]), atol=1e-12)
    assert steady_state_residual(gen, rho) < 1e-12


def test_superoperator_matches_apply(rng):
    gen = random_gksl(3, jumps_per_bath=2, baths=2, seed=5)
    rho = random_state(3, rng)
    for label in (None, "bath0", "bath1"):
        L = gen.superoperator(label)
        assert np.allclose((L @ rho.reshape(-1)).reshape(3, 3), gen.apply(rho, label), atol=1e-12)
        assert np.allclose(gen.superoperator(label, sparse=True).toarray(), L)


def test_degenerate_kernel_is_reported():
    gen = GkslGenerator(2, np.zeros((2, 2)), {"bath0": [np.diag([1.0, -1.0])]})
    with pytest.raises(DegeneracyError) as info:
        steady_state(gen)
    assert info.value.kernel_dim == 2


def test_svd_and_sparse_agree():
    gen = random_gksl(4, jumps_per_bath=2, baths=1, seed=11)
    a = steady_state(gen, "bath0", method="svd")
    b = steady_state(gen, "bath0", method="sparse")
    assert np.allclose(a, b, atol=1e-10)
    with pytest.raises(InputError):
        steady_state(gen, method="qr")


def test_input_validation():
    with pytest.raises(InputError):
        GkslGenerator(2, np.array([[0, 1], [0, 0]]), {})
    with pytest.raises(InputError):
        random_gksl(3, seed=0).apply(np.eye(3) / 3, "nope")


def test_from_dissipators_wraps_fock_channels():
    bath = BathSpec(1.0, 0.1)
    system = SystemSpec(1.0, 12)
    gen = from_dissipators([Dissipator(bath, system)])
    assert gen.labels == ["bath0"]
    rho = fock_state(2, 12)
    assert np.allclose(gen.apply(rho, "bath0"), Dissipator(bath, system)(rho), atol=1e-12)
    ss = steady_state(gen, "bath0")
    assert np.allclose(ss, thermal_rho(bath.planck(1.0), 12), atol=1e-4)


def test_spohn_rate_equals_relative_entropy_decay(rng):
    gen = random_gksl(3, jumps_per_bath=2, baths=1, seed=3, hamiltonian=False)
    rho_ss = steady_state(gen)
    rho0 = random_state(3, rng)
    dt = 1e-4
    states = evolve_gksl(gen, rho0, np.arange(5) * dt)
    fd = relative_entropy_rate(states, rho_ss, dt)
    assert fd[2] == pytest.approx(spohn_rate_general(states[2], gen, "bath0", rho_ss), rel=1e-5)


def test_total_spohn_rate_is_nonnegative(rng):
    gen = random_gksl(4, jumps_per_bath=2, baths=3, seed=8)
    assert total_spohn_rate(random_state(4, rng), gen) >= -1e-10


def test_lieb_derivative_matches_entropy_term(rng):
    rho = random_state(3, rng)
    V = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert lieb_derivative(rho, V) == pytest.approx(single_jump_entropy_term(rho, V), rel=1e-6, abs=1e-8)


def test_convexity_probe_edges(rng):
    rho1, rho2 = random_state(3, rng), random_state(3, rng)
    V = np.eye(3)
    assert lieb_convexity_probe(ConvexityProbe(V, rho1, rho2, 1.0, 0.3)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InputError):
        ConvexityProbe(V, rho1, rho2, 1.5, 0.3)


def test_small_sweeps_pass(tmp_path):
    s = spohn_positivity_sweep(samples=40, seed=1, dump_dir=tmp_path)
    c = lieb_convexity_sweep(samples=40, seed=1, dump_dir=tmp_path)
    assert s.passed and c.passed
    assert s.minimum >= -1e-8 and c.minimum >= -1e-9
    assert not list(tmp_path.iterdir())


def test_sweeps_are_deterministic():
    a = lieb_convexity_sweep(samples=10, seed=4)
    b = lieb_convexity_sweep(samples=10, seed=4)
    assert a.minimum == b.minimum


def test_counterexample_roundtrip(tmp_path):
    M = np.array([[1 + 2j, 0], [0.5, -1j]])
    path = dump_counterexample(tmp_path / "x.json", 42, 2, {"M": M}, value=-0.1)
    raw = json.loads((tmp_path / "x.json").read_text())
    assert raw["seed"] == 42 and raw["dimension"] == 2 and raw["matrices"]["M"][0][0] == [1.0, 2.0]
    back = load_counterexample(path)
    assert np.array_equal(back["matrices"]["M"], M)
    assert back["value"] == -0.1
