import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from entroflux.errors import InputError, PhysicalityError, SemanticsError
from entroflux.gaussian import BathSpec
from entroflux.moments import (
    Moments,
    chi_alpha,
    evolve_moments,
    fixed_point,
    heat_current,
    moment_rates,
    rate_report,
    spohn_rate_gaussian,
    system_entropy_from_moments,
    thermal_epr,
)

OMEGA = 1.0


def test_zero_time_is_identity():
    m0 = Moments(0.3 + 0.1j, 0.2j, 0.5)
    assert evolve_moments(m0, [BathSpec(1.0, 0.1)], OMEGA, 0.0) == m0


def test_mean_decay_example():
    baths = [BathSpec(1.0, 0.1), BathSpec(2.0, 0.1)]
    m = evolve_moments(Moments(1.0, 1.0, 1.0), baths, OMEGA, 10.0)
    assert m.a_mean.real == pytest.approx(math.exp(-1), abs=1e-12)
    assert m.a_mean.imag == 0.0


def test_matches_rk45_oracle():
    baths = [BathSpec.from_occupation(0.5, OMEGA, 0.07, 0.6, 0.9), BathSpec(1.5, 0.03)]
    m0 = Moments(0.4 - 0.2j, 0.1 + 0.3j, 0.6)

    def rhs(_, y):
        m = Moments(complex(y[0], y[1]), complex(y[2], y[3]), y[4])
        d = moment_rates(m, baths, OMEGA)
        return [d.a_mean.real, d.a_mean.imag, d.a_sq.real, d.a_sq.imag, d.n]

    y0 = [m0.a_mean.real, m0.a_mean.imag, m0.a_sq.real, m0.a_sq.imag, m0.n]
    sol = solve_ivp(rhs, (0, 30), y0, rtol=1e-12, atol=1e-13, t_eval=[5, 15, 30])
    for t, y in zip(sol.t, sol.y.T):
        m = evolve_moments(m0, baths, OMEGA, t)
        assert np.allclose([m.a_mean.real, m.a_mean.imag, m.a_sq.real, m.a_sq.imag, m.n], y, atol=1e-9)


def test_fixed_point_is_rate_weighted_average():
    baths = [BathSpec.from_occupation(0.5, OMEGA, 0.02, 0.8, 1.0), BathSpec.from_occupation(1.2, OMEGA, 0.06)]
    fp = fixed_point(baths, OMEGA)
    late = evolve_moments(Moments.coherent(0.7), baths, OMEGA, 2000.0)
    assert abs(late.a_sq - fp.a_sq) < 1e-10 and abs(late.n - fp.n) < 1e-10 and abs(late.a_mean) < 1e-10
    n1, u1 = baths[0].occupations(OMEGA)
    n2, _ = baths[1].occupations(OMEGA)
    assert fp.n == pytest.approx((0.02 * n1 + 0.06 * n2) / 0.08)
    assert fp.a_sq == pytest.approx(0.02 * u1 / 0.08)


def test_heat_current_example():
    bath = BathSpec.from_occupation(0.5, 1.0, 0.1)
    assert heat_current(Moments.thermal(1.0), bath, 1.0) == pytest.approx(-0.05)
    assert heat_current(Moments.thermal(0.5), bath, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_chi_example_and_thermal_identity():
    bath = BathSpec(1.0, 0.1)
    nbar = bath.planck(1.0)
    m = Moments.thermal(nbar + 0.5)
    assert chi_alpha(m, bath, 1.0) == pytest.approx(0.05)
    for mm in (Moments.thermal(0.2), Moments(0.3, 0.2 - 0.1j, 0.9)):
        assert chi_alpha(mm, bath, 1.0) == pytest.approx(-heat_current(mm, bath, 1.0) / bath.temperature, abs=1e-12)


def test_chi_vanishes_at_own_fixed_point():
    bath = BathSpec.from_occupation(0.8, OMEGA, 0.05, 0.7, 2.2)
    n, u = bath.occupations(OMEGA)
    assert chi_alpha(Moments(0.0, u, n), bath, OMEGA) == pytest.approx(0.0, abs=1e-12)
    assert spohn_rate_gaussian(Moments(0.0, u, n), bath, OMEGA) == pytest.approx(0.0, abs=1e-12)


def test_system_entropy():
    assert system_entropy_from_moments(Moments.vacuum()) == 0.0
    assert system_entropy_from_moments(Moments.thermal(1.0)) == pytest.approx(2 * math.log(2))
    with pytest.raises(PhysicalityError):
        system_entropy_from_moments(Moments(0.0, 2.0, 0.5))


def test_epr_refuses_squeezed_baths():
    bath = BathSpec.from_occupation(0.5, OMEGA, 0.05, 0.3)
    with pytest.raises(SemanticsError, match="temperature is not well"):
        thermal_epr([Moments.thermal(0.2)], [bath], OMEGA)
    with pytest.raises(InputError):
        thermal_epr([Moments.thermal(0.2)], [BathSpec(0.0, 0.05)], OMEGA)


def test_epr_zero_at_single_bath_equilibrium():
    bath = BathSpec(1.0, 0.05)
    m = Moments.thermal(bath.planck(OMEGA))
    assert abs(thermal_epr([m], [bath], OMEGA)[0]) < 1e-12


def test_two_bath_steady_state_epr():
    b1, b2 = BathSpec(1.0, 0.05), BathSpec(2.0, 0.05)
    n1, n2 = b1.planck(1.0), b2.planck(1.0)
    m = Moments.thermal(0.5 * (n1 + n2))
    expected = sum((1.0 / b.temperature) * b.gamma * (m.n - b.planck(1.0)) for b in (b1, b2))
    assert expected > 0
    rep = thermal_epr([m], [b1, b2], 1.0)[0]
    assert rep == pytest.approx(expected, rel=1e-6)
    rsp = sum(spohn_rate_gaussian(m, b, 1.0) for b in (b1, b2))
    assert rep == pytest.approx(rsp, abs=1e-9)


def test_rate_report_totals():
    baths = [BathSpec.from_occupation(0.5, OMEGA, 0.02, 0.8, 1.0), BathSpec(1.0, 0.03)]
    rep = rate_report(3.0, Moments(0.1, 0.2j, 0.7), baths, OMEGA)
    assert rep.R_ep is None
    assert rep.R_Sp == pytest.approx(sum(rep.spohn), abs=1e-10)
    thermal = rate_report(3.0, Moments(0.1, 0.2j, 0.7), [BathSpec(1.0, 0.03)], OMEGA)
    assert thermal.R_ep == pytest.approx(thermal.R_Sp, abs=1e-6)


@given(st.floats(0.01, 2.0), st.floats(0.0, 1.5), st.floats(0.0, 6.3), st.floats(0.55, 3.0), st.floats(0.0, 200.0))
def test_spohn_rate_nonnegative_on_gaussian_states(nbar, r, theta, nu, t):
    bath = BathSpec.from_occupation(nbar, OMEGA, 0.05, r, theta)
    m0 = Moments(0.2, 0.1 * nu, nu - 0.5 + 0.05)
    if not m0.is_physical():
        return
    m = evolve_moments(m0, [bath, BathSpec(0.7, 0.02)], OMEGA, t)
    assert spohn_rate_gaussian(m, bath, OMEGA) >= -1e-10


@given(st.floats(0.0, 2.0), st.floats(0.0, 1.5), st.floats(0.0, 6.3), st.floats(0.0, 100.0))
def test_evolution_preserves_physicality(nbar, r, theta, t):
    bath = BathSpec.from_occupation(nbar, OMEGA, 0.05, r, theta) if nbar > 0 else BathSpec(0.0, 0.05, r, theta)
    m = evolve_moments(Moments.coherent(0.3j), [bath], OMEGA, t)
    assert m.is_physical()
