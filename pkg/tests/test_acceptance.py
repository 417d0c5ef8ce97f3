"""Acceptance criteria C1 to C9.

Each test prints one ``[PASS]``/``[FAIL]`` line with the worst observed
value next to the tolerance, then asserts the criterion at that tolerance.
"""

import pytest

from entroflux.verify import CHECKS


def _run(key, capsys):
    res = CHECKS[key]()
    with capsys.disabled():
        print("\n" + res.line())
    return res


def test_c1_thermal_equivalence(capsys):
    res = _run("C1", capsys)
    assert res.passed, res.line()


def test_c2_squeezed_spohn_positivity(capsys):
    res = _run("C2", capsys)
    assert res.passed, res.line()


@pytest.mark.slow
def test_c3_chi_matches_bath_entropy_rate(capsys):
    res = _run("C3", capsys)
    assert res.passed, res.line()


@pytest.mark.slow
def test_c4_mutual_information_rate_converges(capsys):
    res = _run("C4", capsys)
    assert res.passed, res.line()


def test_c5_partial_steady_states(capsys):
    res = _run("C5", capsys)
    assert res.passed, res.line()


def test_c6_regression_theorem(capsys):
    res = _run("C6", capsys)
    assert res.passed, res.line()


def test_c7_gksl_probes(capsys):
    res = _run("C7", capsys)
    assert res.passed, res.line()


@pytest.mark.slow
def test_c8_mutual_information_monotone(capsys):
    res = _run("C8", capsys)
    assert res.passed, res.line()


def test_c9_cross_validation(capsys):
    res = _run("C9", capsys)
    assert res.passed, res.line()
