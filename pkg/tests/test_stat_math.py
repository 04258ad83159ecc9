import math

import pytest

from stat_math import (
    binary_entropy,
    binary_entropy_inverse,
    gamma_correction,
    hoeffding_delta,
    serfling_error_upper,
)


def test_binary_entropy_endpoints():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("x", [0.001, 0.0218, 0.1, 0.3, 0.45])
def test_binary_entropy_symmetric(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)


def test_binary_entropy_known_value():
    assert binary_entropy(0.0218) == pytest.approx(0.15144, abs=1e-4)


def test_binary_entropy_rejects_out_of_range():
    with pytest.raises(ValueError):
        binary_entropy(1.2)


@pytest.mark.parametrize("p", [1e-4, 0.001, 0.05, 0.11, 0.3, 0.49])
def test_entropy_inverse_recovers_argument(p):
    assert binary_entropy_inverse(binary_entropy(p)) == pytest.approx(p, abs=1e-10)


def test_entropy_inverse_edges():
    assert binary_entropy_inverse(0.0) == 0.0
    assert binary_entropy_inverse(1.0) == 0.5
    with pytest.raises(ValueError):
        binary_entropy_inverse(1.5)
    with pytest.raises(ValueError):
        binary_entropy_inverse(-0.1)


def test_hoeffding_delta():
    assert hoeffding_delta(2000, 1e-5) == pytest.approx(107.30, abs=0.01)
    assert hoeffding_delta(0, 1e-5) == 0.0
    assert hoeffding_delta(5000, 1.0) == 0.0


def test_hoeffding_delta_rejects_bad_input():
    with pytest.raises(ValueError):
        hoeffding_delta(-1, 1e-5)
    with pytest.raises(ValueError):
        hoeffding_delta(10, 0.0)


def test_serfling_known_value():
    assert serfling_error_upper(0.002, 50000, 2500, 1e-5) == pytest.approx(0.05233, abs=1e-4)


def test_serfling_tightens_with_more_tests_and_looser_eps():
    base = serfling_error_upper(0.01, 50000, 1000, 1e-5)
    assert serfling_error_upper(0.01, 50000, 5000, 1e-5) < base
    assert serfling_error_upper(0.01, 50000, 1000, 1e-3) < base
    assert serfling_error_upper(0.01, 50000, 1000, 1.0) == pytest.approx(0.01)


def test_serfling_clamps_to_one():
    assert serfling_error_upper(0.9, 10, 1, 1e-10) == 1.0


@pytest.mark.parametrize("e_obs, L, k", [(0.01, 100, 0), (0.01, 1, 5), (1.5, 100, 5)])
def test_serfling_rejects_bad_input(e_obs, L, k):
    with pytest.raises(ValueError):
        serfling_error_upper(e_obs, L, k, 1e-5)


def test_gamma_known_value():
    assert gamma_correction(1e-10, 0.05, 1e5, 1e5) == pytest.approx(9.366e-3, abs=1e-5)


def test_gamma_symmetric_in_sample_sizes():
    assert gamma_correction(1e-10, 0.03, 2e4, 7e5) == pytest.approx(gamma_correction(1e-10, 0.03, 7e5, 2e4))


def test_gamma_shrinks_with_sample_size():
    small = gamma_correction(1e-10, 0.05, 1e4, 1e4)
    large = gamma_correction(1e-10, 0.05, 1e6, 1e6)
    assert large < small
    assert large == pytest.approx(small / 10.0, rel=0.1)


@pytest.mark.parametrize("b", [0.0, 1.0, -0.1])
def test_gamma_rejects_degenerate_rate(b):
    with pytest.raises(ValueError):
        gamma_correction(1e-10, b, 100, 100)


def test_gamma_rejects_empty_samples():
    with pytest.raises(ValueError):
        gamma_correction(1e-10, 0.1, 0, 100)
    assert math.isfinite(gamma_correction(1.0, 0.1, 100, 100))
