import math

import pytest

from channel_model import Basis, ChannelParams, Link, ObservedCounts, PulseConfig, expected_statistics
from errors import EstimationError, InfeasibleError, InfeasibleTargetError
from security import (
    SecurityParams,
    Thresholds,
    assess,
    epsilon_f,
    max_signature_length,
    min_signature_length,
    p_forge,
    p_repudiation,
    p_robust,
    p_sec,
    signature_time_and_rate,
    solve_p_e,
    thresholds,
)


@pytest.mark.parametrize(
    "s_alpha, s_upsilon",
    [(0.0802, 0.1081), (0.0719, 0.0959), (0.0467, 0.0544)],
)
def test_thresholds_reproduce_field_rows(s_alpha, s_upsilon):
    e_upper = 2 * s_alpha - s_upsilon
    p_e = 2 * s_upsilon - s_alpha
    th = thresholds(e_upper, p_e)
    assert th.s_alpha == pytest.approx(s_alpha, abs=5e-5)
    assert th.s_upsilon == pytest.approx(s_upsilon, abs=5e-5)
    assert th.feasible


@pytest.mark.parametrize("e_upper, p_e", [(0.01, 0.2), (0.0, 0.11), (0.04, 0.06)])
def test_threshold_spacing(e_upper, p_e):
    th = thresholds(e_upper, p_e)
    assert th.s_alpha - e_upper == pytest.approx((p_e - e_upper) / 3)
    assert th.s_upsilon - th.s_alpha == pytest.approx((p_e - e_upper) / 3)


def test_thresholds_infeasible_when_eve_rate_not_above_errors():
    assert not thresholds(0.05, 0.05).feasible
    assert not thresholds(0.08, 0.05).feasible
    assert not Thresholds(0.3, 0.6).feasible


def test_solve_p_e():
    assert solve_p_e(0.0, 1000, 0.01) == 0.0
    assert solve_p_e(1000, 1000, 0.0) == 0.5
    assert solve_p_e(17250, 51022, 0.0218) == pytest.approx(0.13604, abs=1e-3)
    with pytest.raises(ValueError):
        solve_p_e(10, 0, 0.01)


def test_p_robust():
    assert p_robust(1e-5) == pytest.approx(2e-5)
    assert p_robust(0.8) == 1.0
    assert p_robust(0.8, clamp=False) == pytest.approx(1.6)


def test_p_repudiation_known_value():
    assert p_repudiation(Thresholds(0.0802, 0.1081), 51022) == pytest.approx(9.75e-5, rel=0.02)


def test_p_repudiation_equal_thresholds():
    th = Thresholds(0.08, 0.08)
    assert p_repudiation(th, 1000) == 1.0
    assert p_repudiation(th, 1000, clamp=False) == 2.0


def test_p_repudiation_squares_when_l_doubles():
    th = Thresholds(0.05, 0.1)
    one = p_repudiation(th, 4000)
    two = p_repudiation(th, 8000)
    assert two / 2 == pytest.approx((one / 2) ** 2)


def test_epsilon_f_with_vanishing_exponent():
    assert epsilon_f(1e-5, 1000, 0.0, 0.0, 0.0, 1e-10) == pytest.approx((1 + 1e-10) / 1e-5)


def test_epsilon_f_field_value():
    assert epsilon_f(1e-5, 51022, 17250, 0.0218, 0.1081, 1e-10) == pytest.approx(1.0e-5, rel=1e-3)


def test_epsilon_f_overflows_to_infinity():
    value = epsilon_f(1e-5, 10**6, 0.0, 0.5, 0.5, 1e-10)
    assert math.isinf(value)
    assert p_forge(1e-5, value, 1e-5) == 1.0


def test_p_forge_and_p_sec():
    assert p_forge(1e-5, 1e-5, 1e-5) == pytest.approx(1.2e-4)
    assert p_forge(0.0, 0.0, 0.0) == 0.0
    assert p_forge(0.5, 0.9, 0.0) == 1.0
    assert p_sec(2e-5, 9.75e-5, 1.2e-4) == pytest.approx(1.2e-4)


def test_security_params_floor_and_test_keys():
    params = SecurityParams()
    assert params.floor == pytest.approx(1.2e-4)
    assert params.test_keys(51022) == math.ceil(0.05 * 51022)
    assert params.test_keys(2) == 1
    assert SecurityParams(k_test=300).test_keys(51022) == 300
    assert params.budget().total == pytest.approx(1e-4)


def test_assess_with_exact_estimation_reports_observed_errors(field_source, counts_50km):
    params = SecurityParams(eps_pe=1.0, alpha=1e-5, eps=1e-10, target_psec=2.0)
    report = assess(counts_50km, field_source, params, 10**5, quiet=True)
    assert report.e_upper == pytest.approx(counts_50km[Link.BOB_ALICE].error_rate(Basis.Z))


def test_assess_report_is_complete(field_source, default_params, counts_50km):
    report = assess(counts_50km, field_source, default_params, 10**5, quiet=True)
    assert report.k == default_params.test_keys(10**5)
    assert report.p_sec == max(report.p_robust, report.p_repudiation, report.p_forge)
    assert report.p_sec >= default_params.floor
    assert set(report.raw) == {"p_robust", "p_repudiation", "epsilon_f", "p_forge"}
    assert any("floor" in note for note in report.notes)
    assert report.to_dict()["estimates"]["s_z1_lower"] == report.estimates.s_z1_lower


def test_max_signature_length_respects_pool(counts_50km, default_params):
    L = max_signature_length(counts_50km, default_params)
    pool = min(c.pool_size for c in counts_50km.values())
    assert L % 2 == 0
    assert default_params.test_keys(L) + 2 * L <= pool
    assert default_params.test_keys(L + 2) + 2 * (L + 2) > pool


def test_min_signature_length_is_minimal(field_source, default_params, counts_50km):
    L = min_signature_length(counts_50km, field_source, default_params)
    assert L % 2 == 0
    assert assess(counts_50km, field_source, default_params, L, quiet=True).meets(2e-4)
    assert not assess(counts_50km, field_source, default_params, L - 2, quiet=True).meets(2e-4)


def test_stricter_target_needs_longer_signature(field_source, default_params, counts_50km):
    loose = min_signature_length(counts_50km, field_source, default_params, target_psec=5e-3)
    default = min_signature_length(counts_50km, field_source, default_params)
    strict = min_signature_length(counts_50km, field_source, default_params, target_psec=1.3e-4)
    assert loose <= default <= strict


def test_target_below_floor_is_rejected(field_source, default_params, counts_50km):
    with pytest.raises(InfeasibleTargetError, match="floor"):
        min_signature_length(counts_50km, field_source, default_params, target_psec=1e-4)


def test_tiny_pool_is_infeasible(default_params):
    pc = PulseConfig(mu=0.5, nu=0.1, p_mu=0.7, p_z_tx=0.5, p_z_rx=0.5, n_pulses=1000)
    counts = ObservedCounts(n_z_mu=3, n_z_nu=1, n_x_mu=2, n_x_nu=1)
    with pytest.raises(InfeasibleError):
        min_signature_length({Link.BOB_ALICE: counts}, pc, default_params)


def test_signature_time_one_second():
    pc = PulseConfig(mu=0.5, nu=0.1, p_mu=0.7, p_z_tx=0.5, p_z_rx=0.5, n_pulses=10**6)
    counts = {Link.BOB_ALICE: ObservedCounts(n_z_mu=1000)}
    timing = signature_time_and_rate(500, counts, pc, ChannelParams(clock_hz=1e6))
    assert timing.time_per_bit_s == pytest.approx(1.0)
    assert timing.rate_bits_per_s * timing.time_per_bit_s == pytest.approx(1.0)


def test_signature_time_field_run(field_run, field_source, field_channel):
    counts_file = field_run(103)
    timing = signature_time_and_rate(51022, counts_file.counts, field_source, field_channel)
    assert timing.per_link_s[Link.BOB_ALICE] == pytest.approx(0.969, rel=0.01)
    assert timing.time_per_bit_s == max(timing.per_link_s.values())


def test_signature_time_needs_detections_and_clock(field_source):
    empty = {Link.BOB_ALICE: ObservedCounts()}
    with pytest.raises(EstimationError):
        signature_time_and_rate(100, empty, field_source, ChannelParams())
    with pytest.raises(EstimationError):
        signature_time_and_rate(100, {Link.BOB_ALICE: ObservedCounts(n_z_mu=10)}, field_source,
                                ChannelParams(clock_hz=0.0))


def test_clamped_single_photon_bound_is_not_secure(field_run, field_source, default_params):
    report = assess(field_run(280).counts, field_source, default_params, 634148, quiet=True)
    assert report.overestimated
    assert report.to_dict()["overestimated"] is True
    assert any("s_z1_clamped" in note for note in report.notes)
    assert not report.meets(1.0)


def test_noise_free_signature_length_is_set_by_repudiation(noise_free_channel, default_params):
    pc = PulseConfig(mu=0.5, nu=0.1, p_mu=0.7, p_z_tx=0.5, p_z_rx=0.5, n_pulses=10**14)
    counts = {link: expected_statistics(pc, noise_free_channel) for link in Link}
    target = default_params.target_psec
    L = min_signature_length(counts, pc, default_params)

    def repudiation(length):
        report = assess(counts, pc, default_params, length, quiet=True)
        gap = report.thresholds.s_upsilon - report.thresholds.s_alpha
        return report, 2.0 * math.exp(-gap * gap * length / 4.0)

    report, at_L = repudiation(L)
    shorter, below_L = repudiation(L - 2)
    assert at_L <= target < below_L
    assert shorter.p_forge <= target and shorter.thresholds.feasible
    assert report.p_repudiation == pytest.approx(at_L)
