import numpy as np
import pytest
from pydantic import ValidationError

from optimizer import (
    DEFAULT_BOUNDS,
    PARAMETERS,
    Evaluation,
    ParameterPoint,
    SearchSpace,
    evaluate,
    optimize,
    rate_curve,
)

N_PULSES = 2 * 10**12
FIXED = ParameterPoint(mu=0.4, nu=0.1, p_mu=0.8, p_z_tx=0.8, p_z_rx=0.8)


def test_search_space_rejects_bad_boxes():
    with pytest.raises(ValidationError):
        SearchSpace(bounds={**DEFAULT_BOUNDS, "mu": (0.8, 0.1)})
    with pytest.raises(ValidationError):
        SearchSpace(bounds={**DEFAULT_BOUNDS, "p_mu": (0.3, 1.0)})
    with pytest.raises(ValidationError):
        SearchSpace(bounds={k: v for k, v in DEFAULT_BOUNDS.items() if k != "nu"})
    with pytest.raises(ValidationError):
        SearchSpace(bounds={**DEFAULT_BOUNDS, "nu": (0.5, 0.6), "mu": (0.1, 0.4)})


def test_grid_respects_decoy_below_signal():
    points = list(SearchSpace().grid())
    assert points
    assert all(p.nu < p.mu for p in points)


def test_single_point_space_returns_that_point(field_channel, default_params):
    result = optimize(SearchSpace.single_point(FIXED), field_channel, default_params, N_PULSES,
                      objective=lambda point: 1.0)
    assert result.best.point == FIXED
    assert result.evaluations == 1


def test_descent_finds_interior_optimum(field_channel, default_params):
    target = ParameterPoint(mu=0.43, nu=0.17, p_mu=0.61, p_z_tx=0.77, p_z_rx=0.66)

    def concave(point):
        return 10.0 - sum((getattr(point, k) - v) ** 2 for k, v in target.as_dict().items())

    result = optimize(SearchSpace(), field_channel, default_params, N_PULSES, objective=concave)
    for name, value in target.as_dict().items():
        assert getattr(result.best.point, name) == pytest.approx(value, abs=0.01)


def test_ties_prefer_small_intensities_and_large_signal_share(field_channel, default_params):
    result = optimize(SearchSpace(), field_channel, default_params, N_PULSES, objective=lambda point: 1.0)
    best = result.best.point
    assert (best.mu, best.nu, best.p_mu) == (0.1, 0.02, pytest.approx(0.9))


def test_objective_may_return_evaluations(field_channel, default_params):
    result = optimize(SearchSpace(resolution=2), field_channel, default_params, N_PULSES,
                      objective=lambda point: Evaluation(point, reason="never feasible"))
    assert not result.best.feasible
    assert "no feasible point" in result.diagnosis


def test_evaluate_beyond_cutoff_is_infeasible(field_channel, default_params):
    result = evaluate(FIXED, field_channel.at_distance(500), default_params, N_PULSES)
    assert not result.feasible
    assert result.rate == 0.0
    assert result.reason


def test_evaluate_rejects_decoy_above_signal(field_channel, default_params):
    result = evaluate(FIXED.replace(nu=0.5), field_channel, default_params, N_PULSES)
    assert not result.feasible
    assert "invalid source parameters" in result.reason


def test_evaluate_is_deterministic(field_channel, default_params):
    ch = field_channel.at_distance(80)
    assert evaluate(FIXED, ch, default_params, N_PULSES) == evaluate(FIXED, ch, default_params, N_PULSES)


def test_rate_falls_with_distance(field_channel, default_params):
    rates = [evaluate(FIXED, field_channel.at_distance(d), default_params, N_PULSES).rate
             for d in np.arange(0, 301, 20)]
    assert rates[0] > 0
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_rate_curve_frame(field_channel, default_params):
    space = SearchSpace.single_point(FIXED)
    df = rate_curve([50.0, 500.0], space, field_channel, default_params, N_PULSES)
    assert list(df.columns[:5]) == ["distance_km", "rate", "L", "p_sec", "feasible"]
    assert df["feasible"].tolist() == [True, False]
    assert df.loc[0, "rate"] > 0 and df.loc[1, "rate"] == 0.0
    assert np.isnan(df.loc[1, "p_sec"])


def test_rate_curve_without_distances_is_empty(field_channel, default_params):
    df = rate_curve([], SearchSpace(), field_channel, default_params, N_PULSES)
    assert df.empty
    assert "distance_km" in df.columns


def test_test_key_axis_is_opt_in():
    assert SearchSpace().names == PARAMETERS
    space = SearchSpace(search_k=True, k_bounds=(0.02, 0.1))
    assert space.names[-1] == "k_fraction"
    assert all(0.02 <= p.k_fraction <= 0.1 for p in space.grid())
    assert all(p.k_fraction is None for p in SearchSpace(resolution=2).grid())
    with pytest.raises(ValidationError):
        SearchSpace(search_k=True, k_bounds=(0.0, 0.1))


def test_descent_finds_test_key_fraction(field_channel, default_params):
    target = ParameterPoint(mu=0.43, nu=0.17, p_mu=0.61, p_z_tx=0.77, p_z_rx=0.66, k_fraction=0.08)

    def concave(point):
        return 10.0 - sum((getattr(point, k) - v) ** 2 for k, v in target.as_dict().items())

    result = optimize(SearchSpace(search_k=True), field_channel, default_params, N_PULSES, objective=concave)
    assert result.best.point.k_fraction == pytest.approx(0.08, abs=0.01)


def test_evaluate_uses_the_point_test_key_fraction(field_channel, default_params):
    ch = field_channel.at_distance(80)
    base = evaluate(FIXED, ch, default_params, N_PULSES)
    same = evaluate(FIXED.replace(k_fraction=default_params.k_fraction), ch, default_params, N_PULSES)
    more = evaluate(FIXED.replace(k_fraction=0.15), ch, default_params, N_PULSES)
    assert (same.rate, same.L) == (base.rate, base.L)
    assert FIXED.replace(k_fraction=0.15).security(default_params).test_keys(1000) == 150
    assert (more.rate, more.L) != (base.rate, base.L)


def test_optimized_rate_never_rises_with_distance(field_channel, default_params):
    df = rate_curve(np.arange(0, 301, 20), SearchSpace(resolution=3), field_channel, default_params, N_PULSES)
    rates = df["rate"].tolist()
    assert rates[0] > 0
    assert all(b <= a for a, b in zip(rates, rates[1:]))
