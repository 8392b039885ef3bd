import numpy as np
import pytest

from socbid import (
    DataValidationError,
    SoCGrid,
    StorageParams,
    enumerate_tiny,
    grid_dp_oracle,
)

from conftest import hourly_series


def test_enumerate_two_period_spread(micro_params):
    assert enumerate_tiny(hourly_series([5.0, 30.0]), micro_params) == pytest.approx(
        5.6, abs=1e-9
    )


def test_enumerate_never_charges_into_a_loss(micro_params):
    # spread too small to recover the discharge cost and losses
    assert enumerate_tiny(hourly_series([30.0, 5.0]), micro_params) == pytest.approx(
        0.0, abs=1e-12
    )


def test_enumerate_negative_price_charging_is_paid(micro_params):
    assert enumerate_tiny(hourly_series([-10.0, 20.0]), micro_params) == pytest.approx(
        9.05, abs=1e-9
    )


def test_enumerate_horizon_guard(micro_params):
    with pytest.raises(DataValidationError, match="horizon"):
        enumerate_tiny(hourly_series([1.0] * 5), micro_params)
    with pytest.raises(DataValidationError, match="action_grid"):
        enumerate_tiny(hourly_series([1.0]), micro_params, action_grid=50)


def test_oracle_matches_enumeration_micro_cases(micro_params, unit_grid):
    for tape in ([5.0, 30.0], [-10.0, 20.0], [30.0, 5.0], [10.0, 10.0, 10.0]):
        prices = hourly_series(tape)
        dp = grid_dp_oracle(prices, micro_params, unit_grid).optimal_profit
        brute = enumerate_tiny(prices, micro_params)
        assert dp == pytest.approx(brute, abs=1e-9)


def test_oracle_single_period_full_discharge(micro_params, unit_grid):
    result = grid_dp_oracle(
        hourly_series([1000.0]), micro_params, unit_grid, initial_soc=1.0
    )
    # one-shot discharge: min(P, E*eta) = 0.5 MW at $1000 less $10 cost
    assert result.optimal_profit == pytest.approx((1000.0 - 10.0) * 0.5, abs=1e-9)
    assert result.schedule[0][0] == pytest.approx(0.5)


def test_oracle_matches_enumeration_on_random_short_tapes(micro_params, unit_grid):
    # Both sides are quantized (power levels on each side, value interpolation
    # in the DP), so the budget is one action-grid power step's worth of cash
    # over the tape. Neither side dominates the other.
    rng = np.random.default_rng(31)
    quantum = micro_params.power_rating / (11 - 1)
    for _ in range(25):
        tape = rng.uniform(-20.0, 80.0, size=3)
        prices = hourly_series(tape)
        dp = grid_dp_oracle(prices, micro_params, unit_grid, action_points=21).optimal_profit
        brute = enumerate_tiny(prices, micro_params, action_grid=11)
        tol = quantum * float(np.sum(np.abs(tape) + micro_params.discharge_cost))
        assert abs(dp - brute) <= tol


def test_oracle_gap_shrinks_with_action_resolution(micro_params, unit_grid):
    prices = hourly_series([22.81, 42.78, 66.43])
    brute_coarse = enumerate_tiny(prices, micro_params, action_grid=6)
    brute_fine = enumerate_tiny(prices, micro_params, action_grid=21)
    dp = grid_dp_oracle(prices, micro_params, unit_grid, action_points=201).optimal_profit
    assert abs(dp - brute_fine) < abs(dp - brute_coarse) + 1e-9
    assert brute_fine >= brute_coarse - 1e-12  # finer uniform grid is a superset


def test_oracle_schedule_is_feasible_and_consistent(micro_params, unit_grid):
    rng = np.random.default_rng(32)
    prices = hourly_series(rng.uniform(-10.0, 70.0, size=24))
    result = grid_dp_oracle(prices, micro_params, unit_grid)
    eta = micro_params.efficiency_one_way
    e = result.soc[0]
    profit = 0.0
    for t, (p, b, e_after) in enumerate(result.schedule):
        assert p >= -1e-12 and b >= -1e-12
        assert not (p > 1e-12 and b > 1e-12)
        assert p <= micro_params.power_rating + 1e-9
        assert b <= micro_params.power_rating + 1e-9
        expected = e - p / eta + b * eta
        assert abs(e_after - expected) <= 1e-9
        assert -1e-9 <= e_after <= 1.0 + 1e-9
        if prices.values[t] < 0:
            assert p == 0.0
        profit += prices.values[t] * (p - b) - micro_params.discharge_cost * p
        e = e_after
    assert profit == pytest.approx(result.optimal_profit, abs=1e-9)


def test_oracle_profit_monotone_in_capability(unit_grid):
    # Grid step is held constant as the capacity grows, so the comparison is
    # not polluted by coarser value interpolation on the wider SoC range; the
    # tolerance covers the residual half-cell interpolation wobble.
    prices = hourly_series([5.0, 60.0, 8.0, 55.0, 12.0, 70.0])
    step = 0.001
    slack = step * float(np.abs(prices.values).max())
    profits_e = []
    for capacity in (0.5, 1.0, 2.0, 4.0):
        params = StorageParams(0.5, capacity, 0.9, 10.0)
        grid = SoCGrid(0.0, capacity, int(round(capacity / step)) + 1)
        profits_e.append(grid_dp_oracle(prices, params, grid).optimal_profit)
    assert all(b >= a - slack for a, b in zip(profits_e, profits_e[1:]))

    profits_eta = []
    for eta in (0.7, 0.8, 0.9, 1.0):
        params = StorageParams(0.5, 1.0, eta, 10.0)
        profits_eta.append(grid_dp_oracle(prices, params, SoCGrid(0.0, 1.0, 1001)).optimal_profit)
    assert all(b >= a - slack for a, b in zip(profits_eta, profits_eta[1:]))


def test_oracle_rejects_bad_action_points(micro_params, unit_grid):
    with pytest.raises(DataValidationError, match="action_points"):
        grid_dp_oracle(hourly_series([5.0]), micro_params, unit_grid, action_points=2)
