"""Independent certifiers for the multi-period perfect-foresight optimum.

``grid_dp_oracle`` solves the whole-horizon arbitrage problem by tabular
dynamic programming over the SoC grid with a discretized action set, using
linear interpolation of the value function, deliberately a different
numerical route from the analytical marginal-value recursion it certifies.
``enumerate_tiny`` brute-forces the full action product space on horizons of
a few periods and grounds the oracle itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    SOC_EPS,
    DataValidationError,
    PriceSeries,
    SoCGrid,
    StorageParams,
    validate_params,
)


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Optimal profit and the feasible schedule that attains it."""

    optimal_profit: float
    discharge: np.ndarray
    charge: np.ndarray
    soc: np.ndarray  # length T+1, starting at the initial SoC

    @property
    def schedule(self) -> list[tuple[float, float, float]]:
        """Per-period (discharge MW, charge MW, end-of-period SoC MWh)."""
        return [
            (float(p), float(b), float(e))
            for p, b, e in zip(self.discharge, self.charge, self.soc[1:])
        ]


def _shift_counts(params: StorageParams, grid: SoCGrid, dt_hours: float) -> tuple[int, int]:
    """Largest whole-grid-step SoC moves within the power rating (down, up)."""
    eta = params.efficiency_one_way
    down = int(math.floor(params.power_rating * dt_hours / (eta * grid.step) + 1e-9))
    up = int(math.floor(params.power_rating * eta * dt_hours / grid.step + 1e-9))
    return min(down, grid.num_points - 1), min(up, grid.num_points - 1)


def _strided(k_max: int, levels: int) -> np.ndarray:
    """About ``levels`` whole-step shift counts from 1..k_max, always including k_max."""
    if k_max < 1:
        return np.empty(0, dtype=int)
    stride = max(1, int(math.ceil(k_max / levels)))
    ks = np.arange(stride, k_max + 1, stride)
    if ks.size == 0 or ks[-1] != k_max:
        ks = np.append(ks, k_max)
    return ks


def grid_dp_oracle(
    prices: PriceSeries,
    params: StorageParams,
    grid: SoCGrid,
    action_points: int = 21,
    initial_soc: float = 0.0,
) -> OracleResult:
    """Whole-horizon optimum by backward DP on the SoC grid.

    The action set per direction holds about ``action_points`` power levels
    whose SoC moves are whole grid steps (so value lookups are exact), plus
    the exact full-power move and the exact bound-reaching move. Discharge
    actions are dropped whenever the period price is negative. Memory is
    (T+1) x num_points for the stored value functions.
    """
    validate_params(params)
    if action_points < 3:
        raise DataValidationError(f"action_points must be at least 3, got {action_points}")
    if not params.soc_min - SOC_EPS <= initial_soc <= params.soc_max + SOC_EPS:
        raise DataValidationError(f"initial SoC {initial_soc} out of bounds")

    eta = params.efficiency_one_way
    c = params.discharge_cost
    big_p = params.power_rating
    dt = prices.resolution_hours
    n = grid.num_points
    step = grid.step
    horizon = len(prices)
    pts = grid.points()

    k_down, k_up = _shift_counts(params, grid, dt)
    ks_down = _strided(k_down, action_points - 1)
    ks_up = _strided(k_up, action_points - 1)
    # Power per whole-step move, and the fractional remainder of a full-power move.
    p_of_k = step * eta / dt
    b_of_k = step / (eta * dt)
    down_full = big_p * dt / (eta * step)  # full-power discharge, in grid steps
    up_full = big_p * eta * dt / step

    idx = np.arange(n)
    # Bound-reaching moves (exact SoC to the bound, power-feasible region only).
    floor_reach = idx[idx * p_of_k <= big_p + 1e-12]
    floor_power = floor_reach * p_of_k
    ceil_reach = idx[(n - 1 - idx) * b_of_k <= big_p + 1e-12]
    ceil_power = (n - 1 - ceil_reach) * b_of_k

    values = np.empty((horizon + 1, n))
    values[horizon] = 0.0
    for t in range(horizon, 0, -1):
        price = float(prices.values[t - 1])
        nxt = values[t]
        best = nxt.copy()  # idle
        if price >= 0.0:
            for k in ks_down:
                cash = (price - c) * (k * p_of_k) * dt
                np.maximum(best[k:], cash + nxt[: n - k], out=best[k:])
            _apply_fractional(best, nxt, down_full, (price - c) * big_p * dt, -1)
            cand = (price - c) * dt * floor_power + nxt[0]
            np.maximum(best[floor_reach], cand, out=best[floor_reach])
        for k in ks_up:
            cash = -price * (k * b_of_k) * dt
            np.maximum(best[: n - k], cash + nxt[k:], out=best[: n - k])
        _apply_fractional(best, nxt, up_full, -price * big_p * dt, +1)
        cand = -price * dt * ceil_power + nxt[n - 1]
        np.maximum(best[ceil_reach], cand, out=best[ceil_reach])
        values[t - 1] = best

    # Forward extraction of the schedule from the stored value functions.
    e = float(initial_soc)
    e = min(max(e, params.soc_min), params.soc_max)
    discharge = np.zeros(horizon)
    charge = np.zeros(horizon)
    soc = np.empty(horizon + 1)
    soc[0] = e
    profits = []
    for t in range(horizon):
        price = float(prices.values[t])
        p_cands = [0.0]
        b_cands = [0.0]
        if price >= 0.0:
            for k in ks_down:
                p_cands.append(k * p_of_k)
            p_cands.append(big_p)
            p_cands.append(min(big_p, (e - params.soc_min) * eta / dt))
        for k in ks_up:
            b_cands.append(k * b_of_k)
        b_cands.append(big_p)
        b_cands.append(min(big_p, (params.soc_max - e) / (eta * dt)))

        acts_p = []
        acts_b = []
        e_next = []
        for p in p_cands:
            e2 = e - p * dt / eta
            if e2 >= params.soc_min - SOC_EPS:
                acts_p.append(p)
                acts_b.append(0.0)
                e_next.append(e2)
        for b in b_cands[1:]:
            e2 = e + b * eta * dt
            if e2 <= params.soc_max + SOC_EPS:
                acts_p.append(0.0)
                acts_b.append(b)
                e_next.append(e2)
        e_arr = np.clip(np.asarray(e_next), params.soc_min, params.soc_max)
        cash = (
            price * (np.asarray(acts_p) - np.asarray(acts_b)) * dt
            - c * np.asarray(acts_p) * dt
        )
        totals = cash + np.interp(e_arr, pts, values[t + 1])
        best_i = int(np.argmax(totals))
        p, b, e = acts_p[best_i], acts_b[best_i], float(e_arr[best_i])
        discharge[t] = p
        charge[t] = b
        soc[t + 1] = e
        profits.append(price * (p - b) * dt - c * p * dt)

    return OracleResult(
        optimal_profit=math.fsum(profits), discharge=discharge, charge=charge, soc=soc
    )


def _apply_fractional(
    best: np.ndarray, nxt: np.ndarray, shift: float, cash: float, direction: int
) -> None:
    """Fold in the full-power action when its SoC move is not a whole grid step.

    ``shift`` is the move in grid-step units, ``direction`` -1 for discharge
    (SoC falls) and +1 for charge (SoC rises).
    """
    n = best.size
    base = int(math.floor(shift))
    frac = shift - base
    if frac <= 1e-9 or shift > n - 1:
        return  # whole-step moves are covered by the integer actions
    if direction < 0:
        i0 = base + 1
        vals = frac * nxt[: n - base - 1] + (1.0 - frac) * nxt[1 : n - base]
        np.maximum(best[i0:], cash + vals, out=best[i0:])
    else:
        i1 = n - 1 - (base + 1)  # last index that can move up by the full shift
        if i1 < 0:
            return
        vals = (1.0 - frac) * nxt[base : base + i1 + 1] + frac * nxt[base + 1 : base + i1 + 2]
        np.maximum(best[: i1 + 1], cash + vals, out=best[: i1 + 1])


def enumerate_tiny(
    prices: PriceSeries,
    params: StorageParams,
    action_grid: int = 11,
    initial_soc: float = 0.0,
) -> float:
    """Exhaustive search over the full per-period action product space.

    Ground truth for the DP oracle on horizons of at most four periods; the
    guard exists because the search is exponential in the horizon.
    """
    validate_params(params)
    horizon = len(prices)
    if horizon > 4:
        raise DataValidationError(f"horizon {horizon} too long to enumerate (max 4)")
    if not 2 <= action_grid <= 21:
        raise DataValidationError(f"action_grid must be in [2, 21], got {action_grid}")

    eta = params.efficiency_one_way
    c = params.discharge_cost
    dt = prices.resolution_hours
    levels = np.linspace(0.0, params.power_rating, action_grid)[1:]

    def actions(e: float, price: float) -> list[tuple[float, float]]:
        out = [(0.0, 0.0)]
        if price >= 0.0:
            for p in levels:
                if e - p * dt / eta >= params.soc_min - SOC_EPS:
                    out.append((float(p), 0.0))
            p_floor = min(params.power_rating, (e - params.soc_min) * eta / dt)
            if p_floor > 0.0:
                out.append((p_floor, 0.0))
        for b in levels:
            if e + b * eta * dt <= params.soc_max + SOC_EPS:
                out.append((0.0, float(b)))
        b_ceil = min(params.power_rating, (params.soc_max - e) / (eta * dt))
        if b_ceil > 0.0:
            out.append((0.0, b_ceil))
        return out

    def best_from(t: int, e: float) -> float:
        if t == horizon:
            return 0.0
        price = float(prices.values[t])
        best = -math.inf
        for p, b in actions(e, price):
            e2 = min(max(e - p * dt / eta + b * eta * dt, params.soc_min), params.soc_max)
            total = price * (p - b) * dt - c * p * dt + best_from(t + 1, e2)
            if total > best:
                best = total
        return best

    e0 = min(max(float(initial_soc), params.soc_min), params.soc_max)
    return best_from(0, e0)
