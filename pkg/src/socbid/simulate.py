"""Sequential single-period dispatch of a price-taking storage against a price tape.

Each settlement interval is dispatched on its own: the storage acts on the
realized price and its standing bid, SoC carries over, and no look-ahead is
allowed. Six experiment cases combine the settlement market (day-ahead or
real-time), the bid shape (power or SoC), and the forecast used for
valuation (day-ahead prices as a naive forecast, or the realized prices
themselves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bids import (
    BidSchedule,
    PowerBid,
    SoCBidCurve,
    bid_schedule_from_prices,
)
from .model import (
    SOC_EPS,
    DataValidationError,
    DispatchDecision,
    PriceSeries,
    SoCGrid,
    StorageParams,
    validate_params,
)
from .valuation import ValueCurve

CASE_IDS = ("DA-PB-DF", "DA-SB-DF", "RT-PB-DF", "RT-SB-DF", "RT-PB-PF", "RT-SB-PF")


@dataclass(frozen=True)
class CaseConfig:
    """One cell of the experiment matrix, keyed by its case id.

    The id encodes settlement market (DA/RT), bid model (PB/SB), and
    forecast source (DF = day-ahead prices as forecast, PF = perfect
    foresight of the settlement prices).
    """

    case_id: str
    initial_soc: float = 0.0

    def __post_init__(self) -> None:
        if self.case_id not in CASE_IDS:
            raise DataValidationError(
                f"unknown case id {self.case_id!r}; expected one of {', '.join(CASE_IDS)}"
            )

    @property
    def settlement_market(self) -> str:
        return self.case_id[:2]

    @property
    def bid_model(self) -> str:
        return "power" if self.case_id[3:5] == "PB" else "soc"

    @property
    def valuation_source(self) -> str:
        return "day_ahead" if self.case_id.endswith("DF") else "real_time"

    @property
    def settlement_source(self) -> str:
        return "day_ahead" if self.settlement_market == "DA" else "real_time"


@dataclass(frozen=True)
class SimulationResult:
    """Per-interval decisions and aggregates for one simulated case."""

    case_id: str
    initial_soc: float
    step_hours: float
    decisions: tuple[DispatchDecision, ...]
    total_profit: float
    discharged_energy: float
    cycles: float

    def soc_trajectory(self) -> np.ndarray:
        """SoC after each interval, preceded by the initial SoC."""
        out = np.empty(len(self.decisions) + 1)
        out[0] = self.initial_soc
        out[1:] = [d.soc_after for d in self.decisions]
        return out


def _clamp_soc(e: float, params: StorageParams) -> float:
    """Snap float overshoot back onto the SoC bounds; large violations are bugs."""
    if e < params.soc_min:
        if e < params.soc_min - 1e-6:
            raise AssertionError(f"SoC {e} fell below {params.soc_min}")
        return params.soc_min
    if e > params.soc_max:
        if e > params.soc_max + 1e-6:
            raise AssertionError(f"SoC {e} rose above {params.soc_max}")
        return params.soc_max
    return e


def _check_soc(e_prev: float, params: StorageParams) -> None:
    if e_prev < params.soc_min - SOC_EPS or e_prev > params.soc_max + SOC_EPS:
        raise DataValidationError(
            f"SoC {e_prev} outside [{params.soc_min}, {params.soc_max}]"
        )


def step_power_bid(
    e_prev: float,
    price: float,
    bid: PowerBid,
    params: StorageParams,
    dt_hours: float,
) -> DispatchDecision:
    """Dispatch one interval under a power bid.

    Discharge at full available power when the price clears the discharge
    bid, charge when it falls below the charge bid, otherwise idle. A price
    equal to either bid resolves to idle, and discharge is never taken at a
    negative price. Available power is capped so the SoC stays in bounds.
    """
    _check_soc(e_prev, params)
    eta = params.efficiency_one_way
    p = b = 0.0
    if price >= 0.0 and price > bid.discharge_bid:
        p = min(params.power_rating, (e_prev - params.soc_min) * eta / dt_hours)
        p = max(p, 0.0)
    elif price < bid.charge_bid:
        b = min(params.power_rating, (params.soc_max - e_prev) / (eta * dt_hours))
        b = max(b, 0.0)
    soc_after = _clamp_soc(e_prev - p * dt_hours / eta + b * eta * dt_hours, params)
    profit = price * (p - b) * dt_hours - params.discharge_cost * p * dt_hours
    return DispatchDecision(p, b, soc_after, profit)


def _curve_cumulative(curve: SoCBidCurve) -> np.ndarray:
    cum = np.empty(curve.boundaries.size)
    cum[0] = 0.0
    np.cumsum(curve.segment_values * np.diff(curve.boundaries), out=cum[1:])
    return cum


def curve_integral(curve: SoCBidCurve, lo: float, hi: float) -> float:
    """Integral of the piecewise-constant bid curve over [lo, hi], in $."""
    cum = _curve_cumulative(curve)
    a, b = np.interp([lo, hi], curve.boundaries, cum)
    return float(b - a)


def step_soc_bid(
    e_prev: float,
    price: float,
    curve: SoCBidCurve,
    params: StorageParams,
    dt_hours: float,
) -> DispatchDecision:
    """Dispatch one interval under an SoC bid by a greedy marginal sweep.

    Discharges segment by segment while the price (net of discharge cost and
    efficiency) beats the segment's stored-energy value, or charges upward
    while the stored value beats the price; movement stops at the first
    failing segment boundary, the power rating, or an SoC bound. With
    non-increasing segment values this greedy sweep solves the one-interval
    problem exactly. Discharge is disabled at negative prices.
    """
    _check_soc(e_prev, params)
    eta = params.efficiency_one_way
    c = params.discharge_cost
    tol = 1e-9 * (1.0 + abs(params.soc_max))
    if abs(curve.soc_min - params.soc_min) > tol or abs(curve.soc_max - params.soc_max) > tol:
        raise DataValidationError(
            f"bid curve spans [{curve.soc_min}, {curve.soc_max}] but the storage "
            f"SoC range is [{params.soc_min}, {params.soc_max}]"
        )
    bounds = curve.boundaries
    vals = curve.segment_values
    num = vals.size

    p = b = 0.0
    if price >= 0.0:
        j = int(np.searchsorted(bounds, e_prev, side="left"))
        stop = e_prev
        while j >= 1 and price > c + vals[j - 1] / eta:
            stop = float(bounds[j - 1])
            j -= 1
        if stop < e_prev:
            p = float(min(params.power_rating, (e_prev - stop) * eta / dt_hours))
    if p == 0.0:
        j = int(np.searchsorted(bounds, e_prev, side="right"))
        stop = e_prev
        while j <= num and price < vals[j - 1] * eta:
            stop = float(bounds[j])
            j += 1
        if stop > e_prev:
            b = float(min(params.power_rating, (stop - e_prev) / (eta * dt_hours)))

    soc_after = _clamp_soc(e_prev - p * dt_hours / eta + b * eta * dt_hours, params)
    if p > 0.0:
        value_delta = -curve_integral(curve, soc_after, e_prev)
    elif b > 0.0:
        value_delta = curve_integral(curve, e_prev, soc_after)
    else:
        value_delta = 0.0
    profit = price * (p - b) * dt_hours - c * p * dt_hours
    return DispatchDecision(p, b, soc_after, profit, value_delta)


def run_schedule(
    prices: PriceSeries,
    schedule: BidSchedule,
    params: StorageParams,
    initial_soc: float,
    case_id: str = "",
) -> SimulationResult:
    """Settle a bid schedule against a price tape, carrying SoC forward.

    Each schedule entry covers a whole number of settlement intervals; an
    hourly schedule against 5-minute prices applies each bid to its twelve
    subintervals, with power limits per interval.
    """
    dt = prices.resolution_hours
    ratio = schedule.period_hours / dt
    per_bid = round(ratio)
    if abs(ratio - per_bid) > 1e-9 or per_bid < 1:
        raise DataValidationError(
            f"bid period {schedule.period_hours} h is not a whole number of "
            f"{dt} h settlement intervals"
        )
    if len(prices) != len(schedule) * per_bid:
        raise DataValidationError(
            f"{len(prices)} settlement intervals do not match "
            f"{len(schedule)} bids x {per_bid} intervals each"
        )
    step = step_power_bid if schedule.kind == "power" else step_soc_bid
    e = initial_soc
    decisions = []
    for k in range(len(prices)):
        decision = step(e, float(prices.values[k]), schedule[k // per_bid], params, dt)
        decisions.append(decision)
        e = decision.soc_after
    total = math.fsum(d.realized_profit for d in decisions)
    discharged = math.fsum(d.discharge_power * dt for d in decisions)
    return SimulationResult(
        case_id=case_id,
        initial_soc=initial_soc,
        step_hours=dt,
        decisions=tuple(decisions),
        total_profit=total,
        discharged_energy=discharged,
        cycles=discharged / params.energy_capacity,
    )


def run_case(
    config: CaseConfig,
    da_prices: PriceSeries | None,
    rt_prices: PriceSeries | None,
    params: StorageParams,
    grid: SoCGrid,
    segments_per_hour_of_duration: int = 20,
    terminal: ValueCurve | None = None,
) -> SimulationResult:
    """Run one experiment case end to end: valuation, bid design, settlement.

    Valuation runs at the native resolution of the forecast series (hourly
    day-ahead prices for DF cases, the settlement tape itself for PF cases),
    bids are built per valuation period, and settlement runs at the
    settlement series' native resolution. With perfect foresight and SoC
    bids this reproduces the multi-period optimum up to discretization.
    """
    validate_params(params)
    series = {"day_ahead": da_prices, "real_time": rt_prices}
    valuation_series = series[config.valuation_source]
    settlement_series = series[config.settlement_source]
    if valuation_series is None:
        raise DataValidationError(
            f"case {config.case_id} needs {config.valuation_source} prices"
        )
    if settlement_series is None:
        raise DataValidationError(
            f"case {config.case_id} needs {config.settlement_source} prices"
        )
    if da_prices is not None and rt_prices is not None:
        if abs((da_prices.span - rt_prices.span).total_seconds()) > 1e-6:
            raise DataValidationError(
                f"day-ahead span {da_prices.span} != real-time span {rt_prices.span}"
            )
    if not params.soc_min - SOC_EPS <= config.initial_soc <= params.soc_max + SOC_EPS:
        raise DataValidationError(f"initial SoC {config.initial_soc} out of bounds")

    schedule = bid_schedule_from_prices(
        valuation_series,
        params,
        grid,
        config.bid_model,
        segments_per_hour_of_duration=segments_per_hour_of_duration,
        terminal=terminal,
    )
    return run_schedule(
        settlement_series, schedule, params, config.initial_soc, case_id=config.case_id
    )


def utilization(result: SimulationResult, reference: SimulationResult) -> float:
    """Profit of a case relative to the perfect-foresight SoC-bid reference."""
    if reference.total_profit <= 0:
        raise DataValidationError(
            f"reference profit {reference.total_profit} is not positive; "
            "utilization is undefined in a degenerate market"
        )
    return result.total_profit / reference.total_profit


def windowed_profit(
    result: SimulationResult,
    skip_start_hours: float = 0.0,
    skip_end_hours: float = 0.0,
) -> float:
    """Profit excluding warm-up and cool-down windows at the tape's ends.

    Useful to neutralize the flat-zero terminal condition, which depresses
    value over roughly the last duration-worth of periods.
    """
    n = len(result.decisions)
    lo = int(math.ceil(skip_start_hours / result.step_hours))
    hi = n - int(math.ceil(skip_end_hours / result.step_hours))
    if lo >= hi:
        raise DataValidationError("exclusion windows cover the whole horizon")
    return math.fsum(d.realized_profit for d in result.decisions[lo:hi])
