"""Turning marginal-value surfaces into market bids.

Two bid shapes are supported. A power bid is one discharge/charge price
threshold pair per period, built from the SoC-average marginal value: the
dispatcher needs no SoC information. An SoC bid is a piecewise-constant
marginal-value curve over equal-width SoC segments, so dispatch depends on
where the storage currently sits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DataValidationError, PriceSeries, SoCGrid, StorageParams, validate_params
from .valuation import (
    ValueCurve,
    ValueSurface,
    _cumulative_integral,
    _step_values,
    segment_averages,
)


@dataclass(frozen=True)
class PowerBid:
    """SoC-blind price thresholds: discharge above the first, charge below the second."""

    discharge_bid: float
    charge_bid: float


@dataclass(frozen=True, eq=False)
class SoCBidCurve:
    """Marginal stored-energy value ($/MWh) per SoC segment.

    ``boundaries`` has one more entry than ``segment_values`` and spans the
    bid's SoC range; values must be non-increasing (concave opportunity
    value), which is what makes greedy segment-by-segment dispatch optimal.
    """

    boundaries: np.ndarray
    segment_values: np.ndarray

    def __post_init__(self) -> None:
        bounds = np.asarray(self.boundaries, dtype=float)
        vals = np.asarray(self.segment_values, dtype=float)
        if bounds.ndim != 1 or vals.ndim != 1 or bounds.size != vals.size + 1:
            raise DataValidationError("need J+1 boundaries for J segment values")
        if vals.size < 1:
            raise DataValidationError("an SoC bid needs at least one segment")
        if np.any(np.diff(bounds) <= 0):
            raise DataValidationError("segment boundaries must be strictly increasing")
        tol = 1e-9 * (1.0 + float(np.max(np.abs(vals))))
        if vals.size > 1 and float(np.max(np.diff(vals))) > tol:
            raise DataValidationError("segment values must be non-increasing in SoC")
        bounds = bounds.copy()
        vals = vals.copy()
        bounds.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "segment_values", vals)

    @property
    def num_segments(self) -> int:
        return int(self.segment_values.size)

    @property
    def soc_min(self) -> float:
        return float(self.boundaries[0])

    @property
    def soc_max(self) -> float:
        return float(self.boundaries[-1])


@dataclass(frozen=True)
class BidSchedule:
    """One bid per valuation period, all of the same kind."""

    period_hours: float
    entries: tuple

    def __post_init__(self) -> None:
        if not self.entries:
            raise DataValidationError("bid schedule is empty")
        if self.period_hours <= 0:
            raise DataValidationError(f"period_hours must be positive, got {self.period_hours}")
        first = type(self.entries[0])
        if first not in (PowerBid, SoCBidCurve):
            raise DataValidationError(f"unsupported bid type {first.__name__}")
        if any(type(e) is not first for e in self.entries):
            raise DataValidationError("bid schedule mixes power and SoC bids")

    @property
    def kind(self) -> str:
        return "power" if isinstance(self.entries[0], PowerBid) else "soc"

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, t: int):
        return self.entries[t]


def _check_grid_range(grid: SoCGrid, params: StorageParams) -> None:
    tol = 1e-9 * (1.0 + abs(params.soc_max))
    if abs(grid.soc_min - params.soc_min) > tol or abs(grid.soc_max - params.soc_max) > tol:
        raise DataValidationError(
            f"grid range [{grid.soc_min}, {grid.soc_max}] does not match the "
            f"storage SoC range [{params.soc_min}, {params.soc_max}]"
        )


def power_bid_from_average(q_bar: float, params: StorageParams) -> PowerBid:
    """Bid pair for one period given the SoC-average marginal value q_bar.

    Discharging one MWh to the grid drains 1/eta MWh of stored value and
    costs c, so the break-even price is c + q_bar/eta. Charging one MWh from
    the grid stores eta MWh, worth q_bar*eta. The pair always satisfies
    charge_bid = eta^2 * (discharge_bid - c).
    """
    eta = params.efficiency_one_way
    return PowerBid(
        discharge_bid=params.discharge_cost + q_bar / eta,
        charge_bid=q_bar * eta,
    )


def make_power_bids(surface: ValueSurface, params: StorageParams) -> BidSchedule:
    """One power bid per period, from the curve at the period's end.

    Period t's dispatch trades against the value of energy left after t, so
    the bid for period t is built from curve t+1 of the surface (0-indexed
    periods; curve 0 is the pre-horizon curve and sets no bid).
    """
    validate_params(params)
    grid = surface.grid
    _check_grid_range(grid, params)
    full_range = np.array([grid.soc_min, grid.soc_max])
    bids = []
    for t in range(1, surface.horizon + 1):
        q_bar = float(segment_averages(ValueCurve(grid, surface.values[t]), full_range)[0])
        bids.append(power_bid_from_average(q_bar, params))
    return BidSchedule(period_hours=surface.step_hours, entries=tuple(bids))


def soc_bid_boundaries(params: StorageParams, segments_per_hour_of_duration: int = 20) -> np.ndarray:
    """Equal-width segment boundaries covering the storage's SoC range."""
    if segments_per_hour_of_duration < 1:
        raise DataValidationError(
            f"segments_per_hour_of_duration must be >= 1, got {segments_per_hour_of_duration}"
        )
    num = max(1, int(round(segments_per_hour_of_duration * params.duration_hours)))
    return np.linspace(params.soc_min, params.soc_max, num + 1)


def make_soc_bids(
    surface: ValueSurface,
    params: StorageParams,
    segments_per_hour_of_duration: int = 20,
) -> BidSchedule:
    """One SoC bid curve per period: segment-wise averages of the end-of-period curve.

    Twenty segments per hour of storage duration by default, mirroring the
    usual cap on generator bid segments. Values inherit monotonicity from the
    underlying curves.
    """
    validate_params(params)
    boundaries = soc_bid_boundaries(params, segments_per_hour_of_duration)
    grid = surface.grid
    _check_grid_range(grid, params)
    bids = []
    for t in range(1, surface.horizon + 1):
        vals = segment_averages(ValueCurve(grid, surface.values[t]), boundaries)
        bids.append(SoCBidCurve(boundaries, vals))
    return BidSchedule(period_hours=surface.step_hours, entries=tuple(bids))


def bid_schedule_from_prices(
    prediction: PriceSeries,
    params: StorageParams,
    grid: SoCGrid,
    bid_model: str,
    segments_per_hour_of_duration: int = 20,
    terminal: ValueCurve | None = None,
) -> BidSchedule:
    """Valuation and bid reduction fused into one backward pass.

    Produces the same schedule as running the full backward induction and
    then ``make_power_bids`` or ``make_soc_bids``, but keeps only a single
    curve in memory, which is what makes year-long 5-minute valuations
    practical for long-duration storage.
    """
    validate_params(params)
    _check_grid_range(grid, params)
    if bid_model not in ("power", "soc"):
        raise DataValidationError(f"unknown bid model {bid_model!r}")
    if len(prediction) == 0:
        raise DataValidationError("cannot build bids from an empty price series")
    if terminal is None:
        terminal = ValueCurve.flat(grid)
    if terminal.grid != grid:
        raise DataValidationError("terminal curve is tabulated on a different grid")
    if bid_model == "soc":
        boundaries = soc_bid_boundaries(params, segments_per_hour_of_duration)
    else:
        boundaries = np.array([grid.soc_min, grid.soc_max])
    widths = np.diff(boundaries)
    dt = prediction.resolution_hours
    step = grid.step
    horizon = len(prediction)
    entries: list = [None] * horizon
    q = terminal.values
    for t in range(horizon, 0, -1):
        # The bid for period t trades against the curve after period t.
        edges, cum = _cumulative_integral(grid, q)
        seg_vals = np.diff(np.interp(boundaries, edges, cum)) / widths
        if bid_model == "power":
            entries[t - 1] = power_bid_from_average(float(seg_vals[0]), params)
        else:
            entries[t - 1] = SoCBidCurve(boundaries, seg_vals)
        q = _step_values(q, float(prediction.values[t - 1]), params, step, dt)
    return BidSchedule(period_hours=dt, entries=tuple(entries))
