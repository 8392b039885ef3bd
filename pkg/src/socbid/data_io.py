"""Price CSV ingestion, resampling, series statistics, and report writers.

The price file schema is fixed: ``timestamp,zone,price_usd_per_mwh`` with
ISO-8601 UTC timestamps (naive timestamps are read as UTC). Gaps are a hard
error by default because silently filled intervals bias profit metrics; an
explicit forward-fill policy is available and counts what it filled.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .bids import BidSchedule, PowerBid
from .model import DataValidationError, PriceSeries
from .simulate import SimulationResult
from .valuation import ValueSurface

PRICE_HEADER = ("timestamp", "zone", "price_usd_per_mwh")


def _parse_timestamp(raw: str, row_num: int) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataValidationError(f"row {row_num}: unparseable timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_prices(
    path: str | Path,
    zone: str,
    expected_resolution: timedelta | None = None,
    fill: str = "error",
) -> PriceSeries:
    """Read one zone's prices from a CSV file into a validated series.

    The resolution is inferred from the first two rows and checked against
    ``expected_resolution`` when given. ``fill="previous"`` forward-fills
    missing intervals instead of failing; the number of filled intervals is
    reported on the returned series.
    """
    if fill not in ("error", "previous"):
        raise DataValidationError(f"unknown fill policy {fill!r}")
    rows: list[tuple[datetime, float]] = []
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for row_num, row in enumerate(reader, start=1):
            if not row or (row_num == 1 and row[0].strip().lower() == "timestamp"):
                continue
            if len(row) < 3:
                raise DataValidationError(f"row {row_num}: expected 3 columns, got {len(row)}")
            if row[1].strip() != zone:
                continue
            ts = _parse_timestamp(row[0], row_num)
            try:
                price = float(row[2])
            except ValueError as exc:
                raise DataValidationError(
                    f"row {row_num}: unparseable price {row[2]!r}"
                ) from exc
            rows.append((ts, price))
    if not rows:
        raise DataValidationError(f"no rows for zone {zone!r} in {path}")
    if len(rows) == 1:
        if expected_resolution is None:
            raise DataValidationError("cannot infer resolution from a single row")
        return PriceSeries(zone, rows[0][0], expected_resolution, np.array([rows[0][1]]))

    resolution = rows[1][0] - rows[0][0]
    if resolution <= timedelta(0):
        raise DataValidationError(
            f"duplicate or out-of-order timestamp {rows[1][0].isoformat()}"
        )
    if expected_resolution is not None and resolution != expected_resolution:
        raise DataValidationError(
            f"resolution {resolution} does not match expected {expected_resolution}"
        )

    values = [rows[0][1]]
    filled = 0
    prev_ts = rows[0][0]
    for ts, price in rows[1:]:
        gap = ts - prev_ts
        if gap == resolution:
            values.append(price)
        elif gap <= timedelta(0):
            raise DataValidationError(f"duplicate or out-of-order timestamp {ts.isoformat()}")
        else:
            steps = gap / resolution
            if abs(steps - round(steps)) > 1e-9:
                raise DataValidationError(
                    f"timestamp {ts.isoformat()} is off the {resolution} lattice"
                )
            missing = int(round(steps)) - 1
            if fill == "error":
                gap_ts = prev_ts + resolution
                raise DataValidationError(
                    f"missing interval at {gap_ts.isoformat()} ({missing} interval(s) absent)"
                )
            values.extend([values[-1]] * missing)
            values.append(price)
            filled += missing
        prev_ts = ts
    return PriceSeries(zone, rows[0][0], resolution, np.asarray(values), gaps_filled=filled)


def save_prices(series: PriceSeries, path: str | Path) -> None:
    """Write a series in the canonical CSV schema (round-trips with load_prices)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRICE_HEADER)
        for i, value in enumerate(series.values):
            writer.writerow([series.timestamp(i).isoformat(), series.zone, repr(float(value))])


def expand_hourly_to_5min(series: PriceSeries) -> PriceSeries:
    """Repeat each hourly price over its twelve 5-minute subintervals."""
    if series.resolution != timedelta(hours=1):
        raise DataValidationError(
            f"expected an hourly series, got resolution {series.resolution}"
        )
    return PriceSeries(
        series.zone,
        series.start,
        timedelta(minutes=5),
        np.repeat(series.values, 12),
    )


def moving_stats(series: PriceSeries, window: timedelta) -> tuple[PriceSeries, PriceSeries]:
    """Trailing-window mean and window-averaged daily price deviation.

    The first output is the trailing mean at the series' own resolution
    (windows expand at the head). The second holds, per whole day, the
    population standard deviation of that day's prices, averaged over the
    trailing window; it is returned as a daily-resolution series.
    """
    if window > series.span:
        raise DataValidationError(f"window {window} exceeds series span {series.span}")
    if window <= timedelta(0):
        raise DataValidationError("window must be positive")
    w = max(1, int(round(window / series.resolution)))
    values = series.values
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - w, 0)
    mean = (csum[idx] - csum[lo]) / (idx - lo)
    mean_series = series.with_values(mean)

    per_day = int(round(timedelta(days=1) / series.resolution))
    num_days = values.size // per_day
    if num_days < 1:
        raise DataValidationError("series too short for daily deviations (needs one full day)")
    days = values[: num_days * per_day].reshape(num_days, per_day)
    daily_std = days.std(axis=1)
    w_days = max(1, int(round(window / timedelta(days=1))))
    dsum = np.concatenate([[0.0], np.cumsum(daily_std)])
    didx = np.arange(1, num_days + 1)
    dlo = np.maximum(didx - w_days, 0)
    deviation = (dsum[didx] - dsum[dlo]) / (didx - dlo)
    deviation_series = PriceSeries(series.zone, series.start, timedelta(days=1), deviation)
    return mean_series, deviation_series


@dataclass(frozen=True, eq=False)
class DurationCurve:
    """Series values sorted descending, with top/bottom 1% quantile markers."""

    values: np.ndarray
    q01_index: int
    q99_index: int

    @property
    def q01_value(self) -> float:
        return float(self.values[self.q01_index])

    @property
    def q99_value(self) -> float:
        return float(self.values[self.q99_index])


def duration_curve(values: PriceSeries | np.ndarray) -> DurationCurve:
    """Sort values descending and mark the 1% and 99% quantile positions."""
    arr = values.values if isinstance(values, PriceSeries) else np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DataValidationError("duration curve needs at least one value")
    ordered = np.sort(arr)[::-1].copy()
    n = arr.size
    return DurationCurve(
        values=ordered,
        q01_index=min(int(math.floor(0.01 * n)), n - 1),
        q99_index=min(int(math.floor(0.99 * n)), n - 1),
    )


def synthetic_tape(
    zone: str,
    start: datetime,
    resolution: timedelta,
    num_values: int,
    low: float = 15.0,
    high: float = 45.0,
    period_hours: float = 24.0,
    noise_std: float = 0.0,
    seed: int | None = None,
) -> PriceSeries:
    """Two-level square-wave price tape with optional seeded Gaussian noise.

    The wave spends the first half of each period at ``low`` and the second
    at ``high``. Used for tests and demos; no real market data ships with
    the package.
    """
    if num_values < 1:
        raise DataValidationError("num_values must be at least 1")
    dt_hours = resolution.total_seconds() / 3600.0
    hours = np.arange(num_values) * dt_hours
    phase = np.mod(hours, period_hours) / period_hours
    values = np.where(phase < 0.5, float(low), float(high))
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_std, size=num_values)
    return PriceSeries(zone, start, resolution, values)


def write_surface(surface: ValueSurface, path: str | Path) -> None:
    """Dump a value surface as long-format CSV: (period, soc_mwh, value_usd_per_mwh)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = surface.grid.points()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "soc_mwh", "marginal_value_usd_per_mwh"])
        for t in range(surface.values.shape[0]):
            row_vals = surface.values[t]
            for soc, val in zip(pts, row_vals):
                writer.writerow([t, repr(float(soc)), repr(float(val))])


def write_bid_schedule(schedule: BidSchedule, path: str | Path) -> None:
    """Dump a bid schedule as CSV, one row per period (power) or per segment (SoC)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if schedule.kind == "power":
            writer.writerow(["period", "type", "discharge_bid", "charge_bid"])
            for t, bid in enumerate(schedule.entries):
                writer.writerow([t, "power", repr(bid.discharge_bid), repr(bid.charge_bid)])
        else:
            writer.writerow(["period", "segment_index", "soc_lo_mwh", "soc_hi_mwh", "value_usd_per_mwh"])
            for t, curve in enumerate(schedule.entries):
                for j in range(curve.num_segments):
                    writer.writerow(
                        [
                            t,
                            j,
                            repr(float(curve.boundaries[j])),
                            repr(float(curve.boundaries[j + 1])),
                            repr(float(curve.segment_values[j])),
                        ]
                    )


def write_trace(
    result: SimulationResult, prices: PriceSeries, path: str | Path
) -> None:
    """Per-interval dispatch trace: timestamp, price, powers, SoC, profit."""
    if len(result.decisions) != len(prices):
        raise DataValidationError("trace length does not match the price series")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["timestamp", "price_usd_per_mwh", "discharge_mw", "charge_mw", "soc_mwh", "profit_usd"]
        )
        for i, d in enumerate(result.decisions):
            writer.writerow(
                [
                    prices.timestamp(i).isoformat(),
                    repr(float(prices.values[i])),
                    repr(d.discharge_power),
                    repr(d.charge_power),
                    repr(d.soc_after),
                    repr(d.realized_profit),
                ]
            )


def write_duration_curves(
    prices: PriceSeries, schedule: BidSchedule, path: str | Path
) -> None:
    """Plot-ready duration-curve table for realized prices and power bids.

    Each column is independently sorted descending over the settlement
    horizon; the top/bottom 1% quantile rows carry a marker. Hourly bids are
    expanded to the price resolution first so the columns align.
    """
    if schedule.kind != "power":
        raise DataValidationError("duration-curve reports need power bids")
    per_bid = round(len(prices) / len(schedule))
    if per_bid < 1 or len(schedule) * per_bid != len(prices):
        raise DataValidationError("bid schedule does not tile the price series")
    discharge = np.repeat([b.discharge_bid for b in schedule.entries], per_bid)
    charge = np.repeat([b.charge_bid for b in schedule.entries], per_bid)
    curves = {
        "price": duration_curve(prices),
        "discharge_bid": duration_curve(discharge),
        "charge_bid": duration_curve(charge),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(prices)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "quantile_marker", "price", "discharge_bid", "charge_bid"])
        q01 = curves["price"].q01_index
        q99 = curves["price"].q99_index
        for i in range(n):
            marker = "q01" if i == q01 else ("q99" if i == q99 else "")
            writer.writerow(
                [
                    i,
                    marker,
                    repr(float(curves["price"].values[i])),
                    repr(float(curves["discharge_bid"].values[i])),
                    repr(float(curves["charge_bid"].values[i])),
                ]
            )


SUMMARY_HEADER = (
    "zone",
    "duration_hours",
    "case_id",
    "total_profit_usd",
    "utilization",
    "cycles",
    "discharged_mwh",
)


def write_summary_csv(rows: list[dict], path: str | Path) -> None:
    """Summary table, one row per (zone, duration, case), sorted canonically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(rows, key=lambda r: (r["zone"], r["duration_hours"], r["case_id"]))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in ordered:
            writer.writerow([_plain(row.get(k, "")) for k in SUMMARY_HEADER])


def write_summary_json(rows: list[dict], meta: dict, path: str | Path) -> None:
    """Machine-readable run summary: metadata plus the same rows as the CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(rows, key=lambda r: (r["zone"], r["duration_hours"], r["case_id"]))
    doc = {"meta": meta, "rows": ordered}
    with path.open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
