"""Shared domain types: storage parameters, price series, SoC grid, dispatch records.

Unit conventions used throughout the package: power in MW, energy in MWh,
prices and costs in $/MWh, money in $, time steps in hours. Interval energy
is always power times the step length in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

HOUR = timedelta(hours=1)
FIVE_MIN = timedelta(minutes=5)

# Absolute slack for SoC feasibility comparisons (MWh). Keeps strict bound
# checks from tripping on accumulated float noise in long simulations.
SOC_EPS = 1e-9


class DataValidationError(ValueError):
    """Raised when an input object or file violates a documented invariant."""


@dataclass(frozen=True)
class StorageParams:
    """Physical and economic parameters of one storage unit.

    ``efficiency_one_way`` applies once per direction: charging at grid power
    b stores b*eta MWh per hour, discharging at grid power p drains p/eta MWh
    per hour. ``discharge_cost`` is charged per MWh delivered to the grid.
    """

    power_rating: float
    energy_capacity: float
    efficiency_one_way: float = 0.9
    discharge_cost: float = 10.0
    soc_min: float = 0.0
    soc_max: float | None = None

    def __post_init__(self) -> None:
        if self.soc_max is None:
            object.__setattr__(self, "soc_max", float(self.energy_capacity))

    @property
    def duration_hours(self) -> float:
        """Hours of discharge at full power: energy capacity over power rating."""
        return self.energy_capacity / self.power_rating

    @property
    def soc_span(self) -> float:
        return self.soc_max - self.soc_min


def validate_params(params: StorageParams) -> StorageParams:
    """Check every StorageParams invariant, returning the object unchanged.

    Raises DataValidationError naming the offending field.
    """
    if not (params.power_rating > 0 and math.isfinite(params.power_rating)):
        raise DataValidationError(f"power_rating must be positive, got {params.power_rating}")
    if not (params.energy_capacity > 0 and math.isfinite(params.energy_capacity)):
        raise DataValidationError(
            f"energy_capacity must be positive, got {params.energy_capacity}"
        )
    if not (0.0 < params.efficiency_one_way <= 1.0):
        raise DataValidationError(
            f"efficiency_one_way must lie in (0, 1], got {params.efficiency_one_way}"
        )
    if not (params.discharge_cost >= 0 and math.isfinite(params.discharge_cost)):
        raise DataValidationError(
            f"discharge_cost must be non-negative, got {params.discharge_cost}"
        )
    if not params.soc_min < params.soc_max:
        raise DataValidationError(
            f"soc_min must be below soc_max, got [{params.soc_min}, {params.soc_max}]"
        )
    if params.soc_max > params.energy_capacity + SOC_EPS:
        raise DataValidationError(
            f"soc_max {params.soc_max} exceeds energy_capacity {params.energy_capacity}"
        )
    return params


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Uniformly spaced electricity price tape for one zone.

    Negative prices are meaningful (storage is paid to charge), never an
    error. The series is gap-free by construction: only start, resolution,
    and the value array are stored.
    """

    zone: str
    start: datetime
    resolution: timedelta
    values: np.ndarray
    gaps_filled: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DataValidationError("price series needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise DataValidationError("price series contains non-finite values")
        if self.resolution <= timedelta(0):
            raise DataValidationError(f"resolution must be positive, got {self.resolution}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=timezone.utc))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def resolution_hours(self) -> float:
        return self.resolution.total_seconds() / 3600.0

    @property
    def span(self) -> timedelta:
        return self.resolution * len(self)

    @property
    def end(self) -> datetime:
        return self.start + self.span

    def timestamp(self, i: int) -> datetime:
        return self.start + i * self.resolution

    def with_values(self, values: np.ndarray, resolution: timedelta | None = None) -> PriceSeries:
        return PriceSeries(self.zone, self.start, resolution or self.resolution, values)


@dataclass(frozen=True)
class SoCGrid:
    """Equally spaced SoC levels used to tabulate marginal-value curves.

    Lookups are nearest-point with ties resolved toward the lower SoC level,
    matching the piecewise-constant reading of the tabulated curves.
    """

    soc_min: float
    soc_max: float
    num_points: int = 1001

    def __post_init__(self) -> None:
        if self.num_points < 2:
            raise DataValidationError(f"num_points must be at least 2, got {self.num_points}")
        if not self.soc_min < self.soc_max:
            raise DataValidationError(
                f"grid needs soc_min < soc_max, got [{self.soc_min}, {self.soc_max}]"
            )

    @property
    def step(self) -> float:
        return (self.soc_max - self.soc_min) / (self.num_points - 1)

    @property
    def span(self) -> float:
        return self.soc_max - self.soc_min

    def points(self) -> np.ndarray:
        return np.linspace(self.soc_min, self.soc_max, self.num_points)

    def soc_to_index(self, e: float) -> int:
        """Nearest grid index for SoC level ``e``; exact midpoints round down."""
        x = (e - self.soc_min) * (self.num_points - 1) / (self.soc_max - self.soc_min)
        if x < -1e-9 or x > self.num_points - 1 + 1e-9:
            raise DataValidationError(
                f"SoC {e} outside grid range [{self.soc_min}, {self.soc_max}]"
            )
        idx = math.ceil(x - 0.5)
        return min(max(idx, 0), self.num_points - 1)

    @classmethod
    def for_storage(
        cls, params: StorageParams, dt_hours: float, num_points: int = 1001
    ) -> SoCGrid:
        """Grid over the storage's SoC range, fine enough for time step ``dt_hours``.

        Enforces step <= P*eta*dt/10 so at least ten grid points span one
        full-power interval of SoC movement.
        """
        validate_params(params)
        if dt_hours <= 0:
            raise DataValidationError(f"dt_hours must be positive, got {dt_hours}")
        grid = cls(params.soc_min, params.soc_max, num_points)
        limit = params.power_rating * params.efficiency_one_way * dt_hours / 10.0
        if grid.step > limit * (1 + 1e-12):
            raise DataValidationError(
                f"grid step {grid.step:.6g} MWh exceeds limit {limit:.6g} MWh for "
                f"dt={dt_hours} h; need at least {cls.min_points(params, dt_hours)} points"
            )
        return grid

    @classmethod
    def min_points(cls, params: StorageParams, dt_hours: float) -> int:
        """Smallest point count satisfying the step limit for ``dt_hours``."""
        limit = params.power_rating * params.efficiency_one_way * dt_hours / 10.0
        return int(math.ceil(params.soc_span / limit)) + 1


def soc_to_index(grid: SoCGrid, e: float) -> int:
    """Module-level alias for :meth:`SoCGrid.soc_to_index`."""
    return grid.soc_to_index(e)


@dataclass(frozen=True)
class DispatchDecision:
    """Outcome of one settlement interval for one storage unit.

    ``realized_profit`` is cash at the settlement price minus the true
    discharge cost; ``opportunity_value_delta`` is the value-function change
    booked by SoC-bid dispatch (zero under power bids).
    """

    discharge_power: float
    charge_power: float
    soc_after: float
    realized_profit: float
    opportunity_value_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.discharge_power < -SOC_EPS or self.charge_power < -SOC_EPS:
            raise DataValidationError("dispatch powers must be non-negative")
        if self.discharge_power > SOC_EPS and self.charge_power > SOC_EPS:
            raise DataValidationError("simultaneous charge and discharge is not allowed")

    @property
    def net_power(self) -> float:
        return self.discharge_power - self.charge_power
