"""Command-line front end: tape generation, valuation, bidding, and case sweeps.

Exit codes: 0 success, 1 usage error, 2 data validation error,
3 infeasible dispatch scenario. The default output directory can be set
with the SOCBID_OUTPUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import data_io
from .bids import PowerBid, SoCBidCurve, bid_schedule_from_prices
from .dispatch import (
    GeneratorOffer,
    InfeasibleMarketError,
    MarketInstance,
    StorageUnit,
    clear_power_bid_ed,
    clear_soc_bid_ed,
)
from .model import DataValidationError, PriceSeries, SoCGrid, StorageParams, validate_params
from .simulate import CASE_IDS, CaseConfig, run_case, utilization
from .valuation import backward_induct

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3

DEFAULT_DURATIONS = (1.0, 2.0, 4.0, 6.0, 12.0, 24.0, 72.0)
REFERENCE_CASE = "RT-SB-PF"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


@dataclass
class RunManifest:
    """Everything a sweep needs; may be loaded from JSON and overridden by flags."""

    zones: list[str] = field(default_factory=list)
    durations: list[float] = field(default_factory=lambda: list(DEFAULT_DURATIONS))
    cases: list[str] = field(default_factory=lambda: list(CASE_IDS))
    power_rating: float = 1.0
    efficiency_one_way: float = 0.9
    discharge_cost: float = 10.0
    grid_points: int = 1001
    segments_per_hour: int = 20
    initial_soc: float = 0.0
    da_prices: str | None = None
    rt_prices: str | None = None
    synthetic_days: float | None = None
    synthetic_low: float = 15.0
    synthetic_high: float = 45.0
    synthetic_noise: float = 5.0
    synthetic_period_hours: float = 24.0
    seed: int = 0
    output_dir: str = "."
    workers: int = 1
    fill_gaps: bool = False
    write_traces: bool = False

    def validate(self) -> None:
        if not self.zones:
            raise UsageError("no zones given (set --zones or the manifest 'zones' field)")
        if not self.durations or any(d <= 0 for d in self.durations):
            raise UsageError("durations must be positive numbers of hours")
        for case in self.cases:
            if case not in CASE_IDS:
                raise UsageError(f"unknown case id {case!r}; valid: {', '.join(CASE_IDS)}")
        if self.da_prices is None and self.rt_prices is None and self.synthetic_days is None:
            raise UsageError("supply --da-prices/--rt-prices or --synthetic-days")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")


def _load_manifest(args: argparse.Namespace) -> RunManifest:
    manifest = RunManifest()
    if getattr(args, "manifest", None):
        with open(args.manifest) as fh:
            data = json.load(fh)
        unknown = set(data) - set(manifest.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
        for key, value in data.items():
            setattr(manifest, key, value)
    overrides = {
        "zones": args.zones,
        "durations": args.durations,
        "cases": getattr(args, "cases", None),
        "power_rating": args.power_rating,
        "efficiency_one_way": args.efficiency,
        "discharge_cost": args.discharge_cost,
        "grid_points": args.grid_points,
        "segments_per_hour": args.segments_per_hour,
        "initial_soc": getattr(args, "initial_soc", None),
        "da_prices": args.da_prices,
        "rt_prices": args.rt_prices,
        "synthetic_days": args.synthetic_days,
        "seed": args.seed,
        "output_dir": args.output_dir,
        "workers": getattr(args, "workers", None),
        "fill_gaps": getattr(args, "fill_gaps", None),
        "write_traces": getattr(args, "write_traces", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(manifest, key, value)
    if manifest.output_dir is None:
        manifest.output_dir = os.environ.get("SOCBID_OUTPUT_DIR", ".")
    return manifest


def _storage_params(manifest: RunManifest, duration_hours: float) -> StorageParams:
    return validate_params(
        StorageParams(
            power_rating=manifest.power_rating,
            energy_capacity=manifest.power_rating * duration_hours,
            efficiency_one_way=manifest.efficiency_one_way,
            discharge_cost=manifest.discharge_cost,
        )
    )


def _zone_seed(manifest: RunManifest, zone: str) -> int:
    # Stable per-zone offset so multi-zone synthetic runs differ but reproduce.
    return manifest.seed + sum(ord(ch) for ch in zone)


def _zone_series(
    manifest: RunManifest, zone: str
) -> tuple[PriceSeries | None, PriceSeries | None]:
    """Load or synthesize the day-ahead and real-time tapes for one zone."""
    start = datetime(2019, 1, 1, tzinfo=timezone.utc)
    fill = "previous" if manifest.fill_gaps else "error"
    da = rt = None
    if manifest.da_prices:
        da = data_io.load_prices(manifest.da_prices, zone, timedelta(hours=1), fill=fill)
        if da.gaps_filled:
            print(f"warning: forward-filled {da.gaps_filled} day-ahead interval(s) "
                  f"for zone {zone}", file=sys.stderr)
    if manifest.rt_prices:
        rt = data_io.load_prices(manifest.rt_prices, zone, timedelta(minutes=5), fill=fill)
        if rt.gaps_filled:
            print(f"warning: forward-filled {rt.gaps_filled} real-time interval(s) "
                  f"for zone {zone}", file=sys.stderr)
    if da is None and rt is None and manifest.synthetic_days:
        hours = int(round(manifest.synthetic_days * 24))
        da = data_io.synthetic_tape(
            zone,
            start,
            timedelta(hours=1),
            hours,
            low=manifest.synthetic_low,
            high=manifest.synthetic_high,
            period_hours=manifest.synthetic_period_hours,
            noise_std=0.0,
        )
        rt = data_io.synthetic_tape(
            zone,
            start,
            timedelta(minutes=5),
            hours * 12,
            low=manifest.synthetic_low,
            high=manifest.synthetic_high,
            period_hours=manifest.synthetic_period_hours,
            noise_std=manifest.synthetic_noise,
            seed=_zone_seed(manifest, zone),
        )
    return da, rt


def _grid_for(manifest: RunManifest, params: StorageParams, dt_hours: float) -> SoCGrid:
    points = max(manifest.grid_points, SoCGrid.min_points(params, dt_hours))
    return SoCGrid.for_storage(params, dt_hours, points)


def _run_zone_duration(job: dict) -> list[dict]:
    """Worker: run every requested case for one (zone, duration) pair."""
    manifest = RunManifest(**job["manifest"])
    zone = job["zone"]
    duration = job["duration"]
    da, rt = _zone_series(manifest, zone)
    params = _storage_params(manifest, duration)

    def one_case(case_id: str):
        config = CaseConfig(case_id, initial_soc=manifest.initial_soc)
        source = da if config.valuation_source == "day_ahead" else rt
        if source is None:
            raise DataValidationError(
                f"case {case_id} needs {config.valuation_source} prices for zone {zone}"
            )
        grid = _grid_for(manifest, params, source.resolution_hours)
        return run_case(
            config, da, rt, params, grid,
            segments_per_hour_of_duration=manifest.segments_per_hour,
        )

    reference = one_case(REFERENCE_CASE)
    rows = []
    for case_id in manifest.cases:
        result = reference if case_id == REFERENCE_CASE else one_case(case_id)
        rows.append(
            {
                "zone": zone,
                "duration_hours": duration,
                "case_id": case_id,
                "total_profit_usd": result.total_profit,
                "utilization": utilization(result, reference),
                "cycles": result.cycles,
                "discharged_mwh": result.discharged_energy,
            }
        )
        if manifest.write_traces:
            config = CaseConfig(case_id)
            settled = da if config.settlement_source == "day_ahead" else rt
            path = Path(manifest.output_dir) / f"trace_{zone}_{duration:g}h_{case_id}.csv"
            data_io.write_trace(result, settled, path)
    return rows


def _simulate(manifest: RunManifest) -> list[dict]:
    manifest.validate()
    jobs = [
        {"manifest": asdict(manifest), "zone": zone, "duration": duration}
        for zone in manifest.zones
        for duration in manifest.durations
    ]
    if manifest.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            results = list(pool.map(_run_zone_duration, jobs))
    else:
        results = [_run_zone_duration(job) for job in jobs]
    rows = [row for chunk in results for row in chunk]
    rows.sort(key=lambda r: (r["zone"], r["duration_hours"], r["case_id"]))
    return rows


def _summary_meta(manifest: RunManifest) -> dict:
    # Worker count and output paths are excluded: identical inputs must give
    # byte-identical summaries regardless of parallelism.
    meta = asdict(manifest)
    meta.pop("workers")
    meta.pop("output_dir")
    return meta


def cmd_simulate(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args)
    rows = _simulate(manifest)
    out = Path(manifest.output_dir)
    data_io.write_summary_csv(rows, out / "summary.csv")
    data_io.write_summary_json(rows, _summary_meta(manifest), out / "summary.json")
    for row in rows:
        print(
            f"{row['zone']:>8} {row['duration_hours']:>6g}h {row['case_id']:<9}"
            f" profit={row['total_profit_usd']:.2f} utilization={row['utilization']:.4f}"
        )
    print(f"wrote {out / 'summary.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    args.cases = list(CASE_IDS)
    return cmd_simulate(args)


def cmd_value(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args)
    manifest.validate()
    out = Path(manifest.output_dir)
    for zone in manifest.zones:
        da, rt = _zone_series(manifest, zone)
        source = da if args.source == "day_ahead" else rt
        if source is None:
            raise DataValidationError(f"no {args.source} prices available for zone {zone}")
        for duration in manifest.durations:
            params = _storage_params(manifest, duration)
            grid = _grid_for(manifest, params, source.resolution_hours)
            surface = backward_induct(source, params, grid)
            path = out / f"surface_{zone}_{duration:g}h.csv"
            data_io.write_surface(surface, path)
            print(f"wrote {path} ({surface.horizon + 1} curves)")
    return EXIT_OK


def cmd_bids(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args)
    manifest.validate()
    out = Path(manifest.output_dir)
    for zone in manifest.zones:
        da, rt = _zone_series(manifest, zone)
        source = da if args.source == "day_ahead" else rt
        if source is None:
            raise DataValidationError(f"no {args.source} prices available for zone {zone}")
        for duration in manifest.durations:
            params = _storage_params(manifest, duration)
            grid = _grid_for(manifest, params, source.resolution_hours)
            schedule = bid_schedule_from_prices(
                source, params, grid, args.bid_model,
                segments_per_hour_of_duration=manifest.segments_per_hour,
            )
            path = out / f"bids_{args.bid_model}_{zone}_{duration:g}h.csv"
            data_io.write_bid_schedule(schedule, path)
            print(f"wrote {path} ({len(schedule)} periods)")
            if args.bid_model == "power":
                dur_path = out / f"duration_{zone}_{duration:g}h.csv"
                data_io.write_duration_curves(source, schedule, dur_path)
                print(f"wrote {dur_path}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.output_dir or os.environ.get("SOCBID_OUTPUT_DIR", "."))
    start = datetime(2019, 1, 1, tzinfo=timezone.utc)
    hours = int(round(args.days * 24))
    for zone in args.zones:
        da = data_io.synthetic_tape(
            zone, start, timedelta(hours=1), hours,
            low=args.low, high=args.high, period_hours=args.period_hours, noise_std=0.0,
        )
        rt = data_io.synthetic_tape(
            zone, start, timedelta(minutes=5), hours * 12,
            low=args.low, high=args.high, period_hours=args.period_hours,
            noise_std=args.noise, seed=args.seed + sum(ord(ch) for ch in zone),
        )
        data_io.save_prices(da, out / f"{zone}_da.csv")
        data_io.save_prices(rt, out / f"{zone}_rt.csv")
        print(f"wrote {out / (zone + '_da.csv')} and {out / (zone + '_rt.csv')}")
    return EXIT_OK


def _read_scenario(path: str) -> tuple[MarketInstance, str]:
    """Parse a dispatch scenario CSV into a market instance.

    Row kinds: ``generator,<name>,<capacity>,<cost>`` (repeat for segments),
    ``demand,,<mw>``, ``storage,<name>,<P>,<E>,<eta>,<cost>,<soc>``,
    ``powerbid,<name>,<discharge_bid>,<charge_bid>``,
    ``socbid,<name>,<soc_lo>,<soc_hi>,<value>`` (repeat for segments).
    """
    gens: dict[str, list[tuple[float, float]]] = {}
    demand = None
    storage_rows: dict[str, list[float]] = {}
    power_bids: dict[str, PowerBid] = {}
    soc_rows: dict[str, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        for row_num, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            kind = row[0].strip().lower()
            try:
                if kind == "generator":
                    gens.setdefault(row[1], []).append((float(row[2]), float(row[3])))
                elif kind == "demand":
                    demand = float(row[2])
                elif kind == "storage":
                    storage_rows[row[1]] = [float(x) for x in row[2:7]]
                elif kind == "powerbid":
                    power_bids[row[1]] = PowerBid(float(row[2]), float(row[3]))
                elif kind == "socbid":
                    soc_rows.setdefault(row[1], []).append(
                        (float(row[2]), float(row[3]), float(row[4]))
                    )
                else:
                    raise DataValidationError(f"row {row_num}: unknown row kind {kind!r}")
            except (IndexError, ValueError) as exc:
                raise DataValidationError(f"row {row_num}: malformed {kind!r} row") from exc
    if demand is None:
        raise DataValidationError("scenario has no demand row")
    if power_bids and soc_rows:
        raise DataValidationError("scenario mixes power bids and SoC bids")
    storages = []
    for name, (p, e, eta, cost, soc) in storage_rows.items():
        params = StorageParams(p, e, eta, cost)
        if name in power_bids:
            bid = power_bids[name]
        elif name in soc_rows:
            rows = sorted(soc_rows[name])
            bounds = [rows[0][0]] + [r[1] for r in rows]
            bid = SoCBidCurve(np.asarray(bounds), np.asarray([r[2] for r in rows]))
        else:
            raise DataValidationError(f"storage {name} has no bid rows")
        storages.append(StorageUnit(name, params, soc, bid))
    offers = tuple(GeneratorOffer(name, tuple(segs)) for name, segs in gens.items())
    instance = MarketInstance(offers, demand, tuple(storages))
    model = "soc" if soc_rows else "power"
    return instance, model


def cmd_dispatch_demo(args: argparse.Namespace) -> int:
    instance, model = _read_scenario(args.scenario)
    clear = clear_soc_bid_ed if model == "soc" else clear_power_bid_ed
    result = clear(instance)
    print(f"clearing price: {result.price:.2f} $/MWh")
    for name, mw in sorted(result.generation.items()):
        print(f"  generator {name:<12} {mw:10.3f} MW")
    for name, decision in sorted(result.storage.items()):
        print(
            f"  storage   {name:<12} discharge={decision.discharge_power:.3f} MW "
            f"charge={decision.charge_power:.3f} MW soc_after={decision.soc_after:.3f} MWh"
        )
    total = result.total_generation + result.total_storage_discharge
    print(f"  balance: supply {total:.3f} MW = demand {instance.demand:.3f} MW "
          f"+ charging {result.cleared_charge:.3f} MW")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, with_cases: bool = False) -> None:
    parser.add_argument("--manifest", help="JSON file supplying any of the run settings")
    parser.add_argument("--zones", nargs="+", help="zone labels to process")
    parser.add_argument("--durations", nargs="+", type=float, help="storage durations in hours")
    if with_cases:
        parser.add_argument("--cases", nargs="+", help="case ids to simulate")
        parser.add_argument("--initial-soc", dest="initial_soc", type=float)
        parser.add_argument("--workers", type=int, help="parallel (zone, duration) workers")
        parser.add_argument("--trace", dest="write_traces", action="store_const", const=True,
                            help="also write per-interval dispatch traces")
    parser.add_argument("--fill-gaps", dest="fill_gaps", action="store_const", const=True,
                        help="forward-fill missing price intervals instead of failing")
    parser.add_argument("--power-rating", dest="power_rating", type=float)
    parser.add_argument("--efficiency", type=float, help="one-way efficiency in (0, 1]")
    parser.add_argument("--discharge-cost", dest="discharge_cost", type=float)
    parser.add_argument("--grid-points", dest="grid_points", type=int)
    parser.add_argument("--segments-per-hour", dest="segments_per_hour", type=int)
    parser.add_argument("--da-prices", dest="da_prices", help="day-ahead price CSV (hourly)")
    parser.add_argument("--rt-prices", dest="rt_prices", help="real-time price CSV (5-minute)")
    parser.add_argument("--synthetic-days", dest="synthetic_days", type=float,
                        help="generate synthetic tapes of this many days instead of loading files")
    parser.add_argument("--seed", type=int, help="seed for synthetic tapes")
    parser.add_argument("--output-dir", dest="output_dir",
                        default=os.environ.get("SOCBID_OUTPUT_DIR"),
                        help="where reports go (default: $SOCBID_OUTPUT_DIR or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="socbid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic day-ahead and real-time tapes")
    p.add_argument("--zones", nargs="+", required=True)
    p.add_argument("--days", type=float, default=7.0)
    p.add_argument("--low", type=float, default=15.0)
    p.add_argument("--high", type=float, default=45.0)
    p.add_argument("--period-hours", dest="period_hours", type=float, default=24.0)
    p.add_argument("--noise", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", dest="output_dir",
                   default=os.environ.get("SOCBID_OUTPUT_DIR"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("value", help="dump marginal-value surfaces per (zone, duration)")
    _add_common(p)
    p.add_argument("--source", choices=["day_ahead", "real_time"], default="day_ahead")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("bids", help="dump bid schedules per (zone, duration)")
    _add_common(p)
    p.add_argument("--source", choices=["day_ahead", "real_time"], default="day_ahead")
    p.add_argument("--bid-model", dest="bid_model", choices=["power", "soc"], default="power")
    p.set_defaults(func=cmd_bids)

    p = sub.add_parser("simulate", help="run selected cases and write the summary table")
    _add_common(p, with_cases=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the full six-case matrix")
    _add_common(p, with_cases=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dispatch-demo", help="clear a single-period market scenario")
    p.add_argument("--scenario", required=True, help="scenario CSV file")
    p.set_defaults(func=cmd_dispatch_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleMarketError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
