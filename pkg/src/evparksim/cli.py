"""Command-line front end.

Subcommands: ``run`` (one scenario, one method), ``compare`` (all three
methods on one shared fleet), ``gen-fleet`` (sample and export a fleet)
and ``sweep`` (rerun the comparison over a list of flag powers).  All
numeric output is formatted to 9 significant digits so repeated runs are
byte-identical.  Exit codes: 0 success, 1 usage error, 2 scenario or
validation error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._backend import BACKEND_NAME
from .dispatch import SimulationResult, simulate
from .errors import EvParkSimError, InternalCheckError, ScenarioError
from .fleet import FleetConfig, sample_fleet, write_fleet_csv
from .ingest import ScenarioConfig, load_scenario, with_policy
from .model import DEFAULT_GRID
from .policy import Method

METHOD_ORDER = (Method.PROPOSED, Method.SCHEDULING_ONLY, Method.UNCONTROLLED)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _round9(x: float) -> float:
    return float(_fmt(x))


def _totals_dict(result: SimulationResult) -> dict:
    return {
        "cost_usd": _round9(result.total_cost_usd),
        "grid_energy_kwh": _round9(result.grid_energy_kwh),
        "pv_energy_kwh": _round9(result.pv_energy_kwh),
        "discharge_energy_kwh": _round9(result.discharge_energy_kwh),
        "peak_grid_kw": _round9(result.peak_grid_kw),
    }


def _write_json(payload: dict, path: Path) -> None:
    """Write JSON atomically so failed runs never leave a partial file."""
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _verified(result: SimulationResult, scenario: ScenarioConfig) -> SimulationResult:
    problems = result.verify(scenario.base_load, scenario.fleet, scenario.grid)
    if problems:
        raise InternalCheckError("; ".join(problems))
    return result


def _run_simulation(scenario: ScenarioConfig, method: Method) -> SimulationResult:
    return _verified(simulate(scenario, scenario.fleet, method), scenario)


def _write_run_files(scenario: ScenarioConfig, result: SimulationResult, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    timeseries = out_dir / "timeseries.csv"
    with open(timeseries, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "slot", "base_kw", "pv_kw", "grid_to_load", "grid_to_ev", "pv_to_load",
                "pv_to_ev", "ev_charge", "ev_discharge", "export", "cost_usd",
                "grid_rate", "pv_rate",
            ]
        )
        for d in result.slots:
            writer.writerow(
                [
                    d.slot,
                    _fmt(scenario.base_load.values[d.slot]),
                    _fmt(scenario.pv.values[d.slot]),
                    _fmt(d.grid_to_load),
                    _fmt(d.grid_to_ev),
                    _fmt(d.pv_to_load),
                    _fmt(d.pv_to_ev),
                    _fmt(d.ev_charge_total),
                    _fmt(d.ev_discharge_total),
                    _fmt(d.export),
                    _fmt(d.cost),
                    _fmt(scenario.tariff.grid_rate[d.slot]),
                    _fmt(scenario.tariff.pv_rate[d.slot]),
                ]
            )
    soc_path = out_dir / "soc.csv"
    with open(soc_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", *result.ev_ids])
        for s in range(scenario.grid.slots_per_day):
            writer.writerow([s, *(_fmt(v) for v in result.soc[s])])

    n = len(scenario.fleet)
    below = sum(
        1
        for ev, soc in zip(scenario.fleet, result.departure_soc)
        if soc < ev.target_soc - 1e-9
    )
    report = {
        "scenario_digest": scenario.digest(),
        "method": result.method,
        "totals": _totals_dict(result),
        "departure_soc": {
            "min": _round9(float(np.min(result.departure_soc))) if n else None,
            "mean": _round9(float(np.mean(result.departure_soc))) if n else None,
            "below_target_count": below,
        },
        "files": {"timeseries": timeseries.name, "soc": soc_path.name},
    }
    _write_json(report, out_dir / "summary.json")
    return report


def _resolve_out(args: argparse.Namespace, scenario: ScenarioConfig) -> Path:
    out = getattr(args, "out", None) or scenario.output_dir
    if out is None:
        raise _UsageError("no output directory: pass --out or set output_dir in the scenario")
    return Path(out)


def _load(args: argparse.Namespace) -> ScenarioConfig:
    return load_scenario(
        args.scenario,
        seed=args.seed,
        method=getattr(args, "method", None),
        flag_power=args.flag_power,
        accounting=args.accounting,
    )


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args)
    out_dir = _resolve_out(args, scenario)
    result = _run_simulation(scenario, scenario.policy.method)
    report = _write_run_files(scenario, result, out_dir)
    print(f"method={report['method']} cost_usd={_fmt(report['totals']['cost_usd'])} "
          f"peak_grid_kw={_fmt(report['totals']['peak_grid_kw'])} -> {out_dir}")
    return 0


def _reductions(proposed: SimulationResult, baseline: SimulationResult) -> dict:
    def pct(base: float, new: float) -> float | None:
        if base == 0:
            return None
        return _round9((base - new) / base * 100.0)

    return {
        "cost_pct": pct(baseline.total_cost_usd, proposed.total_cost_usd),
        "grid_energy_pct": pct(baseline.grid_energy_kwh, proposed.grid_energy_kwh),
        "peak_grid_pct": pct(baseline.peak_grid_kw, proposed.peak_grid_kw),
    }


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load(args)
    out_dir = _resolve_out(args, scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {m: _run_simulation(scenario, m) for m in METHOD_ORDER}
    payload = {
        "scenario_digest": scenario.digest(),
        "seed": scenario.seed,
        "n_evs": len(scenario.fleet),
        "methods": {m.value: _totals_dict(results[m]) for m in METHOD_ORDER},
        "reductions_vs_scheduling_only": _reductions(
            results[Method.PROPOSED], results[Method.SCHEDULING_ONLY]
        ),
        "reductions_vs_uncontrolled": _reductions(
            results[Method.PROPOSED], results[Method.UNCONTROLLED]
        ),
    }
    _write_json(payload, out_dir / "compare.json")

    header = f"{'method':<18}{'cost_usd':>14}{'grid_kwh':>14}{'pv_kwh':>12}{'dch_kwh':>12}{'peak_kw':>12}"
    print(header)
    for m in METHOD_ORDER:
        r = results[m]
        print(
            f"{m.value:<18}{_fmt(r.total_cost_usd):>14}{_fmt(r.grid_energy_kwh):>14}"
            f"{_fmt(r.pv_energy_kwh):>12}{_fmt(r.discharge_energy_kwh):>12}"
            f"{_fmt(r.peak_grid_kw):>12}"
        )
    for label, key in (
        ("scheduling_only", "reductions_vs_scheduling_only"),
        ("uncontrolled", "reductions_vs_uncontrolled"),
    ):
        red = payload[key]
        cost = "n/a" if red["cost_pct"] is None else f"{_fmt(red['cost_pct'])}%"
        peak = "n/a" if red["peak_grid_pct"] is None else f"{_fmt(red['peak_grid_pct'])}%"
        print(f"reduction vs {label}: cost {cost}, peak {peak}")
    return 0


def cmd_gen_fleet(args: argparse.Namespace) -> int:
    if args.scenario is not None:
        scenario = load_scenario(args.scenario, seed=args.seed)
        if scenario.fleet_config is None:
            raise ScenarioError(
                f"{args.scenario}: scenario takes its fleet from a file; "
                "gen-fleet needs an inline fleet config"
            )
        config = scenario.fleet_config
        fleet = list(scenario.fleet)
    else:
        config = FleetConfig(
            n_evs=args.n_evs,
            seed=args.seed if args.seed is not None else 0,
            mode_split=args.mode_split,
            arrival_window=tuple(args.arrival_window),
            departure_window=tuple(args.departure_window),
            soc_mean=args.soc_mean,
            soc_std=args.soc_std,
        )
        fleet = sample_fleet(config)
    write_fleet_csv(fleet, args.out)

    per_hour = 60 // DEFAULT_GRID.minutes_per_slot
    socs = [ev.initial_soc for ev in fleet]
    arrivals = [ev.arrival_slot // per_hour for ev in fleet]
    departures = [ev.departure_slot // per_hour for ev in fleet]
    print(f"wrote {len(fleet)} EVs -> {args.out}")
    print(f"arrival window {config.arrival_window[0]}-{config.arrival_window[1]}, "
          f"departure window {config.departure_window[0]}-{config.departure_window[1]}")
    print(f"initial soc: mean {_fmt(float(np.mean(socs)))} std {_fmt(float(np.std(socs)))}")
    for name, hours in (("arrivals", arrivals), ("departures", departures)):
        counts = {}
        for h in hours:
            counts[h] = counts.get(h, 0) + 1
        line = " ".join(f"{h:02d}h:{counts[h]}" for h in sorted(counts))
        print(f"{name} by hour: {line}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise _UsageError("--values must list at least one flag power")
    scenario = _load(args)
    out_dir = _resolve_out(args, scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        variant = with_policy(scenario, flag_power_kw=value)
        results = {m: _run_simulation(variant, m) for m in METHOD_ORDER}
        row: dict = {"flag_power_kw": _round9(value)}
        for m in METHOD_ORDER:
            r = results[m]
            row[f"{m.value}_cost_usd"] = _round9(r.total_cost_usd)
            row[f"{m.value}_grid_kwh"] = _round9(r.grid_energy_kwh)
            row[f"{m.value}_pv_kwh"] = _round9(r.pv_energy_kwh)
            row[f"{m.value}_discharge_kwh"] = _round9(r.discharge_energy_kwh)
            row[f"{m.value}_peak_kw"] = _round9(r.peak_grid_kw)
        rows.append(row)
    sweep_path = out_dir / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        columns = list(rows[0])
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    print(f"wrote {len(rows)} rows -> {sweep_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="evparksim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"evparksim {__version__} ({BACKEND_NAME} backend)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--flag-power", dest="flag_power", default=None,
                       help="override the switching threshold in kW, or 'auto'")
        p.add_argument("--accounting", default=None,
                       choices=["offset_and_sell", "sell_only", "offset_only"],
                       help="override the discharge accounting mode")

    p_run = sub.add_parser("run", help="simulate one method and write per-slot CSV plus a JSON summary")
    common(p_run)
    p_run.add_argument("--method", default=None,
                       choices=[m.value for m in METHOD_ORDER],
                       help="override the scenario's method")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run all three methods on one shared fleet")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_gen = sub.add_parser("gen-fleet", help="sample a fleet and write it as CSV")
    p_gen.add_argument("--scenario", default=None, help="take the fleet config from this scenario")
    p_gen.add_argument("--out", required=True, help="output CSV path")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--n-evs", type=int, default=50)
    p_gen.add_argument("--mode-split", type=float, default=0.5)
    p_gen.add_argument("--arrival-window", nargs=2, metavar=("START", "END"), default=["15:00", "21:00"])
    p_gen.add_argument("--departure-window", nargs=2, metavar=("START", "END"), default=["07:20", "13:20"])
    p_gen.add_argument("--soc-mean", type=float, default=15.0)
    p_gen.add_argument("--soc-std", type=float, default=5.0)
    p_gen.set_defaults(func=cmd_gen_fleet)

    p_sweep = sub.add_parser("sweep", help="rerun the comparison for each flag power in a list")
    common(p_sweep)
    p_sweep.add_argument("--values", required=True, help="comma-separated flag powers in kW")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InternalCheckError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3
    except EvParkSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
