"""Scenario, profile, tariff and fleet ingestion.

Profiles travel as two-column CSV (slot, value) with a header row and
exactly one row per slot in order.  Scenarios are YAML files with a
strict schema: unknown keys are rejected and every problem in a broken
file is reported in a single error.  The full schema is documented
field-by-field in the project README.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import yaml

from .accounting import AccountingMode
from .errors import EvParkSimError, InputError, ScenarioError
from .fleet import FleetConfig, load_fleet_csv, sample_fleet
from .model import (
    DEFAULT_SMP,
    DR_PROGRAM_WINDOWS,
    DEFAULT_GRID,
    EvSpec,
    Profile,
    TariffSchedule,
    TimeGrid,
    parse_clock,
    rates_from_windows,
    _boundary_slot,
)
from .policy import Method, PolicyParams, default_flag_power


def _read_series(path: str | Path, grid: TimeGrid) -> list[float]:
    """Parse a (slot, value) CSV: header, then slots 0..n-1 in order."""
    path = Path(path)
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2 or header[0].strip().lower() != "slot":
            raise ScenarioError(f"{path}: expected a 2-column CSV with a 'slot,<value>' header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ScenarioError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            try:
                slot = int(row[0])
                value = float(row[1])
            except ValueError as exc:
                raise ScenarioError(f"{path}: line {lineno}: {exc}") from exc
            expected = len(values)
            if slot != expected:
                raise ScenarioError(
                    f"{path}: line {lineno}: slot {slot} out of order (expected {expected})"
                )
            if value < 0:
                raise ScenarioError(f"{path}: slot {slot} (line {lineno}): negative value {value}")
            values.append(value)
    if len(values) != grid.slots_per_day:
        raise ScenarioError(
            f"{path}: expected {grid.slots_per_day} rows, got {len(values)}"
        )
    return values


def load_profile(path: str | Path, kind: str, grid: TimeGrid = DEFAULT_GRID) -> Profile:
    """Load a power profile (kW per slot) from CSV."""
    return Profile(kind=kind, values=tuple(_read_series(path, grid))).check_grid(grid)


def write_profile(profile: Profile, path: str | Path) -> None:
    """Write a profile as CSV; floats use repr so a round-trip is exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "kw"])
        for slot, value in enumerate(profile.values):
            writer.writerow([slot, repr(float(value))])


def synth_profile(
    kind: str,
    segments: Sequence[tuple[str | float, str | float, float]],
    grid: TimeGrid = DEFAULT_GRID,
) -> Profile:
    """Piecewise-constant profile from (start, end, kW) clock segments.

    Segments may wrap midnight, must land exactly on slot edges, and must
    cover the whole day exactly once.
    """
    values: list[float | None] = [None] * grid.slots_per_day
    for start, end, kw in segments:
        if kw < 0:
            raise InputError(f"segment {start}-{end}: negative power {kw}")
        s0 = _boundary_slot(start, grid)
        s1 = _boundary_slot(end, grid)
        length = (s1 - s0) % grid.slots_per_day
        if length == 0 and parse_clock(start) != parse_clock(end):
            length = grid.slots_per_day
        if length == 0:
            raise InputError(f"segment {start}-{end} is empty")
        for k in range(length):
            s = (s0 + k) % grid.slots_per_day
            if values[s] is not None:
                raise InputError(f"segments overlap at slot {s}")
            values[s] = float(kw)
    gaps = [s for s, v in enumerate(values) if v is None]
    if gaps:
        raise InputError(f"segments leave {len(gaps)} slots uncovered (first gap: slot {gaps[0]})")
    return Profile(kind=kind, values=tuple(values))  # type: ignore[arg-type]


def irradiance_to_power(
    irradiance_w_m2: Sequence[float],
    panel_area_m2: float,
    efficiency: float,
    grid: TimeGrid = DEFAULT_GRID,
) -> Profile:
    """PV production profile from per-slot irradiance (W/m²) and panel size."""
    if panel_area_m2 <= 0:
        raise InputError(f"panel_area_m2 must be positive, got {panel_area_m2}")
    if not 0 < efficiency <= 1:
        raise InputError(f"efficiency must be in (0, 1], got {efficiency}")
    bad = [s for s, w in enumerate(irradiance_w_m2) if w < 0]
    if bad:
        raise InputError(f"negative irradiance at slot {bad[0]}")
    values = tuple(w * panel_area_m2 * efficiency / 1000.0 for w in irradiance_w_m2)
    return Profile(kind="pv_production", values=values).check_grid(grid)


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully resolved scenario: profiles loaded, flag power resolved,
    fleet materialized.  Resolving the same file twice yields identical
    configs (the fleet sample is a pure function of config and seed)."""

    grid: TimeGrid
    base_load: Profile
    pv: Profile
    tariff: TariffSchedule
    fleet: tuple[EvSpec, ...]
    policy: PolicyParams
    accounting: AccountingMode
    grid_cap_kw: float | None
    seed: int
    output_dir: str | None
    fleet_config: FleetConfig | None = None

    def digest(self) -> str:
        """Hash of the resolved physics (excludes output locations)."""
        payload = {
            "slots_per_day": self.grid.slots_per_day,
            "base_load": [repr(v) for v in self.base_load.values],
            "pv": [repr(v) for v in self.pv.values],
            "grid_rate": [repr(v) for v in self.tariff.grid_rate],
            "pv_rate": [repr(v) for v in self.tariff.pv_rate],
            "fleet": [
                [
                    ev.id,
                    repr(ev.capacity_kwh),
                    ev.mode.label,
                    ev.arrival_slot,
                    ev.departure_slot,
                    repr(ev.initial_soc),
                    repr(ev.target_soc),
                    repr(ev.soc_min),
                    repr(ev.soc_max),
                    repr(ev.charge_efficiency),
                    repr(ev.discharge_efficiency),
                ]
                for ev in self.fleet
            ],
            "policy": [self.policy.method.value, repr(self.policy.flag_power_kw), self.policy.urgency_margin],
            "accounting": self.accounting.value,
            "grid_cap_kw": None if self.grid_cap_kw is None else repr(self.grid_cap_kw),
            "seed": self.seed,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def fixture_scenario_path() -> Path:
    """Path of the canonical scenario shipped with the package."""
    return Path(resources.files("evparksim").joinpath("data/fixture.yaml"))  # type: ignore[arg-type]


class _Problems:
    def __init__(self) -> None:
        self.items: list[str] = []

    def add(self, message: str) -> None:
        self.items.append(message)

    def check_keys(self, mapping: Any, allowed: set[str], where: str) -> bool:
        if not isinstance(mapping, dict):
            self.add(f"{where}: expected a mapping")
            return False
        for key in mapping:
            if key not in allowed:
                self.add(f"{where}: unknown key {key!r}")
        return True

    def raise_if_any(self) -> None:
        if self.items:
            raise ScenarioError(self.items)


def _resolve_profile(
    spec: Any, kind: str, where: str, base_dir: Path, grid: TimeGrid, problems: _Problems
) -> Profile | None:
    if spec is None:
        problems.add(f"{where}: missing required section")
        return None
    if not problems.check_keys(spec, {"file", "segments", "irradiance"}, where):
        return None
    sources = [k for k in ("file", "segments", "irradiance") if k in spec]
    if kind == "base_load" and "irradiance" in spec:
        problems.add(f"{where}: irradiance input is only valid for pv")
        return None
    if len(sources) != 1:
        problems.add(f"{where}: exactly one of file/segments{'/irradiance' if kind == 'pv_production' else ''} required")
        return None
    try:
        if "file" in spec:
            return load_profile(base_dir / str(spec["file"]), kind, grid)
        if "segments" in spec:
            if not isinstance(spec["segments"], list):
                problems.add(f"{where}.segments: expected a list of segments")
                return None
            segments = []
            for k, seg in enumerate(spec["segments"]):
                if not problems.check_keys(seg, {"start", "end", "kw"}, f"{where}.segments[{k}]"):
                    return None
                if not all(key in seg for key in ("start", "end", "kw")):
                    problems.add(f"{where}.segments[{k}]: start, end and kw are required")
                    return None
                segments.append((seg["start"], seg["end"], float(seg["kw"])))
            return synth_profile(kind, segments, grid)
        irr = spec["irradiance"]
        if not problems.check_keys(irr, {"file", "panel_area_m2", "efficiency"}, f"{where}.irradiance"):
            return None
        missing = [k for k in ("file", "panel_area_m2", "efficiency") if k not in irr]
        if missing:
            problems.add(f"{where}.irradiance: missing {', '.join(missing)}")
            return None
        series = _read_series(base_dir / str(irr["file"]), grid)
        return irradiance_to_power(series, float(irr["panel_area_m2"]), float(irr["efficiency"]), grid)
    except (EvParkSimError, TypeError, ValueError, KeyError) as exc:
        problems.add(f"{where}: {exc!r}" if isinstance(exc, KeyError) else f"{where}: {exc}")
        return None


def _resolve_tariff(spec: Any, where: str, base_dir: Path, grid: TimeGrid, problems: _Problems) -> TariffSchedule | None:
    if spec is None:
        spec = {}
    if not problems.check_keys(spec, {"grid_windows", "smp", "smp_file"}, where):
        return None
    if "smp" in spec and "smp_file" in spec:
        problems.add(f"{where}: smp and smp_file are mutually exclusive")
        return None
    try:
        windows = spec.get("grid_windows")
        if windows is None:
            grid_rate = rates_from_windows(DR_PROGRAM_WINDOWS, grid)
        else:
            if not isinstance(windows, list):
                problems.add(f"{where}.grid_windows: expected a list of windows")
                return None
            parsed = []
            for k, w in enumerate(windows):
                if not problems.check_keys(w, {"start", "end", "usd_per_kwh"}, f"{where}.grid_windows[{k}]"):
                    return None
                missing = [key for key in ("start", "end", "usd_per_kwh") if key not in w]
                if missing:
                    problems.add(f"{where}.grid_windows[{k}]: missing {', '.join(missing)}")
                    return None
                parsed.append((w["start"], w["end"], float(w["usd_per_kwh"])))
            grid_rate = rates_from_windows(parsed, grid)
        if "smp_file" in spec:
            pv_rate = tuple(_read_series(base_dir / str(spec["smp_file"]), grid))
        else:
            pv_rate = tuple([float(spec.get("smp", DEFAULT_SMP))] * grid.slots_per_day)
        return TariffSchedule(grid_rate=grid_rate, pv_rate=pv_rate)
    except (EvParkSimError, TypeError, ValueError) as exc:
        problems.add(f"{where}: {exc}")
        return None


_FLEET_KEYS = {"file", "n_evs", "mode_split", "arrival", "departure", "initial_soc", "battery",
               "charge_efficiency", "discharge_efficiency"}
_BATTERY_KEYS = {"capacity_kwh", "target_soc", "soc_min", "soc_max",
                 "charge_efficiency", "discharge_efficiency"}


def _resolve_fleet(
    spec: Any, where: str, base_dir: Path, grid: TimeGrid, seed: int, problems: _Problems
) -> tuple[tuple[EvSpec, ...], FleetConfig | None]:
    if spec is None:
        spec = {}
    if not problems.check_keys(spec, _FLEET_KEYS, where):
        return (), None
    try:
        if "file" in spec:
            extra = set(spec) - {"file", "charge_efficiency", "discharge_efficiency"}
            if extra:
                problems.add(f"{where}: keys {sorted(extra)} not allowed with a fleet file")
                return (), None
            fleet = load_fleet_csv(
                base_dir / str(spec["file"]),
                grid,
                charge_efficiency=float(spec.get("charge_efficiency", 1.0)),
                discharge_efficiency=float(spec.get("discharge_efficiency", 1.0)),
            )
            return tuple(fleet), None

        stray = {"charge_efficiency", "discharge_efficiency"} & set(spec)
        if stray:
            problems.add(
                f"{where}: {sorted(stray)} only apply to a fleet file; "
                "use the battery block for sampled fleets"
            )
            return (), None
        kwargs: dict[str, Any] = {"seed": seed}
        if "n_evs" in spec:
            kwargs["n_evs"] = int(spec["n_evs"])
        if "mode_split" in spec:
            kwargs["mode_split"] = float(spec["mode_split"])
        for block_name, prefix in (("arrival", "arrival"), ("departure", "departure")):
            block = spec.get(block_name)
            if block is None:
                continue
            if not problems.check_keys(block, {"window", "mean", "std_hours"}, f"{where}.{block_name}"):
                return (), None
            if "window" in block:
                window = block["window"]
                if not isinstance(window, (list, tuple)) or len(window) != 2:
                    problems.add(f"{where}.{block_name}.window: expected [start, end]")
                    return (), None
                kwargs[f"{prefix}_window"] = (str(window[0]), str(window[1]))
            if "mean" in block:
                kwargs[f"{prefix}_mean"] = str(block["mean"])
            if "std_hours" in block:
                kwargs[f"{prefix}_std_hours"] = float(block["std_hours"])
        soc_block = spec.get("initial_soc")
        if soc_block is not None:
            if not problems.check_keys(soc_block, {"mean", "std"}, f"{where}.initial_soc"):
                return (), None
            if "mean" in soc_block:
                kwargs["soc_mean"] = float(soc_block["mean"])
            if "std" in soc_block:
                kwargs["soc_std"] = float(soc_block["std"])
        battery = spec.get("battery")
        if battery is not None:
            if not problems.check_keys(battery, _BATTERY_KEYS, f"{where}.battery"):
                return (), None
            for key in _BATTERY_KEYS:
                if key in battery:
                    kwargs[key] = float(battery[key])
        config = FleetConfig(**kwargs)
        return tuple(sample_fleet(config, grid)), config
    except (EvParkSimError, TypeError, ValueError) as exc:
        problems.add(f"{where}: {exc}")
        return (), None


_TOP_KEYS = {"seed", "time", "base_load", "pv", "tariff", "fleet", "policy",
             "accounting", "grid_cap_kw", "output_dir"}
_POLICY_KEYS = {"method", "flag_power", "flag_power_kw", "urgency_margin"}


def load_scenario(
    path: str | Path,
    seed: int | None = None,
    method: str | None = None,
    flag_power: str | float | None = None,
    accounting: str | None = None,
) -> ScenarioConfig:
    """Load, validate and resolve a scenario file.

    The keyword arguments override the corresponding file values (used by
    the command-line tool).  Every problem found is collected and raised
    in a single ScenarioError.
    """
    path = Path(path)
    base_dir = path.parent
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    except Exception as exc:  # yaml parse errors
        raise ScenarioError(f"{path}: not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    problems = _Problems()
    if not problems.check_keys(raw, _TOP_KEYS, str(path)):
        problems.raise_if_any()

    grid = DEFAULT_GRID
    time_block = raw.get("time")
    if time_block is not None:
        if problems.check_keys(time_block, {"slots_per_day"}, "time"):
            try:
                grid = TimeGrid(int(time_block.get("slots_per_day", 96)))
            except (EvParkSimError, ValueError) as exc:
                problems.add(f"time: {exc}")

    if seed is None:
        try:
            seed = int(raw.get("seed", 0))
        except (TypeError, ValueError):
            problems.add(f"seed: expected an integer, got {raw.get('seed')!r}")
            seed = 0
    base_load = _resolve_profile(raw.get("base_load"), "base_load", "base_load", base_dir, grid, problems)
    pv = _resolve_profile(raw.get("pv"), "pv_production", "pv", base_dir, grid, problems)
    tariff = _resolve_tariff(raw.get("tariff"), "tariff", base_dir, grid, problems)
    fleet, fleet_config = _resolve_fleet(raw.get("fleet"), "fleet", base_dir, grid, seed, problems)

    policy_block = raw.get("policy") or {}
    policy = None
    if problems.check_keys(policy_block, _POLICY_KEYS, "policy"):
        method_name = method if method is not None else policy_block.get("method", "proposed")
        try:
            chosen_method = Method(method_name)
        except ValueError:
            problems.add(f"policy.method: unknown method {method_name!r}")
            chosen_method = Method.PROPOSED
        if "flag_power" in policy_block and "flag_power_kw" in policy_block:
            problems.add("policy: flag_power and flag_power_kw are mutually exclusive")
        raw_flag: Any = policy_block.get("flag_power", policy_block.get("flag_power_kw", "auto"))
        if flag_power is not None:
            raw_flag = flag_power
        flag_value: float | None = None
        if isinstance(raw_flag, str):
            if raw_flag.strip().lower() == "auto":
                if base_load is not None and pv is not None:
                    flag_value = default_flag_power(base_load, pv)
            else:
                try:
                    flag_value = float(raw_flag)
                except ValueError:
                    problems.add(f"policy.flag_power: expected a number or 'auto', got {raw_flag!r}")
        else:
            try:
                flag_value = float(raw_flag)
            except (TypeError, ValueError):
                problems.add(f"policy.flag_power: expected a number or 'auto', got {raw_flag!r}")
        try:
            margin = int(policy_block.get("urgency_margin", 0))
            if flag_value is not None:
                policy = PolicyParams(
                    method=chosen_method, flag_power_kw=flag_value, urgency_margin=margin
                )
        except (EvParkSimError, ValueError) as exc:
            problems.add(f"policy: {exc}")

    accounting_name = accounting if accounting is not None else raw.get("accounting", "offset_and_sell")
    try:
        accounting_mode = AccountingMode(accounting_name)
    except ValueError:
        problems.add(f"accounting: unknown mode {accounting_name!r}")
        accounting_mode = AccountingMode.OFFSET_AND_SELL

    grid_cap = raw.get("grid_cap_kw")
    if grid_cap is not None:
        try:
            grid_cap = float(grid_cap)
            if grid_cap <= 0:
                problems.add(f"grid_cap_kw: must be positive, got {grid_cap}")
        except (TypeError, ValueError):
            problems.add(f"grid_cap_kw: expected a number, got {grid_cap!r}")
            grid_cap = None

    problems.raise_if_any()
    assert base_load is not None and pv is not None and tariff is not None and policy is not None
    return ScenarioConfig(
        grid=grid,
        base_load=base_load,
        pv=pv,
        tariff=tariff,
        fleet=fleet,
        policy=policy,
        accounting=accounting_mode,
        grid_cap_kw=grid_cap,
        seed=seed,
        output_dir=raw.get("output_dir"),
        fleet_config=fleet_config,
    )


def with_policy(scenario: ScenarioConfig, **changes: Any) -> ScenarioConfig:
    """Scenario with selected policy fields replaced (pure)."""
    return replace(scenario, policy=replace(scenario.policy, **changes))
