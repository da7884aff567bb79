"""Seeded stochastic generation of an EV fleet.

Arrivals are drawn from a truncated normal over an evening home-arrival
window, departures over a morning workplace-arrival window, and initial
state of charge from a truncated normal over [0, soc_max].  The random
stream is a numpy PCG64 generator seeded from the config, so a
(config, seed) pair reproduces the identical fleet on any platform.
Draw order per EV: arrival clock, departure clock (redrawn as a pair on
slot collision), then initial soc.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateWindowError, InputError, ScenarioError
from .model import (
    DEFAULT_GRID,
    MODES,
    EvSpec,
    TimeGrid,
    parse_clock,
    slot_of_time,
)

_MAX_RESAMPLES = 100


@dataclass(frozen=True)
class FleetConfig:
    """Fleet-level sampling parameters; times are "HH:MM" clock strings."""

    n_evs: int = 50
    arrival_window: tuple[str, str] = ("15:00", "21:00")
    departure_window: tuple[str, str] = ("07:20", "13:20")
    arrival_mean: str = "18:00"
    arrival_std_hours: float = 1.5
    departure_mean: str = "10:20"
    departure_std_hours: float = 1.5
    soc_mean: float = 15.0
    soc_std: float = 5.0
    mode_split: float = 0.5  # fraction of the fleet on the fast (M2) connector
    seed: int = 0
    capacity_kwh: float = 64.0
    target_soc: float = 80.0
    soc_min: float = 20.0
    soc_max: float = 80.0
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0

    def validate(self) -> list[str]:
        bad = []
        if self.n_evs < 1:
            bad.append(f"n_evs must be >= 1, got {self.n_evs}")
        for name in ("arrival_std_hours", "departure_std_hours", "soc_std"):
            if getattr(self, name) <= 0:
                bad.append(f"{name} must be positive")
        if not 0 <= self.mode_split <= 1:
            bad.append(f"mode_split {self.mode_split} outside [0, 1]")
        for name in ("arrival_window", "departure_window"):
            lo, hi = getattr(self, name)
            if parse_clock(lo) == parse_clock(hi):
                bad.append(f"{name} is empty")
        if not 0 < self.soc_max <= 100:
            bad.append(f"soc_max {self.soc_max} outside (0, 100]")
        return bad


def _normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def sample_truncated_normal(
    mean: float, std: float, low: float, high: float, rng: np.random.Generator
) -> float:
    """One draw from Normal(mean, std) conditioned on [low, high].

    Rejection sampling; advances the generator state deterministically.
    Raises DegenerateWindowError when the window's mass under the
    untruncated normal is below 1e-6 (rejection would effectively hang).
    """
    if low >= high:
        raise InputError(f"truncation window [{low}, {high}] is empty")
    if std <= 0:
        raise InputError(f"std must be positive, got {std}")
    mass = _normal_cdf((high - mean) / std) - _normal_cdf((low - mean) / std)
    if mass < 1e-6:
        raise DegenerateWindowError(
            f"window [{low}, {high}] has probability {mass:.2e} under "
            f"Normal({mean}, {std}); refusing rejection sampling"
        )
    while True:
        x = float(rng.normal(mean, std))
        if low <= x <= high:
            return x


def _sample_slot_in_window(
    mean_h: float,
    std_h: float,
    window: tuple[str, str],
    rng: np.random.Generator,
    grid: TimeGrid,
) -> int:
    """Draw a clock time in the window and floor it to a slot.

    Windows are half-open in slot terms: a draw landing exactly on the
    window's end clock (probability zero, but possible in float) is
    rejected so the resulting slot always starts strictly inside.
    """
    lo, hi = parse_clock(window[0]), parse_clock(window[1])
    while True:
        h = sample_truncated_normal(mean_h, std_h, lo, hi, rng)
        if h < hi:
            return slot_of_time(h, grid)


def sample_fleet(config: FleetConfig, grid: TimeGrid = DEFAULT_GRID) -> list[EvSpec]:
    """Sample a fleet of EvSpecs; identical (config, seed) gives identical fleets.

    The first ceil(mode_split * n) EVs by index use the fast connector
    (M2), the rest the regular one, so the mode mix is exact rather than
    another random variable.
    """
    problems = config.validate()
    if problems:
        raise ScenarioError(problems)
    rng = np.random.default_rng(config.seed)
    n_fast = math.ceil(config.mode_split * config.n_evs)
    arr_mean = parse_clock(config.arrival_mean)
    dep_mean = parse_clock(config.departure_mean)
    fleet: list[EvSpec] = []
    for i in range(config.n_evs):
        for attempt in range(_MAX_RESAMPLES):
            arrival = _sample_slot_in_window(
                arr_mean, config.arrival_std_hours, config.arrival_window, rng, grid
            )
            departure = _sample_slot_in_window(
                dep_mean, config.departure_std_hours, config.departure_window, rng, grid
            )
            if arrival != departure:
                break
        else:
            raise ScenarioError(
                f"EV ev{i:03d}: arrival and departure slots collide after "
                f"{_MAX_RESAMPLES} resamples; windows too narrow"
            )
        soc = sample_truncated_normal(config.soc_mean, config.soc_std, 0.0, config.soc_max, rng)
        fleet.append(
            EvSpec(
                id=f"ev{i:03d}",
                mode=MODES["M2"] if i < n_fast else MODES["M1"],
                arrival_slot=arrival,
                departure_slot=departure,
                initial_soc=soc,
                capacity_kwh=config.capacity_kwh,
                target_soc=config.target_soc,
                soc_min=config.soc_min,
                soc_max=config.soc_max,
                charge_efficiency=config.charge_efficiency,
                discharge_efficiency=config.discharge_efficiency,
            )
        )
    return fleet


def validate_fleet(fleet: list[EvSpec], grid: TimeGrid = DEFAULT_GRID) -> list[str]:
    """Every violated invariant across the fleet; empty list when valid."""
    violations: list[str] = []
    seen: set[str] = set()
    for spec in fleet:
        if spec.id in seen:
            violations.append(f"EV {spec.id}: duplicate id")
        seen.add(spec.id)
        violations.extend(spec.validate(grid))
    return violations


FLEET_CSV_COLUMNS = (
    "id",
    "capacity_kwh",
    "mode",
    "arrival_slot",
    "departure_slot",
    "initial_soc",
    "target_soc",
    "soc_min",
    "soc_max",
)


def write_fleet_csv(fleet: list[EvSpec], path: str | Path) -> None:
    """Write the fleet in the interchange CSV schema (floats via repr, exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLEET_CSV_COLUMNS)
        for ev in fleet:
            writer.writerow(
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
                ]
            )


def load_fleet_csv(
    path: str | Path,
    grid: TimeGrid = DEFAULT_GRID,
    charge_efficiency: float = 1.0,
    discharge_efficiency: float = 1.0,
) -> list[EvSpec]:
    """Read a fleet CSV; efficiencies are not part of the schema and are
    supplied by the caller (scenario battery settings, default lossless)."""
    path = Path(path)
    problems: list[str] = []
    fleet: list[EvSpec] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FLEET_CSV_COLUMNS:
            raise ScenarioError(
                f"{path}: bad fleet CSV header, expected {','.join(FLEET_CSV_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FLEET_CSV_COLUMNS):
                problems.append(f"{path}:{lineno}: expected {len(FLEET_CSV_COLUMNS)} columns")
                continue
            try:
                mode = MODES.get(row[2])
                if mode is None:
                    raise ValueError(f"unknown mode {row[2]!r}")
                fleet.append(
                    EvSpec(
                        id=row[0],
                        capacity_kwh=float(row[1]),
                        mode=mode,
                        arrival_slot=int(row[3]),
                        departure_slot=int(row[4]),
                        initial_soc=float(row[5]),
                        target_soc=float(row[6]),
                        soc_min=float(row[7]),
                        soc_max=float(row[8]),
                        charge_efficiency=charge_efficiency,
                        discharge_efficiency=discharge_efficiency,
                    )
                )
            except (ValueError, InputError) as exc:
                problems.append(f"{path}:{lineno}: {exc}")
    problems.extend(validate_fleet(fleet, grid))
    if problems:
        raise ScenarioError(problems)
    return fleet
