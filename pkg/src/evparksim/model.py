"""Core domain model: time grid, charge modes, EV batteries, tariffs, profiles.

All quantities use kW for power, kWh for energy, $/kWh for prices and
percent (0-100) for state of charge.  A day is a circular sequence of
fixed-length slots; every interval computation is modulo the slot count,
so an EV parked overnight simply wraps past midnight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import InputError

MINUTES_PER_DAY = 24 * 60


@dataclass(frozen=True)
class TimeGrid:
    """Division of one day into equal slots (default: 96 slots of 15 min)."""

    slots_per_day: int = 96

    def __post_init__(self) -> None:
        if self.slots_per_day < 1 or MINUTES_PER_DAY % self.slots_per_day != 0:
            raise InputError(
                f"slots_per_day must divide {MINUTES_PER_DAY} minutes evenly, "
                f"got {self.slots_per_day}"
            )

    @property
    def slot_hours(self) -> float:
        return 24.0 / self.slots_per_day

    @property
    def minutes_per_slot(self) -> int:
        return MINUTES_PER_DAY // self.slots_per_day

    def wrap(self, slot: int) -> int:
        return slot % self.slots_per_day

    def check_slot(self, slot: int) -> int:
        if not 0 <= slot < self.slots_per_day:
            raise InputError(f"slot {slot} out of range 0..{self.slots_per_day - 1}")
        return slot


DEFAULT_GRID = TimeGrid()


def parse_clock(clock: str | float) -> float:
    """Return hours since midnight for an "HH:MM" string or numeric hours.

    "24:00" is accepted as an interval end marker and maps to 24.0.
    """
    if isinstance(clock, str):
        try:
            hh, mm = clock.split(":")
            hours = int(hh) + int(mm) / 60.0
        except ValueError as exc:
            raise InputError(f"bad clock time {clock!r}, expected HH:MM") from exc
        if not 0 <= int(hh) <= 24 or not 0 <= int(mm) < 60:
            raise InputError(f"bad clock time {clock!r}")
    else:
        hours = float(clock)
    if not 0.0 <= hours <= 24.0:
        raise InputError(f"clock time {clock!r} outside 00:00..24:00")
    return hours


def slot_of_time(clock: str | float, grid: TimeGrid = DEFAULT_GRID) -> int:
    """Map a clock time to the slot containing it (floor to slot start)."""
    hours = parse_clock(clock)
    if hours >= 24.0:
        raise InputError("clock time must be strictly before 24:00")
    minutes = hours * 60.0
    return int(minutes // grid.minutes_per_slot)


def time_of_slot(slot: int, grid: TimeGrid = DEFAULT_GRID) -> str:
    """Exact inverse of slot_of_time: the "HH:MM" at which a slot starts."""
    grid.check_slot(slot)
    minutes = slot * grid.minutes_per_slot
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass(frozen=True)
class ChargeMode:
    """A connector rating; discharge rate equals charge rate."""

    label: str
    rate_kw: float

    def __post_init__(self) -> None:
        if self.rate_kw <= 0:
            raise InputError(f"mode {self.label}: rate must be positive")


MODE_M1 = ChargeMode("M1", 7.0)
MODE_M2 = ChargeMode("M2", 19.2)
MODES = {m.label: m for m in (MODE_M1, MODE_M2)}


@dataclass(frozen=True)
class EvSpec:
    """Static parameters of one EV: battery, connector mode, parking interval.

    The parked interval is [arrival_slot, departure_slot) with wraparound:
    departure before arrival means the EV stays past midnight.
    """

    id: str
    mode: ChargeMode
    arrival_slot: int
    departure_slot: int
    initial_soc: float
    capacity_kwh: float = 64.0
    target_soc: float = 80.0
    soc_min: float = 20.0
    soc_max: float = 80.0
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0

    def validate(self, grid: TimeGrid = DEFAULT_GRID) -> list[str]:
        """Return one message per violated invariant (empty when valid)."""
        bad = []
        ev = f"EV {self.id}"
        if self.capacity_kwh <= 0:
            bad.append(f"{ev}: capacity_kwh must be positive")
        if not 0 <= self.initial_soc <= self.soc_max:
            bad.append(f"{ev}: initial_soc {self.initial_soc} outside [0, soc_max={self.soc_max}]")
        if not self.soc_max <= 100:
            bad.append(f"{ev}: soc_max {self.soc_max} above 100")
        if not 0 <= self.soc_min < self.target_soc:
            bad.append(f"{ev}: soc_min {self.soc_min} must lie in [0, target_soc={self.target_soc})")
        if not self.target_soc <= self.soc_max:
            bad.append(f"{ev}: target_soc {self.target_soc} above soc_max {self.soc_max}")
        for name in ("arrival_slot", "departure_slot"):
            s = getattr(self, name)
            if not 0 <= s < grid.slots_per_day:
                bad.append(f"{ev}: {name} {s} out of range")
        if self.arrival_slot == self.departure_slot:
            bad.append(f"{ev}: arrival_slot equals departure_slot")
        for name in ("charge_efficiency", "discharge_efficiency"):
            e = getattr(self, name)
            if not 0 < e <= 1:
                bad.append(f"{ev}: {name} {e} outside (0, 1]")
        return bad

    def parked_duration(self, grid: TimeGrid = DEFAULT_GRID) -> int:
        """Number of slots in the parked interval."""
        return (self.departure_slot - self.arrival_slot) % grid.slots_per_day


@dataclass
class EvState:
    """An EV plus its current state of charge (the only mutable quantity)."""

    spec: EvSpec
    soc: float


def is_parked(spec: EvSpec, slot: int, grid: TimeGrid = DEFAULT_GRID) -> bool:
    """True iff the slot lies in [arrival, departure) under wraparound."""
    grid.check_slot(slot)
    offset = (slot - spec.arrival_slot) % grid.slots_per_day
    return offset < spec.parked_duration(grid)


class SocStep(NamedTuple):
    """Result of one charge/discharge step."""

    soc: float
    delivered_kw: float


def charge_step(
    soc: float, power_kw: float, dt: float, capacity: float, eta: float, soc_max: float
) -> tuple[float, float]:
    """Advance soc by charging at power_kw for dt hours, clamped at soc_max.

    Returns (new_soc, delivered_kw); delivered power is reduced when the
    ceiling truncates the step.
    """
    gain = 100.0 * power_kw * dt * eta / capacity
    headroom = soc_max - soc
    if gain <= headroom:
        new_soc = soc + gain
        # guard the ceiling against the last-ulp rounding of soc + gain
        return (new_soc if new_soc <= soc_max else soc_max), power_kw
    if headroom <= 0.0:
        return soc, 0.0
    return soc_max, headroom * capacity / (100.0 * dt * eta)


def discharge_step(
    soc: float, power_kw: float, dt: float, capacity: float, eta: float, soc_min: float
) -> tuple[float, float]:
    """Advance soc by discharging power_kw for dt hours, floored at soc_min."""
    drop = 100.0 * power_kw * dt / (capacity * eta)
    available = soc - soc_min
    if drop <= available:
        new_soc = soc - drop
        return (new_soc if new_soc >= soc_min else soc_min), power_kw
    if available <= 0.0:
        return soc, 0.0
    return soc_min, available * capacity * eta / (100.0 * dt)


def soc_after(state: EvState, power_kw: float, grid: TimeGrid = DEFAULT_GRID) -> SocStep:
    """State of charge after one slot at signed power (charge > 0).

    Charging is clamped at soc_max and discharging floored at soc_min;
    the actually delivered power is reported alongside so accounting can
    use real rather than requested flows.
    """
    spec = state.spec
    if abs(power_kw) > spec.mode.rate_kw * (1 + 1e-12):
        raise InputError(
            f"EV {spec.id}: |{power_kw}| kW exceeds mode {spec.mode.label} "
            f"rate {spec.mode.rate_kw} kW"
        )
    dt = grid.slot_hours
    if power_kw > 0:
        soc, delivered = charge_step(
            state.soc, power_kw, dt, spec.capacity_kwh, spec.charge_efficiency, spec.soc_max
        )
        return SocStep(soc, delivered)
    if power_kw < 0:
        soc, delivered = discharge_step(
            state.soc, -power_kw, dt, spec.capacity_kwh, spec.discharge_efficiency, spec.soc_min
        )
        return SocStep(soc, delivered)
    return SocStep(state.soc, 0.0)


# Three-tier time-of-use grid tariff: (start, end, $/kWh) clock windows.
DR_PROGRAM_WINDOWS: tuple[tuple[str, str, float], ...] = (
    ("23:00", "09:00", 0.055),
    ("09:00", "10:00", 0.108),
    ("10:00", "12:00", 0.179),
    ("12:00", "13:00", 0.108),
    ("13:00", "17:00", 0.179),
    ("17:00", "23:00", 0.108),
)

DEFAULT_SMP = 0.09  # $/kWh paid for PV energy the microgrid consumes


def rates_from_windows(
    windows: tuple[tuple[str, str, float], ...] | list, grid: TimeGrid = DEFAULT_GRID
) -> tuple[float, ...]:
    """Expand (start, end, rate) clock windows into one rate per slot.

    Windows may wrap midnight; together they must cover the day exactly once.
    """
    rates: list[float | None] = [None] * grid.slots_per_day
    for start, end, rate in windows:
        if rate < 0:
            raise InputError(f"tariff window {start}-{end}: negative rate {rate}")
        s0 = _boundary_slot(start, grid)
        s1 = _boundary_slot(end, grid)
        length = (s1 - s0) % grid.slots_per_day
        if length == 0 and parse_clock(start) != parse_clock(end):
            length = grid.slots_per_day  # the 00:00-24:00 full-day form
        if length == 0:
            raise InputError(f"tariff window {start}-{end} is empty")
        for k in range(length):
            s = (s0 + k) % grid.slots_per_day
            if rates[s] is not None:
                raise InputError(f"tariff windows overlap at slot {s} ({time_of_slot(s, grid)})")
            rates[s] = float(rate)
    missing = [s for s, r in enumerate(rates) if r is None]
    if missing:
        raise InputError(f"tariff windows leave {len(missing)} slots uncovered (first: {missing[0]})")
    return tuple(rates)  # type: ignore[arg-type]


def _boundary_slot(clock: str | float, grid: TimeGrid) -> int:
    """Clock boundary snapped to an exact slot edge ("24:00" maps to slot 0)."""
    minutes = parse_clock(clock) * 60.0
    per = grid.minutes_per_slot
    if abs(minutes / per - round(minutes / per)) > 1e-9:
        raise InputError(f"boundary {clock!r} does not fall on a {per}-minute slot edge")
    return int(round(minutes / per)) % grid.slots_per_day


@dataclass(frozen=True)
class TariffSchedule:
    """Per-slot grid price (time-of-use program) and PV price (market rate)."""

    grid_rate: tuple[float, ...] = field(
        default_factory=lambda: rates_from_windows(DR_PROGRAM_WINDOWS)
    )
    pv_rate: tuple[float, ...] = field(
        default_factory=lambda: tuple([DEFAULT_SMP] * DEFAULT_GRID.slots_per_day)
    )

    def __post_init__(self) -> None:
        if len(self.grid_rate) != len(self.pv_rate):
            raise InputError("grid_rate and pv_rate must have equal length")
        if any(r < 0 for r in self.grid_rate) or any(r < 0 for r in self.pv_rate):
            raise InputError("tariff rates must be non-negative")


def tariff_rate(schedule: TariffSchedule, source: str, slot: int, grid: TimeGrid = DEFAULT_GRID) -> float:
    """Rate in $/kWh for "grid" or "pv" energy during a slot."""
    grid.check_slot(slot)
    if source == "grid":
        return schedule.grid_rate[slot]
    if source == "pv":
        return schedule.pv_rate[slot]
    raise InputError(f"unknown tariff source {source!r}, expected 'grid' or 'pv'")


PROFILE_KINDS = ("base_load", "pv_production")


@dataclass(frozen=True)
class Profile:
    """A per-slot power time series (base load demand or PV production)."""

    kind: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise InputError(f"profile kind {self.kind!r} not one of {PROFILE_KINDS}")
        if any(v < 0 for v in self.values):
            raise InputError(f"{self.kind} profile contains negative values")

    def __len__(self) -> int:
        return len(self.values)

    def check_grid(self, grid: TimeGrid = DEFAULT_GRID) -> "Profile":
        if len(self.values) != grid.slots_per_day:
            raise InputError(
                f"{self.kind} profile has {len(self.values)} slots, expected {grid.slots_per_day}"
            )
        return self
