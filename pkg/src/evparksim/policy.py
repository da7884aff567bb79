"""Per-slot charge/discharge/idle decisions for parked EVs.

Three methods are supported:

* ``proposed`` — threshold switching: when net load (base load minus PV)
  is below the flag power the whole fleet is in its charging period,
  otherwise in its discharging period, subject to per-EV SoC guards.  A
  departure-deadline override forces charging once the remaining parked
  slots are just enough to reach the target SoC, and discharges that
  would make the target unreachable are demoted to idle.
* ``scheduling_only`` — same charging rule and deadline override, but the
  discharging period always yields idle.
* ``uncontrolled`` — every parked EV below its target charges immediately;
  no discharging.

Decisions are pure functions of (params, EV state, slot, profiles); EVs
never interact, so per-EV decisions may be computed in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InputError
from .model import DEFAULT_GRID, EvSpec, EvState, Profile, TimeGrid, is_parked


class Method(str, Enum):
    PROPOSED = "proposed"
    SCHEDULING_ONLY = "scheduling_only"
    UNCONTROLLED = "uncontrolled"


class Action(str, Enum):
    CHARGE = "charge"
    DISCHARGE = "discharge"
    IDLE = "idle"


# Integer codes shared with the compiled kernels; the order charge < idle
# < discharge is also the exhaustive scheduler's tie-break order.
METHOD_CODES = {Method.PROPOSED: 0, Method.SCHEDULING_ONLY: 1, Method.UNCONTROLLED: 2}
ACTION_CHARGE, ACTION_IDLE, ACTION_DISCHARGE = 0, 1, 2
ACTION_OF_CODE = {
    ACTION_CHARGE: Action.CHARGE,
    ACTION_IDLE: Action.IDLE,
    ACTION_DISCHARGE: Action.DISCHARGE,
}


@dataclass(frozen=True)
class PolicyParams:
    """Method selection plus the net-load threshold that splits the day
    into charging and discharging periods."""

    method: Method = Method.PROPOSED
    flag_power_kw: float = 0.0
    urgency_margin: int = 0  # extra slots of slack before deadline forcing

    def __post_init__(self) -> None:
        if not math.isfinite(self.flag_power_kw):
            raise InputError("flag_power_kw must be finite")
        if self.urgency_margin < 0:
            raise InputError("urgency_margin must be >= 0")


@dataclass(frozen=True)
class SwitchDecision:
    """One EV's action for one slot; charge and discharge are mutually
    exclusive by construction of the single action field."""

    ev_id: str
    action: Action
    forced_by_deadline: bool = False


def default_flag_power(base_load: Profile, pv: Profile) -> float:
    """Mean net load over the day: the default switching threshold."""
    if len(base_load) != len(pv):
        raise InputError(
            f"profile lengths differ: {len(base_load)} vs {len(pv)}"
        )
    total = 0.0
    for b, p in zip(base_load.values, pv.values):
        total += b - p
    return total / len(base_load)


def _required_slots(
    soc: float, target: float, capacity: float, rate: float, eta_ch: float, dt: float
) -> int:
    """Full-rate charging slots needed to lift soc to target (0 if already there)."""
    if soc >= target:
        return 0
    needed_kwh = (target - soc) * 0.01 * capacity
    step_kwh = rate * eta_ch * dt
    return int(math.ceil(needed_kwh / step_kwh))


def required_charge_slots(state: EvState, grid: TimeGrid = DEFAULT_GRID) -> int:
    """Charging slots this EV still needs to reach its target SoC."""
    spec = state.spec
    return _required_slots(
        state.soc,
        spec.target_soc,
        spec.capacity_kwh,
        spec.mode.rate_kw,
        spec.charge_efficiency,
        grid.slot_hours,
    )


def slots_to_departure(spec: EvSpec, slot: int, grid: TimeGrid = DEFAULT_GRID) -> int:
    """Parked slots remaining including the current one; 0 when not parked."""
    offset = (slot - spec.arrival_slot) % grid.slots_per_day
    duration = spec.parked_duration(grid)
    if offset >= duration:
        return 0
    return duration - offset


def decide_core(
    method: Method,
    flag_power: float,
    margin: int,
    soc: float,
    target: float,
    soc_min: float,
    soc_max: float,
    capacity: float,
    rate: float,
    eta_ch: float,
    eta_dch: float,
    dt: float,
    net_load: float,
    remaining: int,
) -> tuple[int, bool]:
    """Decision for one parked EV as (action code, forced_by_deadline).

    This scalar function is the single source of the decision semantics;
    the compiled kernel mirrors it operation for operation.
    """
    if method is Method.UNCONTROLLED:
        return (ACTION_CHARGE, False) if soc < target else (ACTION_IDLE, False)

    required = _required_slots(soc, target, capacity, rate, eta_ch, dt)
    if remaining <= required + margin:
        if soc < soc_max:
            return ACTION_CHARGE, True
        return ACTION_IDLE, False

    if net_load < flag_power:
        if soc < soc_max:
            return ACTION_CHARGE, False
        return ACTION_IDLE, False

    # Discharging period: only the threshold method discharges, only above
    # the SoC floor, and never if one step would strand the target.
    if method is Method.PROPOSED and soc > soc_min:
        drop = 100.0 * rate * dt / (capacity * eta_dch)
        after = soc - drop
        if after < soc_min:
            after = soc_min
        required_after = _required_slots(after, target, capacity, rate, eta_ch, dt)
        if required_after <= remaining - 1:
            return ACTION_DISCHARGE, False
    return ACTION_IDLE, False


def decide_switches(
    params: PolicyParams,
    evs: list[EvState],
    slot: int,
    base_load: Profile,
    pv: Profile,
    grid: TimeGrid = DEFAULT_GRID,
) -> list[SwitchDecision]:
    """Decisions for every EV at one slot (idle for EVs not parked)."""
    grid.check_slot(slot)
    if len(base_load) != grid.slots_per_day or len(pv) != grid.slots_per_day:
        raise InputError("profiles do not cover the time grid")
    net = base_load.values[slot] - pv.values[slot]
    dt = grid.slot_hours
    decisions = []
    for state in evs:
        spec = state.spec
        if not is_parked(spec, slot, grid):
            decisions.append(SwitchDecision(spec.id, Action.IDLE))
            continue
        code, forced = decide_core(
            params.method,
            params.flag_power_kw,
            params.urgency_margin,
            state.soc,
            spec.target_soc,
            spec.soc_min,
            spec.soc_max,
            spec.capacity_kwh,
            spec.mode.rate_kw,
            spec.charge_efficiency,
            spec.discharge_efficiency,
            dt,
            net,
            slots_to_departure(spec, slot, grid),
        )
        decisions.append(SwitchDecision(spec.id, ACTION_OF_CODE[code], forced))
    return decisions
