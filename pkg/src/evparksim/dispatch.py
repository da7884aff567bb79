"""Per-slot power allocation, the simulation loop and the exhaustive oracle.

``simulate`` runs one method over one circular day: every EV's parked
interval is walked from its arrival slot (wrapping midnight where
needed), decisions and delivered powers are accumulated per slot, and
each slot is then allocated and priced.  Decisions never depend on other
EVs, so per-slot totals are complete once every interval has been walked.

``brute_force_schedule`` exhaustively enumerates small instances and is
the test oracle that lower-bounds every policy under the same accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _backend
from .accounting import ACCOUNTING_CODES, AccountingMode, allocate_slot
from .errors import InputError, InternalCheckError, ScenarioError, SearchSpaceError
from .fleet import validate_fleet
from .model import (
    DEFAULT_GRID,
    EvSpec,
    EvState,
    Profile,
    TariffSchedule,
    TimeGrid,
    charge_step,
    discharge_step,
    soc_after,
)
from .policy import (
    ACTION_CHARGE,
    ACTION_DISCHARGE,
    METHOD_CODES,
    Action,
    Method,
    SwitchDecision,
    required_charge_slots,
)

if TYPE_CHECKING:
    from .ingest import ScenarioConfig

BRUTE_FORCE_LIMIT = 10_000_000  # max size of the raw 3^positions space

BALANCE_TOLERANCE_KW = 1e-9


@dataclass(frozen=True)
class SlotDispatch:
    """Resolved power flows and cost for one slot (all powers in kW)."""

    slot: int
    grid_to_load: float
    grid_to_ev: float
    pv_to_load: float
    pv_to_ev: float
    ev_charge_total: float
    ev_discharge_total: float
    export: float
    grid_draw: float
    pv_used: float
    cost: float


def balance_residual(d: SlotDispatch, base_kw: float) -> float:
    """Supply minus demand for one slot; zero up to rounding when valid."""
    supply = d.grid_to_load + d.grid_to_ev + d.pv_to_load + d.pv_to_ev + d.ev_discharge_total
    demand = base_kw + d.ev_charge_total + d.export
    return supply - demand


def dispatch_slot(
    decisions: Sequence[SwitchDecision],
    ev_states: Sequence[EvState],
    base_kw: float,
    pv_kw: float,
    tariffs: TariffSchedule,
    slot: int,
    grid: TimeGrid = DEFAULT_GRID,
    accounting: AccountingMode = AccountingMode.OFFSET_AND_SELL,
    grid_cap_kw: float | None = None,
) -> SlotDispatch:
    """Allocate one slot given the fleet's decisions and current states.

    Delivered (post-clamp) powers are used, so an EV commanded to charge
    at a nearly full battery contributes only the power it can accept.
    """
    grid.check_slot(slot)
    if base_kw < 0 or pv_kw < 0:
        raise InputError(f"slot {slot}: negative profile value")
    if len(decisions) != len(ev_states):
        raise InputError("one decision per EV state required")
    charge_total = 0.0
    discharge_total = 0.0
    for decision, state in zip(decisions, ev_states):
        if decision.ev_id != state.spec.id:
            raise InputError(
                f"decision for {decision.ev_id} does not match EV {state.spec.id}"
            )
        if decision.action is Action.CHARGE:
            charge_total += soc_after(state, state.spec.mode.rate_kw, grid).delivered_kw
        elif decision.action is Action.DISCHARGE:
            discharge_total += soc_after(state, -state.spec.mode.rate_kw, grid).delivered_kw
    fields = allocate_slot(
        charge_total,
        discharge_total,
        base_kw,
        pv_kw,
        tariffs.grid_rate[slot],
        tariffs.pv_rate[slot],
        grid.slot_hours,
        ACCOUNTING_CODES[accounting],
    )
    pv_to_load, pv_to_ev, grid_to_load, grid_to_ev, export, grid_draw, pv_used, cost = fields
    if grid_cap_kw is not None and grid_draw > grid_cap_kw + 1e-9:
        raise ScenarioError(
            f"slot {slot}: grid draw {grid_draw:.3f} kW exceeds cap {grid_cap_kw} kW"
        )
    return SlotDispatch(
        slot=slot,
        grid_to_load=grid_to_load,
        grid_to_ev=grid_to_ev,
        pv_to_load=pv_to_load,
        pv_to_ev=pv_to_ev,
        ev_charge_total=charge_total,
        ev_discharge_total=discharge_total,
        export=export,
        grid_draw=grid_draw,
        pv_used=pv_used,
        cost=cost,
    )


def objective_cost(d: SlotDispatch, tariffs: TariffSchedule, slot: int, grid: TimeGrid = DEFAULT_GRID) -> float:
    """Slot electricity cost in $: grid purchases plus PV purchases net of
    the discharge credit.  Equals ``d.cost`` under the crediting modes."""
    g = tariffs.grid_rate[slot]
    p = tariffs.pv_rate[slot]
    return (
        g * (d.grid_to_load + d.grid_to_ev)
        + p * ((d.pv_to_load + d.pv_to_ev) - d.ev_discharge_total)
    ) * grid.slot_hours


def objective_grid(d: SlotDispatch) -> float:
    """Grid power consumption in kW (to be minimized)."""
    return d.grid_to_load + d.grid_to_ev


def objective_pv(d: SlotDispatch) -> float:
    """Negated PV power put to use, so that smaller means more PV used."""
    return -(d.pv_to_load + d.pv_to_ev)


@dataclass
class SimulationResult:
    """One method's full day: per-slot flows, per-EV trajectories, totals.

    ``soc`` is slot-major [slots, n_evs]: the end-of-slot value while
    parked and the departure value elsewhere.  ``actions`` uses the kernel
    codes (0 charge / 1 idle / 2 discharge, -1 not parked).
    """

    method: str
    slots: list[SlotDispatch]
    soc: np.ndarray
    actions: np.ndarray
    forced: np.ndarray
    ev_ids: tuple[str, ...]
    departure_soc: np.ndarray
    ev_charge_kwh: np.ndarray
    ev_discharge_kwh: np.ndarray
    total_cost_usd: float
    grid_energy_kwh: float
    pv_energy_kwh: float
    discharge_energy_kwh: float
    peak_grid_kw: float

    def verify(self, base_load: Profile, fleet: Sequence[EvSpec], grid: TimeGrid = DEFAULT_GRID) -> list[str]:
        """Re-derive totals and invariants; returns problem messages."""
        problems = []
        dt = grid.slot_hours
        cost = 0.0
        grid_kwh = 0.0
        pv_kwh = 0.0
        dch_kwh = 0.0
        peak = 0.0
        for d in self.slots:
            cost += d.cost
            grid_kwh += d.grid_draw * dt
            pv_kwh += d.pv_used * dt
            dch_kwh += d.ev_discharge_total * dt
            peak = max(peak, d.grid_draw)
            if abs(balance_residual(d, base_load.values[d.slot])) > BALANCE_TOLERANCE_KW:
                problems.append(f"slot {d.slot}: energy balance violated")
        for name, stored, derived in (
            ("total_cost_usd", self.total_cost_usd, cost),
            ("grid_energy_kwh", self.grid_energy_kwh, grid_kwh),
            ("pv_energy_kwh", self.pv_energy_kwh, pv_kwh),
            ("discharge_energy_kwh", self.discharge_energy_kwh, dch_kwh),
            ("peak_grid_kw", self.peak_grid_kw, peak),
        ):
            if stored != derived:
                problems.append(f"{name}: stored {stored!r} != derived {derived!r}")
        for j, spec in enumerate(fleet):
            track = self.soc[:, j]
            if track.min() < -1e-9 or track.max() > spec.soc_max + 1e-9:
                problems.append(f"EV {spec.id}: soc trajectory exits [0, soc_max]")
        return problems


def _fleet_arrays(fleet: Sequence[EvSpec], grid: TimeGrid):
    n = len(fleet)
    out = {
        "arrival": np.zeros(n, dtype=np.int64),
        "length": np.zeros(n, dtype=np.int64),
        "rate": np.zeros(n),
        "capacity": np.zeros(n),
        "init_soc": np.zeros(n),
        "target": np.zeros(n),
        "soc_min": np.zeros(n),
        "soc_max": np.zeros(n),
        "eta_ch": np.zeros(n),
        "eta_dch": np.zeros(n),
    }
    for i, ev in enumerate(fleet):
        out["arrival"][i] = ev.arrival_slot
        out["length"][i] = ev.parked_duration(grid)
        out["rate"][i] = ev.mode.rate_kw
        out["capacity"][i] = ev.capacity_kwh
        out["init_soc"][i] = ev.initial_soc
        out["target"][i] = ev.target_soc
        out["soc_min"][i] = ev.soc_min
        out["soc_max"][i] = ev.soc_max
        out["eta_ch"][i] = ev.charge_efficiency
        out["eta_dch"][i] = ev.discharge_efficiency
    return out


def _allocate_batch(charge_tot, discharge_tot, base, pv, grid_rate, pv_rate, dt, mode_code):
    """Vectorized mirror of accounting.allocate_slot (same op order)."""
    pv_to_load = np.minimum(pv, base)
    pv_to_ev = np.minimum(pv - pv_to_load, charge_tot)
    pv_used = pv_to_load + pv_to_ev
    residual = np.maximum(base + charge_tot - pv_used, 0.0)
    if mode_code == 1:
        offset = np.zeros_like(residual)
    else:
        offset = np.minimum(discharge_tot, residual)
    grid_need = np.maximum(residual - offset, 0.0)
    grid_to_load = np.minimum(grid_need, base - pv_to_load)
    grid_to_ev = np.maximum(grid_need - grid_to_load, 0.0)
    export = np.maximum(discharge_tot - offset, 0.0)
    grid_draw = grid_to_load + grid_to_ev
    pv_used = pv_to_load + pv_to_ev
    if mode_code == 2:
        cost = (grid_rate * grid_draw + pv_rate * pv_used) * dt
    else:
        cost = (grid_rate * grid_draw + pv_rate * (pv_used - discharge_tot)) * dt
    return pv_to_load, pv_to_ev, grid_to_load, grid_to_ev, export, grid_draw, pv_used, cost


def _check_scenario_inputs(scenario: "ScenarioConfig", fleet: Sequence[EvSpec]) -> None:
    grid = scenario.grid
    scenario.base_load.check_grid(grid)
    scenario.pv.check_grid(grid)
    if len(scenario.tariff.grid_rate) != grid.slots_per_day:
        raise ScenarioError("tariff does not cover the time grid")
    problems = validate_fleet(list(fleet), grid)
    for ev in fleet:
        if ev.parked_duration(grid) < 1:
            problems.append(f"EV {ev.id}: parked duration below one slot")
    if problems:
        raise ScenarioError(problems)


def simulate(scenario: "ScenarioConfig", fleet: Sequence[EvSpec], method: Method | str) -> SimulationResult:
    """Run one method over one day; deterministic for identical inputs."""
    method = Method(method)
    grid = scenario.grid
    _check_scenario_inputs(scenario, fleet)
    dt = grid.slot_hours
    base = np.asarray(scenario.base_load.values, dtype=np.float64)
    pv = np.asarray(scenario.pv.values, dtype=np.float64)
    grid_rate = np.asarray(scenario.tariff.grid_rate, dtype=np.float64)
    pv_rate = np.asarray(scenario.tariff.pv_rate, dtype=np.float64)
    arrays = _fleet_arrays(fleet, grid)

    charge, discharge, soc, actions, forced, departure = _backend.compute_trajectories(
        arrays["arrival"],
        arrays["length"],
        arrays["rate"],
        arrays["capacity"],
        arrays["init_soc"],
        arrays["target"],
        arrays["soc_min"],
        arrays["soc_max"],
        arrays["eta_ch"],
        arrays["eta_dch"],
        base - pv,
        METHOD_CODES[method],
        scenario.policy.flag_power_kw,
        scenario.policy.urgency_margin,
        dt,
    )
    charge_tot = charge.sum(axis=1)
    discharge_tot = discharge.sum(axis=1)
    fields = _allocate_batch(
        charge_tot,
        discharge_tot,
        base,
        pv,
        grid_rate,
        pv_rate,
        dt,
        ACCOUNTING_CODES[scenario.accounting],
    )
    pv_to_load, pv_to_ev, grid_to_load, grid_to_ev, export, grid_draw, pv_used, cost = fields
    if scenario.grid_cap_kw is not None:
        over = np.nonzero(grid_draw > scenario.grid_cap_kw + 1e-9)[0]
        if over.size:
            raise ScenarioError(
                f"slot {int(over[0])}: grid draw {grid_draw[over[0]]:.3f} kW "
                f"exceeds cap {scenario.grid_cap_kw} kW"
            )

    slots = [
        SlotDispatch(
            slot=s,
            grid_to_load=float(grid_to_load[s]),
            grid_to_ev=float(grid_to_ev[s]),
            pv_to_load=float(pv_to_load[s]),
            pv_to_ev=float(pv_to_ev[s]),
            ev_charge_total=float(charge_tot[s]),
            ev_discharge_total=float(discharge_tot[s]),
            export=float(export[s]),
            grid_draw=float(grid_draw[s]),
            pv_used=float(pv_used[s]),
            cost=float(cost[s]),
        )
        for s in range(grid.slots_per_day)
    ]
    # Sequential accumulation: tests re-derive totals along the same path.
    total_cost = 0.0
    grid_kwh = 0.0
    pv_kwh = 0.0
    dch_kwh = 0.0
    peak = 0.0
    for d in slots:
        total_cost += d.cost
        grid_kwh += d.grid_draw * dt
        pv_kwh += d.pv_used * dt
        dch_kwh += d.ev_discharge_total * dt
        peak = max(peak, d.grid_draw)

    return SimulationResult(
        method=method.value,
        slots=slots,
        soc=soc,
        actions=actions,
        forced=forced,
        ev_ids=tuple(ev.id for ev in fleet),
        departure_soc=departure,
        ev_charge_kwh=charge.sum(axis=0) * dt,
        ev_discharge_kwh=discharge.sum(axis=0) * dt,
        total_cost_usd=total_cost,
        grid_energy_kwh=grid_kwh,
        pv_energy_kwh=pv_kwh,
        discharge_energy_kwh=dch_kwh,
        peak_grid_kw=peak,
    )


def results_equivalent(a: SimulationResult, b: SimulationResult) -> bool:
    """True when two runs are physically identical (method label ignored)."""
    return (
        a.slots == b.slots
        and a.ev_ids == b.ev_ids
        and np.array_equal(a.soc, b.soc)
        and np.array_equal(a.actions, b.actions)
        and np.array_equal(a.forced, b.forced)
        and np.array_equal(a.departure_soc, b.departure_soc)
        and np.array_equal(a.ev_charge_kwh, b.ev_charge_kwh)
        and np.array_equal(a.ev_discharge_kwh, b.ev_discharge_kwh)
        and a.total_cost_usd == b.total_cost_usd
        and a.grid_energy_kwh == b.grid_energy_kwh
        and a.pv_energy_kwh == b.pv_energy_kwh
        and a.discharge_energy_kwh == b.discharge_energy_kwh
        and a.peak_grid_kw == b.peak_grid_kw
    )


@dataclass(frozen=True)
class OracleResult:
    """Outcome of the exhaustive search."""

    cost: float
    actions: np.ndarray  # [slots, n_evs] kernel codes, -1 where not parked
    leaves: int
    order: str


def brute_force_schedule(
    scenario: "ScenarioConfig",
    fleet: Sequence[EvSpec],
    grid: TimeGrid | None = None,
    action_order: str = "forward",
) -> OracleResult:
    """Minimum-cost action table over all feasible schedules.

    Feasible means: actions only while parked, SoC kept within
    [soc_min, soc_max] (zero-effect charge/discharge at a bound is not
    enumerated), and EVs whose parked duration suffices at arrival must
    reach their target by departure.  Cost uses the same slot allocation
    and accounting as the simulator.  Ties are broken toward the
    lexicographically earliest action sequence, reading slots from the
    first EV-free slot of the day onward and EVs by fleet order, with
    charge < idle < discharge; ``action_order="reverse"`` enumerates in
    the opposite action order as an independent check of the minimum.
    """
    grid = grid or scenario.grid
    if action_order not in ("forward", "reverse"):
        raise InputError(f"action_order must be 'forward' or 'reverse', got {action_order!r}")
    _check_scenario_inputs(scenario, fleet)
    arrays = _fleet_arrays(fleet, grid)
    positions = int(arrays["length"].sum())
    space = 3**positions
    if space > BRUTE_FORCE_LIMIT:
        raise SearchSpaceError(
            f"search space 3^{positions} = {space} exceeds {BRUTE_FORCE_LIMIT}; "
            "the exhaustive oracle only handles small instances"
        )
    dt = grid.slot_hours
    enforce = np.zeros(len(fleet), dtype=np.uint8)
    for i, ev in enumerate(fleet):
        state = EvState(ev, ev.initial_soc)
        enforce[i] = 1 if ev.parked_duration(grid) >= required_charge_slots(state, grid) else 0
    cost, table, leaves = _backend.brute_force(
        arrays["arrival"],
        arrays["length"],
        arrays["rate"],
        arrays["capacity"],
        arrays["init_soc"],
        arrays["target"],
        arrays["soc_min"],
        arrays["soc_max"],
        arrays["eta_ch"],
        arrays["eta_dch"],
        np.asarray(scenario.base_load.values, dtype=np.float64),
        np.asarray(scenario.pv.values, dtype=np.float64),
        np.asarray(scenario.tariff.grid_rate, dtype=np.float64),
        np.asarray(scenario.tariff.pv_rate, dtype=np.float64),
        dt,
        ACCOUNTING_CODES[scenario.accounting],
        math.inf if scenario.grid_cap_kw is None else scenario.grid_cap_kw,
        enforce,
        action_order == "reverse",
    )
    if math.isinf(cost):
        raise ScenarioError("no feasible schedule exists (grid cap too tight?)")
    return OracleResult(cost=cost, actions=table, leaves=leaves, order=action_order)


def evaluate_schedule(
    actions: np.ndarray, scenario: "ScenarioConfig", fleet: Sequence[EvSpec]
) -> float:
    """Cost of an explicit action table, replayed through the public
    battery-step and slot-allocation functions (independent of the search
    kernels; used to audit oracle outputs)."""
    grid = scenario.grid
    n_slots = grid.slots_per_day
    dt = grid.slot_hours
    charge_tot = [0.0] * n_slots
    discharge_tot = [0.0] * n_slots
    for i, ev in enumerate(fleet):
        soc = ev.initial_soc
        for p in range(ev.parked_duration(grid)):
            s = (ev.arrival_slot + p) % n_slots
            code = int(actions[s, i])
            if code == ACTION_CHARGE:
                soc, delivered = charge_step(
                    soc, ev.mode.rate_kw, dt, ev.capacity_kwh, ev.charge_efficiency, ev.soc_max
                )
                charge_tot[s] += delivered
            elif code == ACTION_DISCHARGE:
                soc, delivered = discharge_step(
                    soc, ev.mode.rate_kw, dt, ev.capacity_kwh, ev.discharge_efficiency, ev.soc_min
                )
                discharge_tot[s] += delivered
            elif code == -1:
                raise InternalCheckError(
                    f"action table marks EV {ev.id} unparked at slot {s} inside its interval"
                )
    total = 0.0
    mode_code = ACCOUNTING_CODES[scenario.accounting]
    for s in range(n_slots):
        total += allocate_slot(
            charge_tot[s],
            discharge_tot[s],
            scenario.base_load.values[s],
            scenario.pv.values[s],
            scenario.tariff.grid_rate[s],
            scenario.tariff.pv_rate[s],
            dt,
            mode_code,
        )[-1]
    return total
