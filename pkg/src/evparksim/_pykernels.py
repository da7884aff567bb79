"""Pure-Python implementations of the two hot kernels.

These are the reference implementations: the trajectory kernel is a
direct composition of the public decision and battery-step functions,
and the exhaustive scheduler calls the shared slot-allocation math.  The
compiled twin in ``_ckernels.pyx`` mirrors both, operation for
operation, and is selected at import when available.
"""

from __future__ import annotations

import math

import numpy as np

from .accounting import COST, GRID_DRAW, allocate_slot
from .model import charge_step, discharge_step
from .policy import (
    ACTION_CHARGE,
    ACTION_DISCHARGE,
    ACTION_IDLE,
    METHOD_CODES,
    _required_slots,
    decide_core,
)

BACKEND_NAME = "python"

_METHOD_OF_CODE = {code: method for method, code in METHOD_CODES.items()}


def compute_trajectories(
    arrival: np.ndarray,
    length: np.ndarray,
    rate: np.ndarray,
    capacity: np.ndarray,
    init_soc: np.ndarray,
    target: np.ndarray,
    soc_min: np.ndarray,
    soc_max: np.ndarray,
    eta_ch: np.ndarray,
    eta_dch: np.ndarray,
    net_load: np.ndarray,
    method_code: int,
    flag_power: float,
    margin: int,
    dt: float,
):
    """Decide and apply every EV's actions over its parked interval.

    Returns (charge_kw, discharge_kw, soc, action, forced, departure_soc)
    where the 2-D arrays are slot-major [slots, n_evs].  ``soc`` holds the
    end-of-slot value while parked and the departure value elsewhere;
    ``action`` holds -1 outside the parked interval.
    """
    n_slots = len(net_load)
    n_evs = len(arrival)
    charge = np.zeros((n_slots, n_evs))
    discharge = np.zeros((n_slots, n_evs))
    soc = np.zeros((n_slots, n_evs))
    action = np.full((n_slots, n_evs), -1, dtype=np.int8)
    forced = np.zeros((n_slots, n_evs), dtype=bool)
    departure = np.zeros(n_evs)
    method = _METHOD_OF_CODE[method_code]

    for i in range(n_evs):
        x = float(init_soc[i])
        start = int(arrival[i])
        parked = int(length[i])
        for p in range(parked):
            s = (start + p) % n_slots
            code, was_forced = decide_core(
                method,
                flag_power,
                margin,
                x,
                float(target[i]),
                float(soc_min[i]),
                float(soc_max[i]),
                float(capacity[i]),
                float(rate[i]),
                float(eta_ch[i]),
                float(eta_dch[i]),
                dt,
                float(net_load[s]),
                parked - p,
            )
            if code == ACTION_CHARGE:
                x, delivered = charge_step(
                    x, float(rate[i]), dt, float(capacity[i]), float(eta_ch[i]), float(soc_max[i])
                )
                charge[s, i] = delivered
            elif code == ACTION_DISCHARGE:
                x, delivered = discharge_step(
                    x, float(rate[i]), dt, float(capacity[i]), float(eta_dch[i]), float(soc_min[i])
                )
                discharge[s, i] = delivered
            action[s, i] = code
            forced[s, i] = was_forced
            soc[s, i] = x
        departure[i] = x
        for p in range(parked, n_slots):
            soc[(start + p) % n_slots, i] = x
    return charge, discharge, soc, action, forced, departure


def brute_force(
    arrival: np.ndarray,
    length: np.ndarray,
    rate: np.ndarray,
    capacity: np.ndarray,
    init_soc: np.ndarray,
    target: np.ndarray,
    soc_min: np.ndarray,
    soc_max: np.ndarray,
    eta_ch: np.ndarray,
    eta_dch: np.ndarray,
    base: np.ndarray,
    pv: np.ndarray,
    grid_rate: np.ndarray,
    pv_rate: np.ndarray,
    dt: float,
    mode_code: int,
    grid_cap: float,
    enforce_target: np.ndarray,
    reverse_order: bool,
):
    """Exhaustive minimum-cost search over per-slot EV actions.

    Enumerates every action assignment that respects SoC bounds,
    parked-only action and (where reachable) the departure target, costs
    each through the shared slot allocation, and keeps the cheapest.
    Ties go to the first schedule found, which under the forward action
    order (charge < idle < discharge) is the lexicographically earliest
    sequence; ``reverse_order`` flips the action order to provide an
    independent enumeration for cross-checking the minimum.

    Returns (best_cost, best_actions[slots, n_evs] int8 with -1 where not
    parked, leaves_evaluated).  best_cost is +inf if nothing is feasible.
    """
    n_slots = len(base)
    n_evs = len(arrival)

    parked_at: list[list[int]] = [[] for _ in range(n_slots)]
    for i in range(n_evs):
        for p in range(int(length[i])):
            parked_at[(int(arrival[i]) + p) % n_slots].append(i)

    origin = next((s for s in range(n_slots) if not parked_at[s]), None)
    if origin is None:
        raise ValueError("no EV-free slot to anchor the enumeration order")

    # In rotation order from an empty slot every parked interval appears
    # contiguously and in temporal order, so per-EV SoC evolves correctly
    # and each slot's total flows are complete before it is priced.
    pos_slot: list[int] = []
    pos_ev: list[int] = []
    pos_last: list[bool] = []
    for k in range(n_slots):
        s = (origin + k) % n_slots
        evs = parked_at[s]
        for j, i in enumerate(evs):
            pos_slot.append(s)
            pos_ev.append(i)
            pos_last.append(j == len(evs) - 1)
    n_pos = len(pos_slot)

    seen: dict[int, int] = {}
    rem_after = []
    for i in pos_ev:
        seen[i] = seen.get(i, 0) + 1
        rem_after.append(int(length[i]) - seen[i])

    const_cost = 0.0
    for s in range(n_slots):
        if not parked_at[s]:
            alloc = allocate_slot(
                0.0, 0.0, float(base[s]), float(pv[s]), float(grid_rate[s]), float(pv_rate[s]), dt, mode_code
            )
            if alloc[GRID_DRAW] > grid_cap + 1e-9:
                # the base load alone breaks the cap: nothing is feasible
                return math.inf, np.full((n_slots, n_evs), -1, dtype=np.int8), 0
            const_cost += alloc[COST]

    order = (ACTION_DISCHARGE, ACTION_IDLE, ACTION_CHARGE) if reverse_order else (
        ACTION_CHARGE, ACTION_IDLE, ACTION_DISCHARGE
    )

    soc = [float(v) for v in init_soc]
    actions = [-1] * n_pos
    best_cost = math.inf
    best_actions: list[int] | None = None
    leaves = 0

    def visit(k: int, partial: float, charge_acc: float, discharge_acc: float) -> None:
        nonlocal best_cost, best_actions, leaves
        if k == n_pos:
            leaves += 1
            if partial < best_cost:
                best_cost = partial
                best_actions = actions.copy()
            return
        s = pos_slot[k]
        i = pos_ev[k]
        last = pos_last[k]
        soc_i = soc[i]
        for code in order:
            if code == ACTION_CHARGE:
                if soc_i >= soc_max[i]:
                    continue
                new_soc, delivered = charge_step(
                    soc_i, float(rate[i]), dt, float(capacity[i]), float(eta_ch[i]), float(soc_max[i])
                )
                d_charge, d_discharge = delivered, 0.0
            elif code == ACTION_IDLE:
                new_soc, d_charge, d_discharge = soc_i, 0.0, 0.0
            else:
                if soc_i <= soc_min[i]:
                    continue
                new_soc, delivered = discharge_step(
                    soc_i, float(rate[i]), dt, float(capacity[i]), float(eta_dch[i]), float(soc_min[i])
                )
                d_charge, d_discharge = 0.0, delivered
            if enforce_target[i] and _required_slots(
                new_soc, float(target[i]), float(capacity[i]), float(rate[i]), float(eta_ch[i]), dt
            ) > rem_after[k]:
                continue
            soc[i] = new_soc
            actions[k] = code
            if last:
                alloc = allocate_slot(
                    charge_acc + d_charge,
                    discharge_acc + d_discharge,
                    float(base[s]),
                    float(pv[s]),
                    float(grid_rate[s]),
                    float(pv_rate[s]),
                    dt,
                    mode_code,
                )
                if alloc[GRID_DRAW] <= grid_cap + 1e-9:
                    visit(k + 1, partial + alloc[COST], 0.0, 0.0)
            else:
                visit(k + 1, partial, charge_acc + d_charge, discharge_acc + d_discharge)
            soc[i] = soc_i
        actions[k] = -1

    visit(0, const_cost, 0.0, 0.0)

    table = np.full((n_slots, n_evs), -1, dtype=np.int8)
    if best_actions is not None:
        for k in range(n_pos):
            table[pos_slot[k], pos_ev[k]] = best_actions[k]
    return best_cost, table, leaves
