"""Per-slot power allocation and money accounting.

Merit order: PV serves the base load first, then EV charging; EV
discharge then offsets whatever demand remains; the grid covers the
residual; discharge beyond instantaneous demand is exported.  Only PV the
microgrid actually consumes is purchased (at the PV market rate), and
discharged energy is credited at that same rate.

Because the money formula both credits discharge and lets it displace
grid purchases, two restricted modes are provided to isolate either
effect: ``sell_only`` (credit without grid displacement) and
``offset_only`` (displacement without credit).
"""

from __future__ import annotations

from enum import Enum


class AccountingMode(str, Enum):
    OFFSET_AND_SELL = "offset_and_sell"
    SELL_ONLY = "sell_only"
    OFFSET_ONLY = "offset_only"


ACCOUNTING_CODES = {
    AccountingMode.OFFSET_AND_SELL: 0,
    AccountingMode.SELL_ONLY: 1,
    AccountingMode.OFFSET_ONLY: 2,
}

# Field order of the allocate_slot result tuple.
PV_TO_LOAD, PV_TO_EV, GRID_TO_LOAD, GRID_TO_EV, EXPORT, GRID_DRAW, PV_USED, COST = range(8)


def allocate_slot(
    charge_kw: float,
    discharge_kw: float,
    base_kw: float,
    pv_kw: float,
    grid_rate: float,
    pv_rate: float,
    dt: float,
    mode_code: int,
) -> tuple[float, float, float, float, float, float, float, float]:
    """Allocate one slot's flows and price them.

    Returns (pv_to_load, pv_to_ev, grid_to_load, grid_to_ev, export,
    grid_draw, pv_used, cost).  The compiled kernel reproduces this
    arithmetic operation for operation; keep the two in lockstep.
    """
    pv_to_load = pv_kw if pv_kw < base_kw else base_kw
    spare_pv = pv_kw - pv_to_load
    pv_to_ev = spare_pv if spare_pv < charge_kw else charge_kw
    pv_used = pv_to_load + pv_to_ev
    residual = base_kw + charge_kw - pv_used
    if residual < 0.0:
        residual = 0.0
    if mode_code == 1:  # sell_only: discharge never displaces grid draw
        offset = 0.0
    else:
        offset = discharge_kw if discharge_kw < residual else residual
    grid_need = residual - offset
    if grid_need < 0.0:
        grid_need = 0.0
    unmet_load = base_kw - pv_to_load
    grid_to_load = grid_need if grid_need < unmet_load else unmet_load
    grid_to_ev = grid_need - grid_to_load
    if grid_to_ev < 0.0:
        grid_to_ev = 0.0
    export = discharge_kw - offset
    if export < 0.0:
        export = 0.0
    grid_draw = grid_to_load + grid_to_ev
    pv_used = pv_to_load + pv_to_ev
    if mode_code == 2:  # offset_only: discharge earns no credit
        cost = (grid_rate * grid_draw + pv_rate * pv_used) * dt
    else:
        cost = (grid_rate * grid_draw + pv_rate * (pv_used - discharge_kw)) * dt
    return (pv_to_load, pv_to_ev, grid_to_load, grid_to_ev, export, grid_draw, pv_used, cost)
