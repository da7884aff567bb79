"""Time-step simulator and scheduler for an EV parking station microgrid.

The package models one circular day of a grid-connected microgrid with a
base load, PV production and a fleet of EVs that can charge or discharge
while parked.  Three power-management methods are provided (threshold
switching with vehicle-to-grid discharge, charge scheduling without
discharge, and uncontrolled charge-on-arrival) together with per-slot
dispatch accounting, an exhaustive schedule oracle for small instances,
seeded fleet generation and a command-line front end.
"""

from ._backend import BACKEND_NAME, available_backends
from .accounting import AccountingMode
from .dispatch import (
    OracleResult,
    SimulationResult,
    SlotDispatch,
    brute_force_schedule,
    dispatch_slot,
    evaluate_schedule,
    objective_cost,
    objective_grid,
    objective_pv,
    results_equivalent,
    simulate,
)
from .errors import (
    DegenerateWindowError,
    EvParkSimError,
    InputError,
    InternalCheckError,
    ScenarioError,
    SearchSpaceError,
)
from .fleet import FleetConfig, load_fleet_csv, sample_fleet, sample_truncated_normal, validate_fleet, write_fleet_csv
from .ingest import (
    ScenarioConfig,
    fixture_scenario_path,
    irradiance_to_power,
    load_profile,
    load_scenario,
    synth_profile,
    write_profile,
)
from .model import (
    DEFAULT_GRID,
    MODE_M1,
    MODE_M2,
    ChargeMode,
    EvSpec,
    EvState,
    Profile,
    TariffSchedule,
    TimeGrid,
    is_parked,
    slot_of_time,
    soc_after,
    tariff_rate,
    time_of_slot,
)
from .policy import (
    Action,
    Method,
    PolicyParams,
    SwitchDecision,
    decide_switches,
    default_flag_power,
    required_charge_slots,
    slots_to_departure,
)

__version__ = "0.1.0"

__all__ = [
    "AccountingMode",
    "Action",
    "BACKEND_NAME",
    "ChargeMode",
    "DEFAULT_GRID",
    "DegenerateWindowError",
    "EvParkSimError",
    "EvSpec",
    "EvState",
    "FleetConfig",
    "InputError",
    "InternalCheckError",
    "MODE_M1",
    "MODE_M2",
    "Method",
    "OracleResult",
    "PolicyParams",
    "Profile",
    "ScenarioConfig",
    "ScenarioError",
    "SearchSpaceError",
    "SimulationResult",
    "SlotDispatch",
    "SwitchDecision",
    "TariffSchedule",
    "TimeGrid",
    "available_backends",
    "brute_force_schedule",
    "decide_switches",
    "default_flag_power",
    "dispatch_slot",
    "evaluate_schedule",
    "fixture_scenario_path",
    "irradiance_to_power",
    "is_parked",
    "load_fleet_csv",
    "load_profile",
    "load_scenario",
    "objective_cost",
    "objective_grid",
    "objective_pv",
    "required_charge_slots",
    "results_equivalent",
    "sample_fleet",
    "sample_truncated_normal",
    "simulate",
    "slot_of_time",
    "slots_to_departure",
    "soc_after",
    "synth_profile",
    "tariff_rate",
    "time_of_slot",
    "validate_fleet",
    "write_fleet_csv",
    "write_profile",
]
