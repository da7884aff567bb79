"""Shared fixtures and randomized-instance builders."""

from __future__ import annotations

import numpy as np
import pytest

from evparksim import (
    AccountingMode,
    DEFAULT_GRID,
    EvSpec,
    FleetConfig,
    MODE_M1,
    MODE_M2,
    Method,
    PolicyParams,
    Profile,
    TariffSchedule,
    default_flag_power,
    fixture_scenario_path,
    load_scenario,
    sample_fleet,
)
from evparksim.ingest import ScenarioConfig


def const_profile(kind: str, value: float, grid=DEFAULT_GRID) -> Profile:
    return Profile(kind, tuple([float(value)] * grid.slots_per_day))


def make_ev(
    id: str = "ev000",
    mode=MODE_M1,
    arrival: int = 72,
    departure: int = 36,
    soc: float = 15.0,
    **kwargs,
) -> EvSpec:
    return EvSpec(
        id=id, mode=mode, arrival_slot=arrival, departure_slot=departure, initial_soc=soc, **kwargs
    )


def make_scenario(
    base: Profile | None = None,
    pv: Profile | None = None,
    tariff: TariffSchedule | None = None,
    fleet: tuple[EvSpec, ...] = (),
    policy: PolicyParams | None = None,
    accounting: AccountingMode = AccountingMode.OFFSET_AND_SELL,
    grid_cap_kw: float | None = None,
    seed: int = 0,
) -> ScenarioConfig:
    base = base if base is not None else const_profile("base_load", 100.0)
    pv = pv if pv is not None else const_profile("pv_production", 0.0)
    return ScenarioConfig(
        grid=DEFAULT_GRID,
        base_load=base,
        pv=pv,
        tariff=tariff if tariff is not None else TariffSchedule(),
        fleet=tuple(fleet),
        policy=policy if policy is not None else PolicyParams(Method.PROPOSED, default_flag_power(base, pv)),
        accounting=accounting,
        grid_cap_kw=grid_cap_kw,
        seed=seed,
        output_dir=None,
    )


def random_profile(rng: np.random.Generator, kind: str, vmax: float, grid=DEFAULT_GRID) -> Profile:
    """Random piecewise-constant profile with 1..8 segments."""
    n_slots = grid.slots_per_day
    n_seg = int(rng.integers(1, 9))
    if n_seg > 1:
        cuts = sorted(rng.choice(np.arange(1, n_slots), size=n_seg - 1, replace=False).tolist())
    else:
        cuts = []
    bounds = [0, *cuts, n_slots]
    values: list[float] = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        level = float(rng.uniform(0.0, vmax))
        if kind == "pv_production" and rng.random() < 0.35:
            level = 0.0
        values.extend([level] * (b - a))
    return Profile(kind, tuple(values))


def random_scenario(rng: np.random.Generator, max_evs: int = 50) -> ScenarioConfig:
    """A randomized full-size scenario for the property suites."""
    base = random_profile(rng, "base_load", 300.0)
    pv = random_profile(rng, "pv_production", 200.0)
    smp = float(rng.uniform(0.03, 0.2))
    tariff = TariffSchedule(pv_rate=tuple([smp] * DEFAULT_GRID.slots_per_day))
    fleet_config = FleetConfig(
        n_evs=int(rng.integers(1, max_evs + 1)),
        seed=int(rng.integers(0, 2**31)),
        mode_split=float(rng.uniform(0.0, 1.0)),
        charge_efficiency=float(rng.uniform(0.85, 1.0)),
        discharge_efficiency=float(rng.uniform(0.85, 1.0)),
    )
    fleet = tuple(sample_fleet(fleet_config))
    if rng.random() < 0.5:
        flag = default_flag_power(base, pv)
    else:
        flag = float(rng.uniform(-50.0, 400.0))
    policy = PolicyParams(Method.PROPOSED, flag, int(rng.integers(0, 3)))
    accounting = list(AccountingMode)[int(rng.integers(0, 3))]
    return ScenarioConfig(
        grid=DEFAULT_GRID,
        base_load=base,
        pv=pv,
        tariff=tariff,
        fleet=fleet,
        policy=policy,
        accounting=accounting,
        grid_cap_kw=None,
        seed=0,
        output_dir=None,
    )


def random_small_instance(rng: np.random.Generator) -> ScenarioConfig:
    """A 1-2 EV, 4-8 slot instance inside the exhaustive oracle's budget."""
    n_evs = int(rng.integers(1, 3))
    max_len = 8 if n_evs == 1 else 7  # keeps 3^total under the oracle limit
    base = random_profile(rng, "base_load", 150.0)
    pv = random_profile(rng, "pv_production", 180.0)
    grid_rate = tuple(float(x) for x in rng.uniform(0.02, 0.3, DEFAULT_GRID.slots_per_day))
    pv_rate = tuple(float(x) for x in rng.uniform(0.02, 0.3, DEFAULT_GRID.slots_per_day))
    fleet = []
    for i in range(n_evs):
        arrival = int(rng.integers(0, DEFAULT_GRID.slots_per_day))
        duration = int(rng.integers(4, max_len + 1))
        soc_min = float(rng.uniform(0.0, 25.0))
        target = float(rng.uniform(soc_min + 10.0, 90.0))
        soc_max = float(rng.uniform(target, 98.0))
        fleet.append(
            EvSpec(
                id=f"ev{i:03d}",
                mode=MODE_M2 if rng.random() < 0.5 else MODE_M1,
                arrival_slot=arrival,
                departure_slot=(arrival + duration) % DEFAULT_GRID.slots_per_day,
                initial_soc=float(rng.uniform(0.0, soc_max)),
                capacity_kwh=float(rng.uniform(8.0, 64.0)),
                target_soc=target,
                soc_min=soc_min,
                soc_max=soc_max,
                charge_efficiency=float(rng.uniform(0.8, 1.0)),
                discharge_efficiency=float(rng.uniform(0.8, 1.0)),
            )
        )
    policy = PolicyParams(Method.PROPOSED, float(rng.uniform(-100.0, 300.0)), int(rng.integers(0, 2)))
    accounting = list(AccountingMode)[int(rng.integers(0, 3))]
    return ScenarioConfig(
        grid=DEFAULT_GRID,
        base_load=base,
        pv=pv,
        tariff=TariffSchedule(grid_rate=grid_rate, pv_rate=pv_rate),
        fleet=tuple(fleet),
        policy=policy,
        accounting=accounting,
        grid_cap_kw=None,
        seed=0,
        output_dir=None,
    )


@pytest.fixture(scope="session")
def fixture_scenario() -> ScenarioConfig:
    return load_scenario(fixture_scenario_path())
