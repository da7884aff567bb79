"""Switching policy: threshold rule, deadline override, baselines."""

from __future__ import annotations

import numpy as np
import pytest

from evparksim import (
    Action,
    EvState,
    MODE_M2,
    Method,
    PolicyParams,
    Profile,
    decide_switches,
    default_flag_power,
    required_charge_slots,
    simulate,
    slots_to_departure,
)
from tests.conftest import const_profile, make_ev, make_scenario, random_scenario


class TestDefaultFlagPower:
    def test_constant_profiles(self):
        base = const_profile("base_load", 100.0)
        pv = const_profile("pv_production", 0.0)
        assert default_flag_power(base, pv) == 100.0

    def test_alternating_profile(self):
        values = tuple(50.0 if s % 2 == 0 else 150.0 for s in range(96))
        base = Profile("base_load", values)
        assert default_flag_power(base, const_profile("pv_production", 0.0)) == 100.0

    def test_pv_cancels_base(self):
        base = const_profile("base_load", 100.0)
        pv = const_profile("pv_production", 100.0)
        assert default_flag_power(base, pv) == 0.0

    def test_length_mismatch(self):
        from evparksim import InputError

        with pytest.raises(InputError):
            default_flag_power(Profile("base_load", (1.0,)), const_profile("pv_production", 0.0))


class TestRequiredChargeSlots:
    def test_already_at_target(self):
        state = EvState(make_ev(soc=80.0), 80.0)
        assert required_charge_slots(state) == 0

    def test_slow_mode(self):
        # 41.6 kWh deficit at 1.75 kWh per slot
        state = EvState(make_ev(soc=15.0), 15.0)
        assert required_charge_slots(state) == 24

    def test_fast_mode(self):
        # 41.6 kWh deficit at 4.8 kWh per slot
        state = EvState(make_ev(mode=MODE_M2, soc=15.0), 15.0)
        assert required_charge_slots(state) == 9

    def test_efficiency_raises_requirement(self):
        spec = make_ev(soc=15.0, charge_efficiency=0.5)
        assert required_charge_slots(EvState(spec, 15.0)) == 48


def _decide_one(params, spec, soc, slot, base, pv):
    decisions = decide_switches(params, [EvState(spec, soc)], slot, base, pv)
    assert len(decisions) == 1
    return decisions[0]


class TestDecideSwitches:
    def test_discharge_period(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=0, departure=90, soc=50.0)
        decision = _decide_one(PolicyParams(Method.PROPOSED, 120.0), spec, 50.0, 10, base, pv)
        assert decision.action is Action.DISCHARGE
        assert not decision.forced_by_deadline

    def test_charge_period(self):
        base = const_profile("base_load", 100.0)
        pv = const_profile("pv_production", 80.0)
        spec = make_ev(arrival=0, departure=90, soc=50.0)
        decision = _decide_one(PolicyParams(Method.PROPOSED, 120.0), spec, 50.0, 10, base, pv)
        assert decision.action is Action.CHARGE

    def test_deadline_forces_charge_in_discharge_period(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=0, departure=24, soc=15.0)  # 24 slots parked, 24 required
        decision = _decide_one(PolicyParams(Method.PROPOSED, 120.0), spec, 15.0, 0, base, pv)
        assert decision.action is Action.CHARGE
        assert decision.forced_by_deadline

    def test_discharge_demoted_when_target_would_strand(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        # 25 slots parked, 24 required: one discharge step would need 25 > 24 left
        spec = make_ev(arrival=0, departure=25, soc=15.0, soc_min=10.0)
        decision = _decide_one(PolicyParams(Method.PROPOSED, 120.0), spec, 15.0, 0, base, pv)
        assert decision.action is Action.IDLE

    def test_soc_guards(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=0, departure=90)
        at_floor = _decide_one(PolicyParams(Method.PROPOSED, 120.0), spec, 20.0, 10, base, pv)
        assert at_floor.action is Action.IDLE
        charged = _decide_one(PolicyParams(Method.PROPOSED, 300.0), spec, 80.0, 10, base, pv)
        assert charged.action is Action.IDLE

    def test_unparked_is_idle(self):
        base = const_profile("base_load", 100.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=72, departure=90, soc=15.0)
        decision = _decide_one(PolicyParams(Method.UNCONTROLLED, 0.0), spec, 15.0, 10, base, pv)
        assert decision.action is Action.IDLE

    def test_scheduling_only_never_discharges(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=0, departure=90, soc=50.0)
        decision = _decide_one(PolicyParams(Method.SCHEDULING_ONLY, 120.0), spec, 50.0, 10, base, pv)
        assert decision.action is Action.IDLE

    def test_uncontrolled_charges_below_target(self):
        base = const_profile("base_load", 200.0)
        pv = const_profile("pv_production", 0.0)
        spec = make_ev(arrival=0, departure=90, soc=79.0)
        decision = _decide_one(PolicyParams(Method.UNCONTROLLED, 0.0), spec, 79.0, 10, base, pv)
        assert decision.action is Action.CHARGE
        done = _decide_one(PolicyParams(Method.UNCONTROLLED, 0.0), spec, 80.0, 10, base, pv)
        assert done.action is Action.IDLE

    def test_decisions_over_random_states_respect_guards(self):
        rng = np.random.default_rng(17)
        base = const_profile("base_load", 150.0)
        pv = const_profile("pv_production", 0.0)
        for _ in range(300):
            spec = make_ev(
                arrival=int(rng.integers(0, 96)),
                departure=int(rng.integers(0, 96)),
                soc=0.0,
                soc_min=10.0,
            )
            if spec.arrival_slot == spec.departure_slot:
                continue
            soc = float(rng.uniform(0.0, 80.0))
            params = PolicyParams(Method.PROPOSED, float(rng.uniform(0.0, 300.0)))
            decision = _decide_one(params, spec, soc, int(rng.integers(0, 96)), base, pv)
            if decision.action is Action.CHARGE:
                assert soc < spec.soc_max
            if decision.action is Action.DISCHARGE:
                assert soc > spec.soc_min


class TestSlotsToDeparture:
    def test_counts_down_over_interval(self):
        spec = make_ev(arrival=90, departure=6)  # 12 slots across midnight
        assert slots_to_departure(spec, 90) == 12
        assert slots_to_departure(spec, 0) == 6
        assert slots_to_departure(spec, 5) == 1
        assert slots_to_departure(spec, 6) == 0
        assert slots_to_departure(spec, 50) == 0


class TestMethodProperties:
    def test_subsumption_with_infinite_flag(self):
        rng = np.random.default_rng(5)
        from evparksim import results_equivalent
        from evparksim.ingest import with_policy

        for _ in range(10):
            scenario = with_policy(random_scenario(rng, max_evs=12), flag_power_kw=1e9)
            proposed = simulate(scenario, scenario.fleet, Method.PROPOSED)
            scheduled = simulate(scenario, scenario.fleet, Method.SCHEDULING_ONLY)
            assert results_equivalent(proposed, scheduled)

    def test_uncontrolled_front_loading(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            scenario = random_scenario(rng, max_evs=15)
            result = simulate(scenario, scenario.fleet, Method.UNCONTROLLED)
            for j, ev in enumerate(scenario.fleet):
                duration = ev.parked_duration()
                codes = [
                    result.actions[(ev.arrival_slot + p) % 96, j] for p in range(duration)
                ]
                charging = [c == 0 for c in codes]
                if False in charging:
                    first_idle = charging.index(False)
                    assert not any(charging[first_idle:]), "charging must be a contiguous prefix"
                assert 2 not in codes  # never discharges

    def test_negative_infinite_flag_charges_only_when_forced(self):
        scenario = make_scenario(
            fleet=(make_ev(arrival=72, departure=36, soc=15.0),),
        )
        from evparksim.ingest import with_policy

        scenario = with_policy(scenario, flag_power_kw=-1e9)
        result = simulate(scenario, scenario.fleet, Method.PROPOSED)
        charge_mask = result.actions == 0
        assert charge_mask.any()
        assert result.forced[charge_mask].all()
