#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths on representative workloads:

* the trajectory kernel on the shipped 50-EV scenario (per full-day
  simulation, all three methods), and
* the exhaustive scheduler on a two-EV, fourteen-position instance.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from evparksim import Method, fixture_scenario_path, load_scenario
from evparksim._backend import available_backends, get_kernels
from evparksim.accounting import ACCOUNTING_CODES
from evparksim.dispatch import _fleet_arrays
from evparksim.policy import METHOD_CODES


def _best_of(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_trajectories(kernels, scenario, repeat: int) -> float:
    arrays = _fleet_arrays(scenario.fleet, scenario.grid)
    net = np.asarray(scenario.base_load.values) - np.asarray(scenario.pv.values)

    def run():
        for method in Method:
            kernels.compute_trajectories(
                arrays["arrival"], arrays["length"], arrays["rate"], arrays["capacity"],
                arrays["init_soc"], arrays["target"], arrays["soc_min"], arrays["soc_max"],
                arrays["eta_ch"], arrays["eta_dch"], net, METHOD_CODES[method],
                scenario.policy.flag_power_kw, scenario.policy.urgency_margin,
                scenario.grid.slot_hours,
            )

    return _best_of(run, repeat)


def bench_oracle(kernels, scenario, fleet, repeat: int) -> float:
    arrays = _fleet_arrays(fleet, scenario.grid)
    enforce = np.ones(len(fleet), dtype=np.uint8)
    args = (
        arrays["arrival"], arrays["length"], arrays["rate"], arrays["capacity"],
        arrays["init_soc"], arrays["target"], arrays["soc_min"], arrays["soc_max"],
        arrays["eta_ch"], arrays["eta_dch"],
        np.asarray(scenario.base_load.values), np.asarray(scenario.pv.values),
        np.asarray(scenario.tariff.grid_rate), np.asarray(scenario.tariff.pv_rate),
        scenario.grid.slot_hours, ACCOUNTING_CODES[scenario.accounting],
        math.inf, enforce, False,
    )
    return _best_of(lambda: kernels.brute_force(*args), repeat)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="best-of repetitions")
    args = parser.parse_args()

    scenario = load_scenario(fixture_scenario_path())
    from evparksim import EvSpec, MODE_M1, MODE_M2

    # High initial SoC keeps most action sequences feasible, so the
    # search actually visits a large share of the 3^14 raw space.
    oracle_fleet = (
        EvSpec(id="a", mode=MODE_M1, arrival_slot=90, departure_slot=2,
               initial_soc=70.0, capacity_kwh=64.0),
        EvSpec(id="b", mode=MODE_M2, arrival_slot=91, departure_slot=1,
               initial_soc=60.0, capacity_kwh=64.0),
    )

    rows = []
    for name in available_backends():
        kernels = get_kernels(name)
        t_sim = bench_trajectories(kernels, scenario, args.repeat)
        t_oracle = bench_oracle(kernels, scenario, oracle_fleet, args.repeat)
        rows.append((name, t_sim, t_oracle))

    print(f"{'backend':<10}{'trajectories (3 methods, 50 EVs)':>36}{'oracle (14 positions)':>26}")
    for name, t_sim, t_oracle in rows:
        print(f"{name:<10}{t_sim * 1e3:>32.3f} ms{t_oracle * 1e3:>23.3f} ms")
    if len(rows) == 2:
        py = next(r for r in rows if r[0] == "python")
        cy = next(r for r in rows if r[0] == "cython")
        print(
            f"speedup   {py[1] / cy[1]:>31.1f} x{py[2] / cy[2]:>23.1f} x"
        )


if __name__ == "__main__":
    main()
