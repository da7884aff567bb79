"""Fleet sampling: determinism, window containment, stats, CSV round-trip."""

from __future__ import annotations

import numpy as np
import pytest

from evparksim import (
    DegenerateWindowError,
    FleetConfig,
    ScenarioError,
    load_fleet_csv,
    sample_fleet,
    sample_truncated_normal,
    validate_fleet,
    write_fleet_csv,
)
from tests.conftest import make_ev


class TestTruncatedNormal:
    def test_draws_inside_bounds(self):
        rng = np.random.default_rng(7)
        draws = [sample_truncated_normal(15, 5, 0, 80, rng) for _ in range(2000)]
        assert all(0 <= x <= 80 for x in draws)

    def test_statistical_mean(self):
        rng = np.random.default_rng(123)
        draws = np.array([sample_truncated_normal(15, 5, 0, 80, rng) for _ in range(100_000)])
        # truncation at 3 sigma shifts the mean by well under 0.1
        assert abs(draws.mean() - 15.0) < 0.1

    def test_degenerate_variance_limit(self):
        rng = np.random.default_rng(1)
        draws = [sample_truncated_normal(15, 1e-9, 0, 80, rng) for _ in range(100)]
        assert all(abs(x - 15) < 1e-6 for x in draws)

    def test_unreachable_window_refused(self):
        rng = np.random.default_rng(1)
        with pytest.raises(DegenerateWindowError):
            sample_truncated_normal(0, 1, 50, 60, rng)

    def test_deterministic_stream(self):
        a = np.random.default_rng(99)
        b = np.random.default_rng(99)
        for _ in range(50):
            assert sample_truncated_normal(15, 5, 0, 80, a) == sample_truncated_normal(15, 5, 0, 80, b)


class TestSampleFleet:
    def test_identical_for_identical_seed(self):
        config = FleetConfig(n_evs=50, seed=42)
        assert sample_fleet(config) == sample_fleet(config)

    def test_window_containment(self):
        fleet = sample_fleet(FleetConfig(n_evs=300, seed=3))
        for ev in fleet:
            assert 60 <= ev.arrival_slot < 84  # 15:00-21:00
            assert 29 <= ev.departure_slot < 54  # 07:20-13:20

    def test_mode_split_exact(self):
        fleet = sample_fleet(FleetConfig(n_evs=10, mode_split=0.5, seed=1))
        assert [ev.mode.label for ev in fleet] == ["M2"] * 5 + ["M1"] * 5

    def test_mode_split_ceil(self):
        fleet = sample_fleet(FleetConfig(n_evs=5, mode_split=0.5, seed=1))
        assert sum(ev.mode.label == "M2" for ev in fleet) == 3

    def test_all_sampled_specs_valid(self):
        fleet = sample_fleet(FleetConfig(n_evs=200, seed=11))
        assert validate_fleet(fleet) == []

    def test_seed_changes_fleet(self):
        baseline = sample_fleet(FleetConfig(n_evs=5, seed=0))
        differing = 0
        for seed in range(1, 101):
            other = sample_fleet(FleetConfig(n_evs=5, seed=seed))
            if other != baseline:
                differing += 1
        assert differing == 100

    def test_bad_config_rejected(self):
        with pytest.raises(ScenarioError):
            sample_fleet(FleetConfig(n_evs=0))

    def test_colliding_windows_resample_then_error(self):
        # arrival and departure forced into the same slot: unsatisfiable
        config = FleetConfig(
            n_evs=1,
            arrival_window=("10:00", "10:15"),
            departure_window=("10:00", "10:15"),
            arrival_mean="10:05",
            departure_mean="10:05",
            arrival_std_hours=0.05,
            departure_std_hours=0.05,
            seed=1,
        )
        with pytest.raises(ScenarioError, match="collide"):
            sample_fleet(config)


class TestValidateFleet:
    def test_constructed_violation_initial_soc(self):
        bad = make_ev(id="evX", soc=90.0)
        violations = validate_fleet([bad])
        assert len(violations) == 1
        assert "evX" in violations[0] and "initial_soc" in violations[0]

    def test_constructed_violation_soc_min(self):
        bad = make_ev(id="evY", soc_min=85.0, target_soc=80.0, soc_max=90.0)
        violations = validate_fleet([bad])
        assert any("evY" in v and "soc_min" in v for v in violations)

    def test_duplicate_ids_flagged(self):
        fleet = [make_ev(id="dup"), make_ev(id="dup")]
        assert any("duplicate" in v for v in validate_fleet(fleet))


class TestFleetCsv:
    def test_round_trip_exact(self, tmp_path):
        fleet = sample_fleet(FleetConfig(n_evs=25, seed=5))
        path = tmp_path / "fleet.csv"
        write_fleet_csv(fleet, path)
        assert load_fleet_csv(path) == fleet

    def test_same_seed_same_bytes(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            write_fleet_csv(sample_fleet(FleetConfig(n_evs=50, seed=1)), tmp_path / name)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,capacity\nev0,64\n")
        with pytest.raises(ScenarioError, match="header"):
            load_fleet_csv(path)

    def test_invalid_rows_collected(self, tmp_path):
        fleet = [make_ev(id="ok")]
        path = tmp_path / "fleet.csv"
        write_fleet_csv(fleet, path)
        text = path.read_text().replace("M1", "M9")
        path.write_text(text)
        with pytest.raises(ScenarioError, match="M9"):
            load_fleet_csv(path)
