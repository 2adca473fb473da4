"""Tests for paired GC/random simulations on synthetic landscapes."""

import math

import pytest

from app.services.landscapes import get_landscape
from app.services.simulation import Simulator, checkpoints, trajectories


@pytest.fixture(scope="module")
def simulator():
    return Simulator(get_landscape("switch"))


@pytest.fixture(scope="module")
def runs(simulator):
    return simulator.run([4, 5], budget=10, quantile=0.3, source_evaluations=60, workers=1)


class TestCheckpoints:

    def test_default_budget(self):
        assert checkpoints(30) == [1, 5, 10, 20, 30]

    def test_small_budget(self):
        assert checkpoints(5) == [1, 5]
        assert checkpoints(1) == [1]


class TestSimulator:

    def test_runs_ordered_by_seed_then_target(self, runs):
        assert [(r.seed, r.label) for r in runs] == [
            (4, "SM"), (4, "ML"), (4, "XL"), (5, "SM"), (5, "ML"), (5, "XL")
        ]
        assert [r.target for r in runs[:3]] == [400, 800, 1400]

    def test_paired_reports(self, runs):
        for run in runs:
            assert run.gc.strategy == "gc"
            assert run.random.strategy == "random"
            assert len(run.gc.rows) == 10
            assert len(run.random.rows) == 10
            assert run.random.predicted_budget == run.gc.predicted_budget
            assert run.gc.baseline_objective == run.baseline_objective

    def test_concurrent_matches_sequential(self, simulator, runs):
        concurrent = simulator.run([4, 5], budget=10, quantile=0.3, source_evaluations=60, workers=2)
        for left, right in zip(runs, concurrent):
            assert left.gc.evaluations_frame().equals(right.gc.evaluations_frame())
            assert left.random.evaluations_frame().equals(right.random.evaluations_frame())

    def test_aggregate(self, simulator, runs):
        table = simulator.aggregate(runs)
        assert len(table) == 6
        assert list(table["strategy"]) == ["gc", "random"] * 3
        assert set(table["target"]) == {"SM", "ML", "XL"}
        assert {"best_at_1", "best_at_5", "best_at_10"} <= set(table.columns)
        assert (table["runs"] == 2).all()
        assert (table["best_at_budget"] <= table["first_mean"] + 1e-12).all()
        assert (table["optimum"] <= table["best_at_budget"] + 1e-12).all()
        for value in table["first_top10"]:
            assert 0.0 <= value <= 1.0

    def test_aggregate_skips_missing_targets(self, simulator, runs):
        table = simulator.aggregate([r for r in runs if r.label == "ML"])
        assert list(table["target"]) == ["ML", "ML"]

    def test_trajectories(self, runs):
        frame = trajectories(runs, "gc", 5)
        assert len(frame) == 30
        assert list(frame.columns[:3]) == ["target", "size", "index"]
        assert trajectories(runs, "random", 99).empty

    def test_gc_beats_default_away_from_switch_point(self, simulator, runs):
        table = simulator.aggregate(runs)
        rows = table[(table["strategy"] == "gc") & table["target"].isin(["ML", "XL"])]
        assert len(rows) == 2
        assert all(not math.isnan(value) and value > 1.0 for value in rows["speedup"])
