"""Tests for the tuning loop, the random baseline and the speedup helpers."""

import numpy as np
import pytest

from app.core.config import TuningDefaults
from app.core.errors import ConditionError, DatasetError, EvaluatorError, UsageError
from app.models.copula import ConditionSpec
from app.models.results import EvaluationRow, TuneReport
from app.models.space import Configuration
from app.services.copula import GaussianCopula, fit_copula, random_batch
from app.services.evaluators import Evaluator, SyntheticEvaluator
from app.services.landscapes import brute_force, get_landscape, top_fraction_threshold
from app.services.simulation import TOP_FRACTION, Simulator
from app.services.tuner import Tuner, measure_latency, speedup, task_argument, tune, tune_random
from conftest import make_dataset, make_space


class FailingEvaluator(Evaluator):
    """Fails whenever parameter `a` is zero."""

    name = "failing"

    def __init__(self, always: bool = False):
        self.always = always

    def evaluate(self, config, task_value):
        if self.always or config["a"] == 0:
            raise EvaluatorError("benchmark crashed")
        return float(config["a"]) + (0.5 if config["b"] == "x" else 1.0)


def _report(objectives, baseline=None):
    rows = []
    best = None
    for index, value in enumerate(objectives, start=1):
        if value is not None:
            best = value if best is None else min(best, value)
        rows.append(EvaluationRow(
            index=index,
            config=Configuration.from_values(("a",), (index,)),
            objective=value,
            error=None if value is not None else "failed",
            cumulative_best=best
        ))
    return TuneReport(
        strategy="gc", target=800.0, seed=0, budget=max(1, len(rows)), rows=rows,
        baseline_objective=baseline
    )


@pytest.fixture
def tuner(bowl):
    return Tuner(SyntheticEvaluator(bowl))


class TestTaskArgument:

    def test_integral_float(self, bowl):
        assert task_argument(bowl.space, 800.0) == 800
        assert isinstance(task_argument(bowl.space, 800.0), int)

    @pytest.mark.parametrize("value", [99, 2001, 800.5])
    def test_rejected(self, bowl, value):
        with pytest.raises(ConditionError):
            task_argument(bowl.space, value)


class TestTune:

    def test_budget_one(self, tuner, bowl_source):
        report = tuner.tune(bowl_source, 800, budget=1, quantile=0.3, seed=0)
        assert len(report.rows) == 1
        assert report.best_objective == report.first_objective

    def test_budget_zero(self, tuner, bowl_source):
        with pytest.raises(UsageError):
            tuner.tune(bowl_source, 800, budget=0, quantile=0.3, seed=0)

    def test_deterministic(self, bowl, bowl_source):
        first = Tuner(SyntheticEvaluator(bowl)).tune(bowl_source, 800, budget=15, quantile=0.3, seed=7)
        second = Tuner(SyntheticEvaluator(bowl)).tune(bowl_source, 800, budget=15, quantile=0.3, seed=7)
        assert first.evaluations_frame().equals(second.evaluations_frame())

    def test_trajectory_invariants(self, tuner, bowl_model):
        report = tuner.tune(None, 800, budget=30, seed=2, model=bowl_model)
        assert len(report.rows) == 30
        assert len({r.config.key for r in report.rows}) == 30
        bests = [r.cumulative_best for r in report.rows]
        assert all(b <= a for a, b in zip(bests, bests[1:]))
        assert bests[-1] == report.best_objective
        assert report.quantile == 0.3
        assert tuner.evaluator.calls == 30

    def test_single_task_source(self, tuner, bowl_source):
        single = bowl_source.by_task()[200]
        with pytest.raises(DatasetError, match="2 tasks"):
            tuner.tune(single, 800, budget=5, quantile=0.3, seed=0)

    def test_needs_source_or_model(self, tuner):
        with pytest.raises(UsageError):
            tuner.tune(None, 800, budget=5)

    def test_exclude(self, tuner, bowl_model):
        first = tuner.tune(None, 800, budget=10, seed=0, model=bowl_model)
        again = tuner.tune(None, 800, budget=10, seed=0, model=bowl_model, exclude=[r.config for r in first.rows])
        assert not {r.config.key for r in first.rows} & {r.config.key for r in again.rows}

    def test_predicted_budget_recorded(self, tuner, bowl_model):
        report = tuner.tune(None, 800, budget=30, seed=0, model=bowl_model, predict_budget=True)
        assert report.budget_estimate is not None
        if report.budget_estimate.defined:
            assert report.predicted_budget == report.budget_estimate.k_star
        else:
            assert report.predicted_budget is None

    def test_beats_untuned_default(self, bowl, tuner, bowl_model):
        baseline = bowl.objective(bowl.default_configuration(), 800)
        report = tuner.tune(None, 800, budget=30, seed=1, model=bowl_model, baseline_objective=baseline)
        assert report.speedup > 1.0
        assert speedup(report, baseline) == pytest.approx(report.speedup)

    def test_module_function(self, bowl, bowl_source):
        report = tune(bowl_source, bowl.space, 800, 5, 0.3, 0, SyntheticEvaluator(bowl))
        assert report.strategy == "gc"
        assert len(report.rows) == 5

    def test_module_function_checks_space(self, bowl, bowl_source, small_space):
        with pytest.raises(DatasetError):
            tune(bowl_source, small_space, 800, 5, 0.3, 0, SyntheticEvaluator(bowl))

    def test_saturated_model_stops_early(self, small_space):
        rng = np.random.default_rng(0)
        rows = [((int(rng.integers(4)), "xyz"[int(rng.integers(3))]), t, 1.0) for t in (200, 600) for _ in range(30)]
        model = fit_copula(make_dataset(small_space, rows))
        report = Tuner(FailingEvaluator(), TuningDefaults(attempt_factor=50)).tune(
            None, 800, budget=30, seed=0, model=model
        )
        assert report.saturated
        assert len(report.rows) == 12


class TestTuneRandom:

    def test_finds_optimum_when_budget_covers_space(self, small_space):
        report = tune_random(small_space, 800, 12, 0, FailingEvaluator())
        assert len(report.rows) == 12
        assert report.best_objective == 1.5
        assert report.best_config.key == (1, "x")

    def test_failed_rows_kept(self, small_space):
        report = Tuner(FailingEvaluator()).tune_random(small_space, 800, budget=12, seed=0)
        failed = [r for r in report.rows if r.failed]
        assert len(failed) == 3
        assert all(r.error == "benchmark crashed" for r in failed)
        assert report.summary()["failed"] == 3

    def test_all_failed(self, small_space):
        with pytest.raises(EvaluatorError, match="all 4 evaluations failed"):
            Tuner(FailingEvaluator(always=True)).tune_random(small_space, 800, budget=4, seed=0)

    def test_budget_zero(self, small_space):
        with pytest.raises(UsageError):
            Tuner(FailingEvaluator()).tune_random(small_space, 800, budget=0)

    def test_same_batch_as_random_sampler(self, small_space):
        report = Tuner(FailingEvaluator()).tune_random(small_space, 800, budget=6, seed=5)
        batch = random_batch(small_space, 6, seed=5)
        assert [r.config for r in report.rows] == list(batch.configs)


class TestBaseline:

    def test_default_configuration(self, bowl, tuner):
        assert tuner.baseline(bowl.space, 800) == bowl.objective(bowl.default_configuration(), 800)

    def test_no_default(self, tuner):
        space = make_space({"name": "tile_i", "kind": "integer", "lo": 0, "hi": 3})
        assert tuner.baseline(space, 800) is None

    def test_failed_baseline(self, small_space):
        assert Tuner(FailingEvaluator()).baseline(small_space, 800) is None


class TestSpeedup:

    def test_ratio(self):
        assert speedup(_report([4.0, 2.5, 3.0]), 10.0) == pytest.approx(4.0)
        assert _report([4.0, 2.5], baseline=5.0).speedup == pytest.approx(2.0)

    def test_bad_baseline(self):
        with pytest.raises(ValueError):
            speedup(_report([1.0]), 0.0)

    def test_no_success(self):
        with pytest.raises(EvaluatorError):
            speedup(_report([None, None]), 3.0)

    def test_best_within(self):
        report = _report([4.0, None, 2.0, 3.0])
        assert report.best_within(1) == 4.0
        assert report.best_within(3) == 2.0
        assert report.best_row.index == 3


class TestLatency:

    @pytest.fixture(scope="class")
    def wide_model(self):
        space = make_space(*[{"name": f"p{i}", "kind": "integer", "lo": 0, "hi": 99} for i in range(6)])
        rng = np.random.default_rng(1)
        rows = [
            (tuple(int(v) for v in rng.integers(0, 100, size=6)), int(rng.choice([200, 600, 1000])), 1.0)
            for _ in range(300)
        ]
        return fit_copula(make_dataset(space, rows))

    def test_single_sample(self, wide_model):
        sampler = GaussianCopula(wide_model)
        measurement = measure_latency(lambda n, seed: sampler.sample(None, n, seed), n=1)
        assert measurement.unique == 1
        assert measurement.generated == measurement.unique + measurement.rejected_repeated

    def test_gc_within_constant_factor_of_random(self, wide_model):
        cond = ConditionSpec(column="size", value=800)

        def gc(n, seed):
            return GaussianCopula(wide_model).sample(cond, n, seed)

        def rand(n, seed):
            return random_batch(wide_model.space, n, seed)

        gc_time = min(measure_latency(gc, 1000, seed, "gc").elapsed for seed in range(3))
        random_time = min(measure_latency(rand, 1000, seed, "random").elapsed for seed in range(3))
        assert gc_time < 25 * max(random_time, 1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["bowl", "switch", "rugged"], scope="class")
class TestTransferAcceptance:

    @pytest.fixture(scope="class")
    def runs(self, name):
        simulator = Simulator(get_landscape(name), labels=("ML",))
        return simulator, simulator.run(range(50), budget=30, quantile=0.3, workers=4)

    def test_first_evaluation_lands_in_top_decile(self, runs):
        simulator, results = runs
        threshold = top_fraction_threshold(simulator.oracle("ML"), TOP_FRACTION)
        hits = sum(run.gc.first_objective <= threshold for run in results)
        assert hits >= 40

    def test_beats_random_at_full_budget(self, runs):
        _, results = runs
        wins = sum(run.gc.best_objective < run.random.best_objective for run in results)
        assert wins >= 45

    def test_oracle_matches_brute_force(self, runs, name):
        simulator, _ = runs
        landscape = get_landscape(name)
        assert np.array_equal(simulator.oracle("ML"), brute_force(landscape, 800))
