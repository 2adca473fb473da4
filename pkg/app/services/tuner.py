"""Few-shot transfer tuning loop and the uniform random baseline."""

import logging
import math
import time
from typing import Callable, Iterable, List, Optional, Sequence, Union

from app.core.config import TuningDefaults
from app.core.errors import ConditionError, DatasetError, EvaluatorError, UsageError
from app.models.budget import BudgetEstimate
from app.models.copula import ConditionSpec, CopulaModel, SampleBatch
from app.models.dataset import Dataset
from app.models.results import EvaluationRow, LatencyMeasurement, TuneReport
from app.models.space import Configuration, ParameterSpace
from app.services.budget import estimate_budget
from app.services.copula import GaussianCopula, fit_copula, random_batch
from app.services.dataset import quantile_filter
from app.services.evaluators import Evaluator

logger = logging.getLogger(__name__)


def task_argument(space: ParameterSpace, target: Union[int, float]) -> Union[int, float]:
    """
    Canonical task value handed to evaluators.

    Raises:
        ConditionError: Value outside the task domain (or non-integral for
            an integer task feature)
    """
    try:
        return space.task_feature.coerce(target)
    except ValueError as e:
        raise ConditionError(f"target task {target!r}: {e}") from e


def speedup(report: TuneReport, baseline_objective: float) -> float:
    """
    Baseline objective over the best objective of a report.

    Raises:
        ValueError: Non-positive baseline
        EvaluatorError: Report without a successful evaluation
    """
    if baseline_objective <= 0:
        raise ValueError(f"baseline objective must be positive, got {baseline_objective}")
    best = report.best_objective
    if best is None:
        raise EvaluatorError("report holds no successful evaluation")
    return baseline_objective / best


def measure_latency(
    sampler: Callable[[int, int], SampleBatch],
    n: int = 1000,
    seed: int = 0,
    strategy: str = "gc"
) -> LatencyMeasurement:
    """
    Time the generation of n unique samples.

    Args:
        sampler: Callable (n, seed) -> SampleBatch
        n: Unique samples requested
        seed: Sampler seed
        strategy: Label for the measurement

    Returns:
        Wall-clock seconds plus the batch's rejection accounting
    """
    start = time.perf_counter()
    batch = sampler(n, seed)
    elapsed = time.perf_counter() - start
    measurement = LatencyMeasurement(
        strategy=strategy,
        requested=n,
        elapsed=elapsed,
        unique=len(batch.configs),
        generated=batch.generated,
        rejected_repeated=batch.rejected_repeated,
        saturated=batch.saturated
    )
    logger.info(
        f"{strategy} latency: {len(batch.configs)} unique in {elapsed:.3f}s "
        f"({measurement.repeated_fraction:.1%} repeated)"
    )
    return measurement


class Tuner:
    """Runs tuning strategies against one evaluator."""

    def __init__(self, evaluator: Evaluator, defaults: Optional[TuningDefaults] = None):
        """
        Initialize tuner.

        Args:
            evaluator: Objective evaluator
            defaults: Tuning knobs (code defaults if None)
        """
        self.evaluator = evaluator
        self.defaults = defaults or TuningDefaults()
        logger.info(f"Tuner initialized with {evaluator.name} evaluator")

    def baseline(self, space: ParameterSpace, target: Union[int, float]) -> Optional[float]:
        """
        Objective of the space's default configuration, outside any budget.

        Returns:
            None when the space declares no full default or it fails
        """
        config = space.default_configuration()
        if config is None:
            return None
        try:
            value = self.evaluator.evaluate(config, task_argument(space, target))
        except EvaluatorError as e:
            logger.warning(f"Baseline evaluation failed: {e}")
            return None
        logger.info(f"Baseline objective {value:.6g}")
        return value

    def _evaluate_all(
        self,
        configs: Sequence[Configuration],
        task_value: Union[int, float],
        started: float
    ) -> List[EvaluationRow]:
        rows = []
        best = math.inf
        for index, config in enumerate(configs, start=1):
            tick = time.perf_counter()
            objective: Optional[float] = None
            error: Optional[str] = None
            try:
                objective = float(self.evaluator.evaluate(config, task_value))
                if not math.isfinite(objective):
                    raise EvaluatorError(f"non-finite objective {objective}")
            except EvaluatorError as e:
                objective, error = None, str(e)
                logger.warning(f"Evaluation {index} failed: {e}")

            if objective is not None:
                best = min(best, objective)
            now = time.perf_counter()
            rows.append(EvaluationRow(
                index=index,
                config=config,
                objective=objective,
                error=error,
                cumulative_best=best if math.isfinite(best) else None,
                wall_time=now - tick,
                elapsed=now - started
            ))
            logger.debug(f"Evaluation {index}/{len(configs)}: {objective}")

        if rows and all(r.failed for r in rows):
            raise EvaluatorError(f"all {len(rows)} evaluations failed; last error: {rows[-1].error}")
        return rows

    def tune(
        self,
        source: Optional[Dataset],
        target: Union[int, float],
        budget: Optional[int] = None,
        quantile: Optional[float] = None,
        seed: int = 0,
        model: Optional[CopulaModel] = None,
        exclude: Optional[Iterable[Configuration]] = None,
        baseline_objective: Optional[float] = None,
        predict_budget: bool = False
    ) -> TuneReport:
        """
        Filter, fit, condition on the target, sample and evaluate.

        Args:
            source: Prior tuning data over at least 2 tasks (ignored when a
                fitted model is given)
            target: Target task value
            budget: Evaluations (defaults to the configured budget)
            quantile: Filtering quantile (defaults to the configured one)
            seed: Seeds fitting and sampling
            model: Pre-fitted model to sample from
            exclude: Configurations never to propose
            baseline_objective: Objective the speedup is measured against
            predict_budget: Estimate k* from the model and record it

        Returns:
            TuneReport, shorter than budget when the model saturates

        Raises:
            UsageError: budget < 1
            DatasetError: Source data spans fewer than 2 tasks
            EvaluatorError: Every evaluation failed
        """
        budget = self.defaults.budget if budget is None else budget
        quantile = self.defaults.quantile if quantile is None else quantile
        if budget < 1:
            raise UsageError(f"budget must be at least 1, got {budget}")

        if model is None:
            if source is None:
                raise UsageError("tuning needs source data or a fitted model")
            if len(source.task_values()) < 2:
                raise DatasetError("transfer tuning needs source data from at least 2 tasks")
            if quantile < self.defaults.quantile_floor:
                logger.warning(
                    f"Quantile {quantile} is below {self.defaults.quantile_floor}; "
                    "the model may over-specify the space"
                )
            filtered = quantile_filter(source, quantile)
            model = fit_copula(filtered, seed=seed, quantile=quantile)
        else:
            quantile = model.metadata.quantile

        space = model.space
        task_value = task_argument(space, target)
        cond = ConditionSpec(column=space.task_feature.name, value=float(target))
        sampler = GaussianCopula(model, clamp=self.defaults.latent_clamp)

        estimate: Optional[BudgetEstimate] = None
        if predict_budget:
            estimate, _ = estimate_budget(
                model,
                cond,
                trials=self.defaults.support_trials,
                seed=seed,
                ideal_fraction=self.defaults.ideal_fraction,
                allowance=self.defaults.allowance,
                confidence=self.defaults.confidence,
                max_budget=budget
            )

        started = time.perf_counter()
        batch = sampler.sample(cond, budget, seed, exclude=exclude, attempt_factor=self.defaults.attempt_factor)
        sample_time = time.perf_counter() - started
        if batch.saturated:
            logger.warning(f"Model holds only {len(batch.configs)} new configurations; stopping early")

        rows = self._evaluate_all(batch.configs, task_value, started)
        report = TuneReport(
            strategy="gc",
            target=float(target),
            seed=seed,
            budget=budget,
            quantile=quantile,
            rows=rows,
            generated=batch.generated,
            rejected_repeated=batch.rejected_repeated,
            saturated=batch.saturated,
            sample_time=sample_time,
            predicted_budget=estimate.k_star if estimate is not None and estimate.defined else None,
            budget_estimate=estimate,
            baseline_objective=baseline_objective
        )
        logger.info(f"GC tune on task {target}: best {report.best_objective} in {len(rows)} evaluations")
        return report

    def tune_random(
        self,
        space: ParameterSpace,
        target: Union[int, float],
        budget: Optional[int] = None,
        seed: int = 0,
        exclude: Optional[Iterable[Configuration]] = None,
        baseline_objective: Optional[float] = None
    ) -> TuneReport:
        """
        Uniform random baseline with the same dedup and evaluation loop.

        Raises:
            UsageError: budget < 1
        """
        budget = self.defaults.budget if budget is None else budget
        if budget < 1:
            raise UsageError(f"budget must be at least 1, got {budget}")
        task_value = task_argument(space, target)

        started = time.perf_counter()
        batch = random_batch(space, budget, seed, exclude=exclude, attempt_factor=self.defaults.attempt_factor)
        sample_time = time.perf_counter() - started

        rows = self._evaluate_all(batch.configs, task_value, started)
        report = TuneReport(
            strategy="random",
            target=float(target),
            seed=seed,
            budget=budget,
            rows=rows,
            generated=batch.generated,
            rejected_repeated=batch.rejected_repeated,
            saturated=batch.saturated,
            sample_time=sample_time,
            baseline_objective=baseline_objective
        )
        logger.info(f"Random tune on task {target}: best {report.best_objective} in {len(rows)} evaluations")
        return report


def tune(
    source: Dataset,
    space: Optional[ParameterSpace],
    target: Union[int, float],
    budget: int,
    quantile: float,
    seed: int,
    evaluator: Evaluator,
    defaults: Optional[TuningDefaults] = None
) -> TuneReport:
    """Few-shot transfer tuning (see Tuner.tune)."""
    if space is not None and source.space.fingerprint() != space.fingerprint():
        raise DatasetError("source data was loaded against a different space")
    return Tuner(evaluator, defaults).tune(source, target, budget, quantile, seed)


def tune_random(
    space: ParameterSpace,
    target: Union[int, float],
    budget: int,
    seed: int,
    evaluator: Evaluator,
    defaults: Optional[TuningDefaults] = None
) -> TuneReport:
    """Random-baseline tuning (see Tuner.tune_random)."""
    return Tuner(evaluator, defaults).tune_random(space, target, budget, seed)
