"""Paired GC-versus-random experiments on synthetic landscapes."""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.config import TuningDefaults
from app.models.results import SimulationRun, TuneReport
from app.services.copula import fit_copula
from app.services.dataset import quantile_filter
from app.services.evaluators import SyntheticEvaluator
from app.services.landscapes import (
    Landscape,
    brute_force,
    collect_source_dataset,
    rank_fraction,
    top_fraction_threshold,
)
from app.services.tuner import Tuner

logger = logging.getLogger(__name__)

TOP_FRACTION = 0.1


def checkpoints(budget: int) -> List[int]:
    """Evaluation counts at which cumulative bests are compared."""
    return sorted({k for k in (1, 5, 10, 20) if k < budget} | {budget})


class Simulator:
    """Runs GC tuning and the random baseline over many seeds."""

    def __init__(
        self,
        landscape: Landscape,
        defaults: Optional[TuningDefaults] = None,
        labels: Sequence[str] = ("SM", "ML", "XL")
    ):
        """
        Initialize simulator.

        Args:
            landscape: Synthetic landscape
            defaults: Tuning knobs
            labels: Target labels to tune
        """
        self.landscape = landscape
        self.defaults = defaults or TuningDefaults()
        self.labels = list(labels)
        self._oracles: Dict[str, np.ndarray] = {
            label: brute_force(landscape, landscape.target(label)) for label in self.labels
        }
        logger.info(f"Simulator initialized on '{landscape.name}' for targets {self.labels}")

    def oracle(self, label: str) -> np.ndarray:
        """Brute-forced objectives of a target."""
        return self._oracles[label]

    def run_seed(
        self,
        seed: int,
        budget: int,
        quantile: float,
        source_evaluations: int
    ) -> List[SimulationRun]:
        """
        Collect source data, fit once, and tune every target both ways.

        Each call builds its own evaluator, so seeds may run concurrently.
        """
        source = collect_source_dataset(self.landscape, evaluations=source_evaluations, seed=seed)
        model = fit_copula(quantile_filter(source, quantile), seed=seed, quantile=quantile)
        tuner = Tuner(SyntheticEvaluator(self.landscape), self.defaults)
        default = self.landscape.default_configuration()

        runs = []
        for label in self.labels:
            target = self.landscape.target(label)
            baseline = self.landscape.objective(default, target)
            gc = tuner.tune(
                None, target, budget, seed=seed, model=model,
                baseline_objective=baseline, predict_budget=True
            )
            rand = tuner.tune_random(
                self.landscape.space, target, budget, seed=seed, baseline_objective=baseline
            )
            # Judge the random baseline at the same predicted budget
            rand = rand.model_copy(update={"predicted_budget": gc.predicted_budget})
            runs.append(SimulationRun(
                seed=seed, label=label, target=target,
                baseline_objective=baseline, gc=gc, random=rand
            ))
        return runs

    def run(
        self,
        seeds: Sequence[int],
        budget: Optional[int] = None,
        quantile: Optional[float] = None,
        source_evaluations: Optional[int] = None,
        workers: Optional[int] = None
    ) -> List[SimulationRun]:
        """
        Run all seeds, concurrently when workers > 1.

        Returns:
            Runs ordered by seed, then target label
        """
        budget = budget or self.defaults.budget
        quantile = quantile or self.defaults.quantile
        source_evaluations = source_evaluations or self.defaults.source_evaluations
        workers = workers or self.defaults.simulate_workers

        results: Dict[int, List[SimulationRun]] = {}
        if workers == 1:
            for seed in seeds:
                results[seed] = self.run_seed(seed, budget, quantile, source_evaluations)
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                future_to_seed = {
                    executor.submit(self.run_seed, seed, budget, quantile, source_evaluations): seed
                    for seed in seeds
                }
                for future in as_completed(future_to_seed):
                    seed = future_to_seed[future]
                    results[seed] = future.result()
                    logger.debug(f"Seed {seed} finished")

        logger.info(f"Simulated {len(seeds)} seed(s) on '{self.landscape.name}'")
        return [run for seed in seeds for run in results[seed]]

    def _strategy_row(self, label: str, reports: List[TuneReport]) -> Dict[str, float]:
        objectives = self.oracle(label)
        threshold = top_fraction_threshold(objectives, TOP_FRACTION)
        firsts = [r.first_objective for r in reports if r.first_objective is not None]
        bests = [r.best_objective for r in reports if r.best_objective is not None]
        predicted = [r.best_at_predicted for r in reports if r.best_at_predicted is not None]
        speedups = [r.speedup for r in reports if r.speedup is not None]
        best_rows = [r.best_row.index for r in reports if r.best_row is not None]

        row = {
            "runs": len(reports),
            "optimum": float(objectives.min()),
            "first_mean": _mean(firsts),
            "first_rank": _mean([rank_fraction(objectives, v) for v in firsts]),
            "first_top10": _mean([float(v <= threshold) for v in firsts]),
            "best_at_predicted": _mean(predicted),
            "best_at_budget": _mean(bests),
            "best_index": _mean(best_rows),
            "speedup": _mean(speedups),
        }
        budget = max(r.budget for r in reports)
        for k in checkpoints(budget):
            values = [r.best_within(k) for r in reports]
            row[f"best_at_{k}"] = _mean([v for v in values if v is not None])
        return row

    def aggregate(self, runs: Sequence[SimulationRun]) -> pd.DataFrame:
        """
        One row per strategy and target.

        Columns cover the first evaluation (mean objective, rank among all
        configurations, share in the top 10%), the best at the predicted and
        full budgets, the mean index of the best evaluation, the speedup over
        the default and the mean cumulative best at fixed checkpoints.
        """
        rows = []
        for label in self.labels:
            selected = [r for r in runs if r.label == label]
            if not selected:
                continue
            for strategy in ("gc", "random"):
                reports = [getattr(r, strategy) for r in selected]
                row = {"strategy": strategy, "target": label, "size": selected[0].target}
                row.update(self._strategy_row(label, reports))
                rows.append(row)
        return pd.DataFrame(rows)


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


def trajectories(runs: Sequence[SimulationRun], strategy: str, seed: int) -> pd.DataFrame:
    """Evaluation rows of one strategy and seed across all targets."""
    frames = []
    for run in runs:
        if run.seed != seed:
            continue
        frame = getattr(run, strategy).evaluations_frame()
        frame.insert(0, "size", run.target)
        frame.insert(0, "target", run.label)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
