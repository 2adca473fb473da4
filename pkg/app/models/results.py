"""Tuning result models."""

import math
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.budget import BudgetEstimate
from app.models.space import Configuration


class EvaluationRow(BaseModel):
    """One evaluation of a tuning run."""

    index: int = Field(..., ge=1, description="1-based evaluation index")
    config: Configuration = Field(..., description="Evaluated configuration")
    objective: Optional[float] = Field(None, description="Objective, None when the evaluation failed")
    error: Optional[str] = Field(None, description="Failure message")
    cumulative_best: Optional[float] = Field(None, description="Best objective so far")
    wall_time: float = Field(default=0.0, ge=0.0, description="Seconds spent evaluating this row")
    elapsed: float = Field(default=0.0, ge=0.0, description="Seconds since the run started, sampling included")

    model_config = ConfigDict(frozen=True)

    @property
    def failed(self) -> bool:
        """Whether the evaluator produced no objective."""
        return self.objective is None


class TuneReport(BaseModel):
    """Trajectory and outcome of one tuning run."""

    strategy: str = Field(..., description="gc or random")
    target: float = Field(..., description="Target task value")
    seed: int = Field(..., description="Run seed")
    budget: int = Field(..., ge=1, description="Evaluation budget")
    quantile: Optional[float] = Field(None, description="Source filtering quantile (gc only)")
    rows: List[EvaluationRow] = Field(default_factory=list, description="Evaluations in order")

    generated: int = Field(default=0, ge=0, description="Raw draws behind the evaluated configurations")
    rejected_repeated: int = Field(default=0, ge=0, description="Draws rejected as repeats")
    saturated: bool = Field(default=False, description="Sampler ran out of new configurations")
    sample_time: float = Field(default=0.0, ge=0.0, description="Seconds spent sampling")

    predicted_budget: Optional[int] = Field(None, description="Model budget k* when defined")
    budget_estimate: Optional[BudgetEstimate] = Field(None, description="Full budget estimate")

    baseline_objective: Optional[float] = Field(None, description="Objective of the untuned baseline")

    @model_validator(mode="after")
    def _check_rows(self) -> "TuneReport":
        if len(self.rows) > self.budget:
            raise ValueError("more evaluations than budget")
        previous = math.inf
        for row in self.rows:
            if row.cumulative_best is not None:
                if row.cumulative_best > previous:
                    raise ValueError("cumulative best must be nonincreasing")
                previous = row.cumulative_best
        return self

    @property
    def successful(self) -> List[EvaluationRow]:
        """Rows with an objective."""
        return [r for r in self.rows if not r.failed]

    @property
    def best_row(self) -> Optional[EvaluationRow]:
        """Earliest row holding the best objective."""
        rows = self.successful
        if not rows:
            return None
        return min(rows, key=lambda r: (r.objective, r.index))

    @property
    def best_objective(self) -> Optional[float]:
        """Best objective found."""
        row = self.best_row
        return row.objective if row else None

    @property
    def best_config(self) -> Optional[Configuration]:
        """Configuration of the best objective."""
        row = self.best_row
        return row.config if row else None

    @property
    def first_objective(self) -> Optional[float]:
        """Objective of the first evaluation."""
        return self.rows[0].objective if self.rows else None

    def best_within(self, evaluations: int) -> Optional[float]:
        """Best objective among the first `evaluations` rows."""
        objectives = [r.objective for r in self.rows[:evaluations] if not r.failed]
        return min(objectives) if objectives else None

    @property
    def best_at_predicted(self) -> Optional[float]:
        """Best objective once the predicted budget is spent."""
        if self.predicted_budget is None:
            return None
        return self.best_within(self.predicted_budget)

    @property
    def speedup(self) -> Optional[float]:
        """Baseline objective over the best objective."""
        if self.baseline_objective is None or not self.best_objective:
            return None
        return self.baseline_objective / self.best_objective

    def evaluations_frame(self) -> pd.DataFrame:
        """Seed-determined per-evaluation table (no wall-clock columns)."""
        records = []
        for row in self.rows:
            record: Dict[str, Union[int, float, str, None]] = {"index": row.index}
            record.update(row.config.as_dict())
            record["objective"] = row.objective
            record["cumulative_best"] = row.cumulative_best
            record["failed"] = row.failed
            records.append(record)
        return pd.DataFrame(records)

    def timings_frame(self) -> pd.DataFrame:
        """Wall-clock table aligned with evaluations_frame."""
        return pd.DataFrame(
            [{"index": r.index, "wall_time": r.wall_time, "elapsed": r.elapsed} for r in self.rows]
        )

    def summary(self) -> Dict[str, Any]:
        """Structured summary without the per-row trajectory."""
        best = self.best_row
        return {
            "strategy": self.strategy,
            "target": self.target,
            "seed": self.seed,
            "budget": self.budget,
            "quantile": self.quantile,
            "evaluations": len(self.rows),
            "failed": len(self.rows) - len(self.successful),
            "best_objective": self.best_objective,
            "best_index": best.index if best else None,
            "best_config": best.config.as_dict() if best else None,
            "first_objective": self.first_objective,
            "baseline_objective": self.baseline_objective,
            "speedup": self.speedup,
            "predicted_budget": self.predicted_budget,
            "best_at_predicted": self.best_at_predicted,
            "budget_estimate": self.budget_estimate.model_dump(mode="json") if self.budget_estimate else None,
            "generated": self.generated,
            "rejected_repeated": self.rejected_repeated,
            "saturated": self.saturated,
            "sample_time": self.sample_time,
        }


class LatencyMeasurement(BaseModel):
    """Cost of generating n unique samples."""

    strategy: str = Field(..., description="gc or random")
    requested: int = Field(..., ge=1, description="Unique samples requested")
    elapsed: float = Field(..., ge=0.0, description="Wall-clock seconds")
    unique: int = Field(..., ge=0, description="Unique samples produced")
    generated: int = Field(..., ge=0, description="Raw draws")
    rejected_repeated: int = Field(..., ge=0, description="Rejected draws")
    saturated: bool = Field(default=False, description="Attempt cap reached")

    model_config = ConfigDict(frozen=True)

    @property
    def repeated_fraction(self) -> float:
        """Share of raw draws rejected."""
        return self.rejected_repeated / self.generated if self.generated else 0.0


class SimulationRun(BaseModel):
    """Paired GC and random runs for one seed and target."""

    seed: int = Field(..., description="Run seed")
    label: str = Field(..., description="Target label (SM, ML, XL)")
    target: float = Field(..., description="Target task value")
    baseline_objective: float = Field(..., description="Objective of the landscape default")
    gc: TuneReport = Field(..., description="Copula-guided run")
    random: TuneReport = Field(..., description="Random baseline run")
