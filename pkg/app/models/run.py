"""Run configuration and provenance models."""

import platform
from datetime import datetime, timezone
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

import app


class RunConfig(BaseModel):
    """Resolved knobs of one CLI run, echoed into its metadata."""

    subcommand: str = Field(..., description="fit, sample, budget, tune, analyze or simulate")
    space: Optional[str] = Field(None, description="Space schema file")
    datasets: List[str] = Field(default_factory=list, description="Source dataset CSV files")
    reference: Optional[str] = Field(None, description="Reference dataset for KL analysis")
    model: Optional[str] = Field(None, description="Model file")
    quantile: float = Field(default=0.30, gt=0.0, le=1.0, description="Filtering quantile")
    target: Optional[float] = Field(None, description="Target task value")
    budget: int = Field(default=30, ge=1, description="Evaluation budget (cap when auto)")
    budget_auto: bool = Field(default=False, description="Use the model-predicted budget")
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0, description="Budget confidence")
    ideal_fraction: float = Field(default=0.01, gt=0.0, lt=1.0, description="Ideal candidate share")
    ideal_count: Optional[int] = Field(None, ge=1, description="Explicit ideal candidate count")
    allowance: float = Field(default=0.05, gt=0.0, lt=1.0, description="Pruned-optimal allowance")
    trials: int = Field(default=10000, ge=1000, description="Draws for the support estimate")
    samples: Optional[int] = Field(None, ge=1, description="Samples requested by `sample`")
    full_space: Optional[int] = Field(None, ge=1, description="|C| given directly to `budget`")
    effective_space: Optional[int] = Field(None, ge=1, description="|C_eff| given directly to `budget`")
    evaluator: Optional[str] = Field(None, description="Evaluator spec (shell or synthetic:<name>)")
    command: Optional[str] = Field(None, description="Shell command template")
    build_command: Optional[str] = Field(None, description="Shell build command template")
    pattern: Optional[str] = Field(None, description="Objective regular expression")
    repeats: int = Field(default=3, ge=1, description="Shell runs per evaluation")
    timeout: float = Field(default=600.0, gt=0.0, description="Shell timeout in seconds")
    baseline_objective: Optional[float] = Field(None, gt=0.0, description="Explicit speedup baseline")
    landscape: Optional[str] = Field(None, description="Synthetic landscape for `simulate`")
    seeds: int = Field(default=3, ge=1, description="Seeds for `simulate`")
    source_evaluations: int = Field(default=200, ge=10, description="Source evaluations per task in `simulate`")
    workers: int = Field(default=4, ge=1, le=64, description="Concurrent seeds in `simulate`")
    strategy: str = Field(default="gc", pattern="^(gc|random)$", description="Tuning strategy for `tune`")
    seed: int = Field(default=0, ge=0, description="Random seed")
    output_dir: str = Field(default="outputs", description="Output directory")

    @field_validator("subcommand")
    @classmethod
    def _known_subcommand(cls, value: str) -> str:
        if value not in {"fit", "sample", "budget", "tune", "analyze", "simulate"}:
            raise ValueError(f"unknown subcommand '{value}'")
        return value


def package_versions() -> Dict[str, str]:
    """Versions of the interpreter and the numerical stack."""
    import numpy
    import pandas
    import pydantic
    import scipy

    return {
        "copulatune": app.__version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pandas": pandas.__version__,
        "pydantic": pydantic.VERSION,
    }


class RunMetadata(BaseModel):
    """Everything needed to replay a run."""

    run: RunConfig = Field(..., description="Resolved knobs")
    versions: Dict[str, str] = Field(default_factory=package_versions, description="Software versions")
    started_at: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(),
        description="UTC start time"
    )
    outputs: List[str] = Field(default_factory=list, description="Files written")
