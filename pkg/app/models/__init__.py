"""Data models for CopulaTune."""

from .space import (
    GridSpacing,
    ParameterDef,
    ParameterKind,
    ParameterSpace,
    Configuration,
    RealGrid
)
from .dataset import Dataset, FilterReport, TuningRecord
from .copula import (
    CategoricalMarginal,
    ConditionSpec,
    CopulaModel,
    FitMetadata,
    MarginalTransform,
    NumericMarginal,
    SampleBatch
)
from .budget import BudgetEstimate, BudgetInputs, BudgetReport, ProbabilityPoint
from .results import EvaluationRow, LatencyMeasurement, SimulationRun, TuneReport
from .run import RunConfig, RunMetadata

__all__ = [
    # Space models
    "GridSpacing",
    "ParameterDef",
    "ParameterKind",
    "ParameterSpace",
    "Configuration",
    "RealGrid",

    # Data models
    "Dataset",
    "FilterReport",
    "TuningRecord",

    # Copula models
    "CategoricalMarginal",
    "ConditionSpec",
    "CopulaModel",
    "FitMetadata",
    "MarginalTransform",
    "NumericMarginal",
    "SampleBatch",

    # Budget models
    "BudgetEstimate",
    "BudgetInputs",
    "BudgetReport",
    "ProbabilityPoint",

    # Result models
    "EvaluationRow",
    "LatencyMeasurement",
    "SimulationRun",
    "TuneReport",

    # Run models
    "RunConfig",
    "RunMetadata",
]
