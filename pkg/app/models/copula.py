"""Gaussian copula data models."""

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.errors import ModelError
from app.models.space import Configuration, ParameterSpace

MODEL_VERSION = 1


class NumericMarginal(BaseModel):
    """Truncated Gaussian marginal of an integer or gridded real column."""

    kind: Literal["numeric"] = "numeric"
    column: str = Field(..., description="Column name")
    mean: float = Field(..., description="Moment-fit mean")
    std: float = Field(..., gt=0.0, description="Moment-fit standard deviation (floored)")
    lo: float = Field(..., description="Lower truncation bound")
    hi: float = Field(..., description="Upper truncation bound")
    integer: bool = Field(default=False, description="Decode by rounding to the nearest integer")
    points: Optional[Tuple[float, ...]] = Field(
        None,
        description="Grid points a real column decodes onto (None: continuous)"
    )

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_bounds(self) -> "NumericMarginal":
        if not self.lo < self.hi:
            raise ValueError(f"marginal '{self.column}' needs lo < hi")
        return self


class CategoricalMarginal(BaseModel):
    """Frequency-ordered interval encoding of a categorical column."""

    kind: Literal["categorical"] = "categorical"
    column: str = Field(..., description="Column name")
    options: Tuple[str, ...] = Field(..., min_length=1, description="Schema option order")
    ordering: Tuple[str, ...] = Field(..., min_length=1, description="Options by descending fitted frequency")
    widths: Tuple[float, ...] = Field(..., description="Interval widths aligned with ordering")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_intervals(self) -> "CategoricalMarginal":
        if sorted(self.ordering) != sorted(self.options):
            raise ValueError(f"ordering of '{self.column}' must permute its options")
        if len(self.widths) != len(self.ordering):
            raise ValueError(f"'{self.column}' needs one width per option")
        if any(w < 0 for w in self.widths) or abs(sum(self.widths) - 1.0) > 1e-9:
            raise ValueError(f"widths of '{self.column}' must be nonnegative and sum to 1")
        return self

    @property
    def edges(self) -> np.ndarray:
        """Interval edges 0 = e0 < ... < ek = 1 in ordering order."""
        edges = np.concatenate([[0.0], np.cumsum(self.widths)])
        edges[-1] = 1.0
        return edges


MarginalTransform = Annotated[
    Union[NumericMarginal, CategoricalMarginal],
    Field(discriminator="kind")
]


class FitMetadata(BaseModel):
    """How a copula model was fitted."""

    row_count: int = Field(..., ge=0, description="Rows used for fitting")
    quantile: Optional[float] = Field(None, description="Filtering quantile applied before fitting")
    seed: Optional[int] = Field(None, description="Seed of the stochastic categorical encode")
    task_values: List[float] = Field(default_factory=list, description="Distinct fitted task values")
    warnings: List[str] = Field(default_factory=list, description="Fit-time warnings")

    model_config = ConfigDict(frozen=True)


class CopulaModel(BaseModel):
    """
    Fitted Gaussian copula: marginals, latent correlation and fit provenance.

    Columns are the space's tunables followed by its task feature.
    """

    version: Literal[1] = Field(default=MODEL_VERSION, description="Model file format version")
    space: ParameterSpace = Field(..., description="Schema the model was fitted on")
    fingerprint: str = Field(..., description="SHA-256 of the schema")
    transforms: Tuple[MarginalTransform, ...] = Field(..., description="One marginal per column")
    correlation: Tuple[Tuple[float, ...], ...] = Field(..., description="Row-major latent correlation")
    metadata: FitMetadata = Field(..., description="Fit provenance")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_model(self) -> "CopulaModel":
        columns = self.space.columns
        if tuple(t.column for t in self.transforms) != columns:
            raise ValueError("transform columns must follow the schema order")
        if self.fingerprint != self.space.fingerprint():
            raise ValueError("fingerprint does not match the embedded schema")
        corr = np.asarray(self.correlation, dtype=float)
        d = len(columns)
        if corr.shape != (d, d):
            raise ValueError(f"correlation must be {d}x{d}")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("correlation must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-9):
            raise ValueError("correlation must have a unit diagonal")
        return self

    @property
    def corr(self) -> np.ndarray:
        """Correlation as an array."""
        return np.asarray(self.correlation, dtype=float)

    @property
    def columns(self) -> Tuple[str, ...]:
        """Model column order."""
        return self.space.columns

    def save(self, path: Union[str, Path]) -> Path:
        """Write the self-describing model file (JSON)."""
        model_path = Path(path)
        model_path.parent.mkdir(parents=True, exist_ok=True)
        model_path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return model_path

    @classmethod
    def load(cls, path: Union[str, Path], space: Optional[ParameterSpace] = None) -> "CopulaModel":
        """
        Read a model file.

        Args:
            path: Model file
            space: When given, the model must have been fitted on this schema

        Raises:
            ModelError: Missing, unreadable or mismatched model
        """
        model_path = Path(path)
        if not model_path.exists():
            raise ModelError(f"model file not found: {model_path}")
        try:
            model = cls.model_validate_json(model_path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ModelError(f"invalid model file {model_path}: {e}") from e
        if space is not None and space.fingerprint() != model.fingerprint:
            raise ModelError(f"model {model_path} was fitted on a different space")
        return model


class ConditionSpec(BaseModel):
    """Fixed task-feature value for conditional sampling."""

    column: str = Field(..., description="Task feature name")
    value: float = Field(..., description="Task value, may lie outside the fitted tasks")

    model_config = ConfigDict(frozen=True)


class SampleBatch(BaseModel):
    """Distinct configurations plus rejection accounting."""

    configs: Tuple[Configuration, ...] = Field(default=(), description="Distinct configurations in draw order")
    generated: int = Field(..., ge=0, description="Raw draws decoded")
    rejected_repeated: int = Field(..., ge=0, description="Draws rejected as repeats or excluded")
    saturated: bool = Field(default=False, description="Attempt cap reached before n uniques")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_accounting(self) -> "SampleBatch":
        if self.generated != len(self.configs) + self.rejected_repeated:
            raise ValueError("generated must equal unique + rejected_repeated")
        if len({c.key for c in self.configs}) != len(self.configs):
            raise ValueError("configs must be pairwise distinct")
        return self

    @property
    def repeated_fraction(self) -> float:
        """Share of raw draws rejected."""
        return self.rejected_repeated / self.generated if self.generated else 0.0
