"""Prior tuning data models."""

import math
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import DatasetError
from app.models.space import Configuration, ParameterSpace

OBJECTIVE_COLUMN = "objective"


class TuningRecord(BaseModel):
    """One empirical evaluation f(c; t)."""

    config: Configuration = Field(..., description="Evaluated configuration")
    task_value: Union[int, float] = Field(..., description="Task feature value")
    objective: float = Field(..., description="Measured objective, lower is better (seconds)")

    model_config = ConfigDict(frozen=True)

    @field_validator("objective")
    @classmethod
    def _finite_objective(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("objective must be finite")
        return value


class Dataset(BaseModel):
    """Ordered collection of tuning records over one space."""

    space: ParameterSpace = Field(..., description="Space every record validates against")
    records: Tuple[TuningRecord, ...] = Field(default=(), description="Records in input order")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_records(self) -> "Dataset":
        names = self.space.names
        task = self.space.task_feature
        for index, record in enumerate(self.records):
            if record.config.names != names:
                raise ValueError(f"record {index} does not match the space's parameters")
            for param, value in zip(self.space.parameters, record.config.key):
                try:
                    param.coerce(value)
                except ValueError as e:
                    raise ValueError(f"record {index}, {param.name}: {e}") from e
            try:
                task.coerce(record.task_value)
            except ValueError as e:
                raise ValueError(f"record {index}, {task.name}: {e}") from e
        return self

    def __len__(self) -> int:
        return len(self.records)

    @property
    def objectives(self) -> List[float]:
        """Objective column in input order."""
        return [r.objective for r in self.records]

    def task_values(self) -> List[Union[int, float]]:
        """Distinct task values in first-seen order."""
        seen: Dict[Union[int, float], None] = {}
        for record in self.records:
            seen.setdefault(record.task_value, None)
        return list(seen)

    def by_task(self) -> Dict[Union[int, float], "Dataset"]:
        """Split into one dataset per task value (first-seen order)."""
        groups: Dict[Union[int, float], List[TuningRecord]] = {}
        for record in self.records:
            groups.setdefault(record.task_value, []).append(record)
        return {
            task: Dataset(space=self.space, records=tuple(records))
            for task, records in groups.items()
        }

    def with_records(self, records: List[TuningRecord]) -> "Dataset":
        """Dataset over the same space holding the given records."""
        return Dataset(space=self.space, records=tuple(records))

    @classmethod
    def concat(cls, datasets: List["Dataset"]) -> "Dataset":
        """
        Merge datasets over one space, keeping file order then row order.

        Raises:
            DatasetError: If the list is empty or the spaces differ
        """
        if not datasets:
            raise DatasetError("nothing to concatenate")
        space = datasets[0].space
        fingerprint = space.fingerprint()
        records: List[TuningRecord] = []
        for ds in datasets:
            if ds.space.fingerprint() != fingerprint:
                raise DatasetError("datasets were loaded against different spaces")
            records.extend(ds.records)
        return cls(space=space, records=tuple(records))

    def to_frame(self) -> pd.DataFrame:
        """Tabular view: tunables, task feature, objective."""
        columns = list(self.space.columns) + [OBJECTIVE_COLUMN]
        rows = [
            list(r.config.key) + [r.task_value, r.objective]
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, space: ParameterSpace) -> "Dataset":
        """
        Validate a frame (cells as text or numbers) into a dataset.

        Rows are reported 1-based in data order (header excluded).

        Raises:
            DatasetError: Missing column, unparsable cell or domain violation
        """
        required = list(space.columns) + [OBJECTIVE_COLUMN]
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise DatasetError(f"missing column(s): {', '.join(missing)}")

        params = list(space.parameters)
        task = space.task_feature
        names = space.names
        records = []

        for row_number, row in enumerate(frame[required].itertuples(index=False, name=None), start=1):
            values = []
            for param, cell in zip(params, row):
                values.append(_coerce_cell(param.coerce, cell, row_number, param.name))
            task_value = _coerce_cell(task.coerce, row[len(params)], row_number, task.name)
            objective = _parse_objective(row[-1], row_number)
            records.append(TuningRecord(
                config=Configuration.from_values(names, tuple(values)),
                task_value=task_value,
                objective=objective
            ))

        return cls.model_construct(space=space, records=tuple(records))


def _coerce_cell(coerce: Any, cell: Any, row: int, column: str) -> Any:
    text = cell.strip() if isinstance(cell, str) else cell
    if text == "" or text is None:
        raise DatasetError("empty cell", row=row, column=column)
    try:
        return coerce(text)
    except ValueError as e:
        raise DatasetError(str(e), row=row, column=column) from e


def _parse_objective(cell: Any, row: int) -> float:
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise DatasetError(f"cannot parse {cell!r} as a number", row=row, column=OBJECTIVE_COLUMN)
    if not math.isfinite(value):
        raise DatasetError(f"non-finite objective {cell!r}", row=row, column=OBJECTIVE_COLUMN)
    return value


class FilterReport(BaseModel):
    """Outcome of one quantile-filtering pass."""

    quantile: float = Field(..., gt=0.0, le=1.0, description="Filtering quantile")
    kept: int = Field(..., ge=0, description="Records kept")
    total: int = Field(..., ge=0, description="Records before filtering")
    coverage: float = Field(..., ge=0.0, le=1.0, description="Marginal-support coverage of the kept data")
    avg_marginal_kl: Optional[float] = Field(
        None,
        ge=0.0,
        description="Mean per-parameter KL(kept || reference) in nats"
    )

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "quantile": 0.3,
                "kept": 180,
                "total": 600,
                "coverage": 0.82,
                "avg_marginal_kl": 0.0921
            }
        }
    )

    @model_validator(mode="after")
    def _kept_within_total(self) -> "FilterReport":
        if self.kept > self.total:
            raise ValueError("kept cannot exceed total")
        return self

