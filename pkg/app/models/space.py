"""Tuning-space data models."""

import hashlib
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import SpaceDefinitionError

ParamValue = Union[int, float, str]

# Values this close to a grid point (relative to the domain width) snap onto it
GRID_SNAP_TOLERANCE = 1e-9


class ParameterKind(str, Enum):
    """Kinds of tunable parameters."""
    INTEGER = "integer"
    REAL = "real"
    CATEGORICAL = "categorical"


class GridSpacing(str, Enum):
    """Spacing of a real parameter's finite grid."""
    LINEAR = "linear"
    LOG = "log"


class RealGrid(BaseModel):
    """Finite grid declared by a real parameter."""

    count: int = Field(..., ge=2, description="Number of grid points including both bounds")
    spacing: GridSpacing = Field(default=GridSpacing.LINEAR, description="linear or log spacing")

    model_config = ConfigDict(frozen=True)


class ParameterDef(BaseModel):
    """One tunable parameter (or the task feature) of a tuning space."""

    name: str = Field(..., pattern=r"^[A-Za-z_][A-Za-z0-9_]*$", description="Parameter identifier")
    kind: ParameterKind = Field(..., description="integer, real or categorical")
    lo: Optional[Union[int, float]] = Field(None, description="Inclusive lower bound (numeric kinds)")
    hi: Optional[Union[int, float]] = Field(None, description="Inclusive upper bound (numeric kinds)")
    values: Optional[Tuple[str, ...]] = Field(None, description="Ordered options (categorical kind)")
    grid: Optional[RealGrid] = Field(None, description="Finite grid (real kind)")
    default: Optional[ParamValue] = Field(None, description="Untuned baseline value")

    model_config = ConfigDict(frozen=True)

    @field_validator("values", mode="before")
    @classmethod
    def _values_as_text(cls, values: Any) -> Any:
        # Schema files often list numeric options (e.g. unroll factors) bare
        if isinstance(values, (list, tuple)):
            return tuple(str(v) for v in values)
        return values

    @model_validator(mode="after")
    def _check_domain(self) -> "ParameterDef":
        if self.kind == ParameterKind.CATEGORICAL:
            if not self.values:
                raise ValueError(f"categorical parameter '{self.name}' needs a non-empty value list")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"categorical parameter '{self.name}' has duplicate values")
            if self.lo is not None or self.hi is not None or self.grid is not None:
                raise ValueError(f"categorical parameter '{self.name}' takes no lo/hi/grid")
        else:
            if self.lo is None or self.hi is None:
                raise ValueError(f"numeric parameter '{self.name}' needs lo and hi")
            if not self.lo < self.hi:
                raise ValueError(f"parameter '{self.name}' needs lo < hi")
            if self.values is not None:
                raise ValueError(f"numeric parameter '{self.name}' takes no value list")
            if self.kind == ParameterKind.INTEGER:
                if not (float(self.lo).is_integer() and float(self.hi).is_integer()):
                    raise ValueError(f"integer parameter '{self.name}' needs integral bounds")
                if self.grid is not None:
                    raise ValueError(f"integer parameter '{self.name}' takes no grid")
            if (
                self.grid is not None
                and self.grid.spacing == GridSpacing.LOG
                and self.lo <= 0
            ):
                raise ValueError(f"log grid of '{self.name}' needs lo > 0")

        if self.default is not None:
            try:
                self.coerce(self.default)
            except ValueError as e:
                raise ValueError(f"default of '{self.name}': {e}") from e
        return self

    @property
    def is_numeric(self) -> bool:
        """Whether the parameter is integer or real."""
        return self.kind != ParameterKind.CATEGORICAL

    @property
    def is_finite(self) -> bool:
        """Whether the parameter has a finite option list."""
        return self.kind != ParameterKind.REAL or self.grid is not None

    @property
    def option_count(self) -> int:
        """Number of options this parameter contributes to |C|."""
        if self.kind == ParameterKind.INTEGER:
            return int(self.hi) - int(self.lo) + 1
        if self.kind == ParameterKind.CATEGORICAL:
            return len(self.values)
        if self.grid is None:
            raise SpaceDefinitionError(f"real parameter '{self.name}' has no grid")
        return self.grid.count

    def grid_points(self) -> np.ndarray:
        """Grid points of a gridded real parameter."""
        if self.kind != ParameterKind.REAL or self.grid is None:
            raise SpaceDefinitionError(f"parameter '{self.name}' has no real grid")
        if self.grid.spacing == GridSpacing.LOG:
            points = np.geomspace(float(self.lo), float(self.hi), self.grid.count)
        else:
            points = np.linspace(float(self.lo), float(self.hi), self.grid.count)
        # Exact bounds regardless of floating-point drift
        points[0], points[-1] = float(self.lo), float(self.hi)
        return points

    def options(self) -> Tuple[ParamValue, ...]:
        """Ordered option list (schema order)."""
        if self.kind == ParameterKind.INTEGER:
            return tuple(range(int(self.lo), int(self.hi) + 1))
        if self.kind == ParameterKind.CATEGORICAL:
            return tuple(self.values)
        return tuple(float(p) for p in self.grid_points())

    def coerce(self, value: Any) -> ParamValue:
        """
        Convert a raw value into this parameter's canonical type.

        Args:
            value: Raw value (numbers or strings as read from files)

        Returns:
            Canonical value (int, float on the grid, or category string)

        Raises:
            ValueError: If the value lies outside the domain
        """
        if self.kind == ParameterKind.CATEGORICAL:
            text = str(value)
            if text not in self.values:
                raise ValueError(f"unknown category '{text}'")
            return text

        if isinstance(value, bool):
            raise ValueError(f"boolean {value!r} is not numeric")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"cannot parse {value!r} as a number")
        if not math.isfinite(number):
            raise ValueError(f"non-finite value {value!r}")

        if self.kind == ParameterKind.INTEGER:
            if not number.is_integer():
                raise ValueError(f"non-integral value {value!r}")
            number = int(number)
        if number < self.lo or number > self.hi:
            raise ValueError(f"value {value!r} outside [{self.lo}, {self.hi}]")

        if self.kind == ParameterKind.REAL:
            if self.grid is None:
                return number
            points = self.grid_points()
            index = int(np.argmin(np.abs(points - number)))
            if abs(points[index] - number) > GRID_SNAP_TOLERANCE * (self.hi - self.lo):
                raise ValueError(f"value {value!r} is not on the grid")
            return float(points[index])
        return number

    def option_index(self, value: ParamValue) -> int:
        """Position of a canonical value in the option list."""
        if self.kind == ParameterKind.INTEGER:
            return int(value) - int(self.lo)
        if self.kind == ParameterKind.CATEGORICAL:
            return self.values.index(value)
        return int(np.argmin(np.abs(self.grid_points() - float(value))))


class Configuration(BaseModel):
    """One assignment of values to the tunable parameters of a space."""

    values: Tuple[Tuple[str, ParamValue], ...] = Field(..., description="Ordered (name, value) pairs")

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_values(cls, names: Tuple[str, ...], values: Tuple[ParamValue, ...]) -> "Configuration":
        """Build a configuration from parallel name/value tuples."""
        return cls(values=tuple(zip(names, values)))

    @property
    def names(self) -> Tuple[str, ...]:
        """Parameter names in schema order."""
        return tuple(name for name, _ in self.values)

    @property
    def key(self) -> Tuple[ParamValue, ...]:
        """Bare value tuple, usable as a set key."""
        return tuple(value for _, value in self.values)

    def as_dict(self) -> Dict[str, ParamValue]:
        """Mapping of parameter name to value."""
        return dict(self.values)

    def __getitem__(self, name: str) -> ParamValue:
        for key, value in self.values:
            if key == name:
                return value
        raise KeyError(name)


class ParameterSpace(BaseModel):
    """Ordered schema of tunable parameters plus the task feature."""

    parameters: Tuple[ParameterDef, ...] = Field(..., min_length=1, description="Tunable parameters")
    task_feature: ParameterDef = Field(..., description="Numeric task descriptor (e.g. input size)")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_schema(self) -> "ParameterSpace":
        names = [p.name for p in self.parameters] + [self.task_feature.name]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate parameter names: {duplicates}")
        if "objective" in names:
            raise ValueError("'objective' is reserved for the measured objective column")
        if not self.task_feature.is_numeric:
            raise ValueError("task feature must be numeric")
        for param in self.parameters:
            if not param.is_finite:
                raise ValueError(
                    f"real parameter '{param.name}' must declare a grid (count + spacing)"
                )
        return self

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ParameterSpace":
        """
        Build a space from a parsed schema document.

        Raises:
            SpaceDefinitionError: If the schema is invalid
        """
        if not isinstance(raw, dict):
            raise SpaceDefinitionError("space schema must be a mapping")
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise SpaceDefinitionError(f"invalid space schema: {e}") from e

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "ParameterSpace":
        """Load a space schema file (YAML or JSON)."""
        schema_path = Path(path)
        if not schema_path.exists():
            raise SpaceDefinitionError(f"space file not found: {schema_path}")
        with open(schema_path, "r", encoding="utf-8") as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise SpaceDefinitionError(f"cannot parse {schema_path}: {e}") from e
        return cls.from_dict(raw)

    def to_dict(self) -> Dict[str, Any]:
        """Schema document with the normative field names."""
        return self.model_dump(mode="json", exclude_none=True)

    def to_yaml(self, path: Union[str, Path]) -> Path:
        """Write the schema document."""
        schema_path = Path(path)
        schema_path.parent.mkdir(parents=True, exist_ok=True)
        with open(schema_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
        return schema_path

    @property
    def names(self) -> Tuple[str, ...]:
        """Tunable parameter names in schema order."""
        return tuple(p.name for p in self.parameters)

    @property
    def columns(self) -> Tuple[str, ...]:
        """Model columns: tunables followed by the task feature."""
        return self.names + (self.task_feature.name,)

    def get(self, name: str) -> ParameterDef:
        """Look up a tunable parameter by name."""
        for param in self.parameters:
            if param.name == name:
                return param
        raise KeyError(name)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical schema document."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()

    def default_configuration(self) -> Optional[Configuration]:
        """Baseline configuration, if every tunable declares a default."""
        if any(p.default is None for p in self.parameters):
            return None
        return Configuration.from_values(
            self.names,
            tuple(p.coerce(p.default) for p in self.parameters)
        )

    def option_lists(self) -> List[Tuple[ParamValue, ...]]:
        """Option list of every tunable parameter."""
        return [p.options() for p in self.parameters]
