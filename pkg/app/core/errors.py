"""Exception hierarchy with stable CLI exit codes."""

from typing import List, Optional


class CopulaTuneError(Exception):
    """Base exception for all tuning errors."""

    exit_code = 2


class UsageError(CopulaTuneError):
    """Raised for invalid command-line usage or knob values."""

    exit_code = 1


class SpaceDefinitionError(CopulaTuneError):
    """Raised when a tuning-space schema is invalid."""
    pass


class ConfigurationValidationError(CopulaTuneError):
    """Raised when a raw record does not fit the tuning space."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CardinalityCapError(CopulaTuneError):
    """Raised when enumeration would exceed the caller's cap."""

    def __init__(self, cardinality: int, cap: int):
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(f"Space holds {cardinality} configurations, cap is {cap}")


class DatasetError(CopulaTuneError):
    """Raised when tuning data cannot be loaded or processed."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class DegenerateMarginalError(CopulaTuneError):
    """Raised when a marginal cannot be fitted from the given values."""
    pass


class ModelError(CopulaTuneError):
    """Raised when a copula model cannot be fitted, loaded or used."""
    pass


class ConditionError(CopulaTuneError):
    """Raised when a conditioning value lies outside the task domain."""
    pass


class EvaluatorError(CopulaTuneError):
    """Raised when an evaluator cannot produce an objective."""

    exit_code = 3


class UnknownLandscapeError(UsageError):
    """Raised when a synthetic landscape name is not registered."""

    def __init__(self, name: str, available: List[str]):
        self.available = list(available)
        super().__init__(
            f"Unknown landscape '{name}'. Available: {', '.join(self.available)}"
        )
