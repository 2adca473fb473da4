"""Evaluation-budget data models."""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BudgetInputs(BaseModel):
    """Quantities that drive the few-shot budget."""

    full_space: int = Field(..., ge=1, description="|C_full|, size of the whole tuning space")
    effective_space: int = Field(..., ge=1, description="|C_eff|, configurations the model can generate")
    ideal_fraction: float = Field(default=0.01, gt=0.0, lt=1.0, description="Share of candidates that are ideal")
    pruned_optimal_allowance: float = Field(
        default=0.05,
        gt=0.0,
        lt=1.0,
        description="Budgets are undefined below this |C_eff|/|C_full| ratio"
    )
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0, description="Required P(>=1 ideal candidate)")
    max_budget: int = Field(default=30, ge=1, description="Evaluation cap")
    ideal_count: Optional[int] = Field(None, ge=1, description="Explicit I_eff, overriding ideal_fraction")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "full_space": 10648,
                "effective_space": 800,
                "ideal_fraction": 0.01,
                "pruned_optimal_allowance": 0.05,
                "confidence": 0.95,
                "max_budget": 30
            }
        }
    )

    @model_validator(mode="after")
    def _check_sizes(self) -> "BudgetInputs":
        if self.effective_space > self.full_space:
            raise ValueError("effective_space cannot exceed full_space")
        if self.ideal_count is not None and self.ideal_count > self.effective_space:
            raise ValueError("ideal_count cannot exceed effective_space")
        return self

    @property
    def coverage_ratio(self) -> float:
        """|C_eff| / |C_full|."""
        return self.effective_space / self.full_space


class BudgetEstimate(BaseModel):
    """Smallest budget meeting the confidence, or why none is defined."""

    outcome: Literal["defined", "undefined"] = Field(..., description="Whether a budget exists")
    inputs: BudgetInputs = Field(..., description="Inputs the estimate was computed from")
    ideal_count: Optional[int] = Field(None, description="I_eff used")
    k_star: Optional[int] = Field(None, ge=1, description="Smallest k meeting the confidence")
    probability_at_k: Optional[float] = Field(None, description="P(>=1 ideal) at k_star")
    budget_exceeded: bool = Field(default=False, description="k_star above max_budget")
    reason: Optional[str] = Field(None, description="Why the budget is undefined")

    model_config = ConfigDict(frozen=True)

    @property
    def defined(self) -> bool:
        """Whether a k_star exists."""
        return self.outcome == "defined"

    def usable_budget(self) -> Optional[int]:
        """k_star when defined and within max_budget."""
        if self.defined and not self.budget_exceeded:
            return self.k_star
        return None


class ProbabilityPoint(BaseModel):
    """One point of the P(k) curve."""

    k: int = Field(..., ge=0)
    probability: float = Field(..., ge=0.0, le=1.0)


class BudgetReport(BaseModel):
    """Budget estimate plus its probability curve, as written by the CLI."""

    estimate: BudgetEstimate
    curve: List[ProbabilityPoint] = Field(default_factory=list)
    support_estimate: Optional[float] = Field(None, description="Raw |C_eff| estimate when fitted from a model")
