"""
Hypergeometric success probability and few-shot budget search.

P(k) is the chance that k distinct draws from |C| candidates, |I| of them
ideal, contain at least one ideal candidate.
"""

import logging
import math
from decimal import ROUND_HALF_UP, Decimal
from typing import List, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from app.models.budget import BudgetEstimate, BudgetInputs, ProbabilityPoint
from app.models.copula import ConditionSpec, CopulaModel
from app.services.copula import estimate_unique
from app.services.tuning_space import cardinality

logger = logging.getLogger(__name__)

# Factors summed per vectorized chunk
EXACT_TERMS_LIMIT = 1_000_000

# Below this log P(none) is exp-underflow, so P(k) == 1.0
LOG_P_NONE_FLOOR = -800.0


def _check_counts(total: int, ideal: int, k: int) -> None:
    if not 0 <= ideal <= total:
        raise ValueError(f"need 0 <= ideal <= total, got ideal={ideal}, total={total}")
    if not 0 <= k <= total:
        raise ValueError(f"need 0 <= k <= total, got k={k}, total={total}")


def log_p_none(total: int, ideal: int, k: int) -> float:
    """
    log of binom(total-ideal, k) / binom(total, k), the chance of drawing no ideal candidate.

    The ratio equals both prod_{j<k} (1 - ideal/(total-j)) and
    prod_{i<ideal} (1 - k/(total-i)); the shorter product is summed as
    log1p terms. Sums that cross LOG_P_NONE_FLOOR stop there.
    """
    _check_counts(total, ideal, k)
    if ideal == 0 or k == 0:
        return 0.0
    if k > total - ideal:
        return -math.inf

    terms, drawn = min(k, ideal), max(k, ideal)
    acc = 0.0
    for start in range(0, terms, EXACT_TERMS_LIMIT):
        i = np.arange(start, min(terms, start + EXACT_TERMS_LIMIT), dtype=float)
        acc += float(np.sum(np.log1p(-drawn / (total - i))))
        if acc < LOG_P_NONE_FLOOR:
            break
    return acc


def p_at_least_one(total: int, ideal: int, k: int) -> float:
    """
    P(at least one ideal candidate in k draws without replacement).

    Args:
        total: Candidates
        ideal: Ideal candidates among them
        k: Draws

    Returns:
        1 - binom(total-ideal, k) / binom(total, k)
    """
    return float(-math.expm1(log_p_none(total, ideal, k)))


def _log_binom(n: int, r: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)


def p_at_least_one_sum(total: int, ideal: int, k: int) -> float:
    """
    The same probability as an explicit sum over i >= 1 ideal hits.

    sum_i binom(ideal, i) binom(total-ideal, k-i) / binom(total, k), evaluated in log space.
    """
    _check_counts(total, ideal, k)
    lo = max(1, k - (total - ideal))
    hi = min(k, ideal)
    if lo > hi:
        return 0.0
    i = np.arange(lo, hi + 1, dtype=float)
    log_terms = (
        _log_binom(ideal, i)
        + _log_binom(total - ideal, k - i)
        - _log_binom(total, np.array(float(k)))
    )
    return float(min(1.0, np.exp(logsumexp(log_terms))))


def probability_curve(total: int, ideal: int, max_k: int) -> List[ProbabilityPoint]:
    """P(k) for k = 1..max_k (capped at total)."""
    return [
        ProbabilityPoint(k=k, probability=p_at_least_one(total, ideal, k))
        for k in range(1, min(max_k, total) + 1)
    ]


def effective_ideal_count(inputs: BudgetInputs) -> int:
    """I_eff = max(1, round-half-up(ideal_fraction * |C_eff|)) unless overridden."""
    if inputs.ideal_count is not None:
        return inputs.ideal_count
    scaled = Decimal(repr(inputs.ideal_fraction)) * inputs.effective_space
    return max(1, int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_UP)))


def smallest_k(total: int, ideal: int, confidence: float) -> int:
    """Smallest k with P(k) >= confidence (P is nondecreasing in k)."""
    if ideal < 1:
        raise ValueError("no ideal candidates, no budget reaches any confidence")
    hi = 1
    while p_at_least_one(total, ideal, hi) < confidence:
        if hi >= total - ideal + 1:
            break
        hi = min(hi * 2, total - ideal + 1)
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if p_at_least_one(total, ideal, mid) >= confidence:
            hi = mid
        else:
            lo = mid + 1
    return lo


def min_budget(inputs: BudgetInputs) -> BudgetEstimate:
    """
    Smallest evaluation budget reaching the confidence level.

    Args:
        inputs: Space sizes and knobs

    Returns:
        Undefined when |C_eff|/|C_full| falls below the allowance, otherwise
        k_star (flagged when it exceeds max_budget)
    """
    if inputs.coverage_ratio < inputs.pruned_optimal_allowance:
        reason = (
            f"reduction below allowance: |C_eff|/|C| = {inputs.coverage_ratio:.4%} "
            f"< {inputs.pruned_optimal_allowance:.2%}"
        )
        logger.info(f"Budget undefined ({reason})")
        return BudgetEstimate(outcome="undefined", inputs=inputs, reason=reason)

    ideal = effective_ideal_count(inputs)
    k_star = smallest_k(inputs.effective_space, ideal, inputs.confidence)
    estimate = BudgetEstimate(
        outcome="defined",
        inputs=inputs,
        ideal_count=ideal,
        k_star=k_star,
        probability_at_k=p_at_least_one(inputs.effective_space, ideal, k_star),
        budget_exceeded=k_star > inputs.max_budget
    )
    if estimate.budget_exceeded:
        logger.warning(f"Budget k*={k_star} exceeds the cap of {inputs.max_budget}")
    else:
        logger.info(f"Budget k*={k_star} (I_eff={ideal}, |C_eff|={inputs.effective_space})")
    return estimate


def estimate_budget(
    model: CopulaModel,
    cond: Optional[ConditionSpec],
    trials: int,
    seed: int,
    ideal_fraction: float = 0.01,
    allowance: float = 0.05,
    confidence: float = 0.95,
    max_budget: int = 30,
    ideal_count: Optional[int] = None
):
    """
    Budget of a fitted model: estimate |C_eff|, clamp it to |C|, search k.

    Returns:
        (BudgetEstimate, raw support estimate)
    """
    full = cardinality(model.space)
    support = estimate_unique(model, cond, trials, seed)
    effective = int(min(full, max(1, round(support))))
    inputs = BudgetInputs(
        full_space=full,
        effective_space=effective,
        ideal_fraction=ideal_fraction,
        pruned_optimal_allowance=allowance,
        confidence=confidence,
        max_budget=max_budget,
        ideal_count=min(ideal_count, effective) if ideal_count is not None else None
    )
    return min_budget(inputs), support
