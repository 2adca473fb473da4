"""Tests for the hypergeometric success probability and the budget search."""

import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from app.models.budget import BudgetInputs
from app.models.copula import ConditionSpec
from app.services.budget import (
    EXACT_TERMS_LIMIT,
    effective_ideal_count,
    estimate_budget,
    log_p_none,
    min_budget,
    p_at_least_one,
    p_at_least_one_sum,
    probability_curve,
    smallest_k,
)


def _exact(total, ideal, k):
    return 1 - Fraction(math.comb(total - ideal, k), math.comb(total, k))


# (name, |C_full|, |C_eff|, defined)
KERNELS = [
    ("3mm", 376320, 2500, False),
    ("covariance", 5324, 110, False),
    ("lu", 5324, 210, False),
    ("floyd_warshall", 5324, 1800, True),
    ("heat3d", 10648, 1600, True),
    ("syr2k", 10648, 800, True),
    ("amg", 1180980, 108500, True),
    ("rsbench", 5196312, 316800, True),
    ("xsbench", 577368, 77500, True),
    ("sw4lite", 4752, 1800, True),
]


class TestProbability:

    def test_exhaustive_small_spaces(self):
        for total in range(1, 51):
            for ideal in range(total + 1):
                for k in range(total + 1):
                    expected = float(_exact(total, ideal, k))
                    assert p_at_least_one(total, ideal, k) == pytest.approx(expected, abs=1e-12)

    def test_sum_form_agrees(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            total = int(rng.integers(1, 1001))
            ideal = int(rng.integers(0, total + 1))
            k = int(rng.integers(0, total + 1))
            assert p_at_least_one_sum(total, ideal, k) == pytest.approx(
                p_at_least_one(total, ideal, k), abs=1e-10
            )

    def test_edge_values(self):
        assert p_at_least_one(100, 0, 50) == 0.0
        assert p_at_least_one(100, 10, 0) == 0.0
        assert p_at_least_one(100, 10, 91) == 1.0
        assert p_at_least_one(7, 7, 1) == 1.0

    def test_reference_point(self):
        assert p_at_least_one(100, 10, 24) < 0.95
        assert p_at_least_one(100, 10, 25) >= 0.95

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            p_at_least_one(10, 11, 1)
        with pytest.raises(ValueError):
            p_at_least_one(10, 1, 11)

    def test_long_product_matches_direct_sum(self):
        total, ideal = 5_000_000, 100
        k = EXACT_TERMS_LIMIT + 1
        direct = float(np.sum(np.log1p(-ideal / (total - np.arange(k, dtype=float)))))
        assert log_p_none(total, ideal, k) == pytest.approx(direct, rel=1e-9)
        assert log_p_none(total, ideal, k) < log_p_none(total, ideal, EXACT_TERMS_LIMIT)

    @pytest.mark.parametrize("k", [1_000_000, 1_000_001, 2_000_000, 123_456_789_012])
    def test_single_ideal_in_huge_space(self, k):
        # One ideal candidate: P(k) = k / total exactly
        total = 10**12
        assert p_at_least_one(total, 1, k) == pytest.approx(k / total, rel=1e-9)

    def test_monotone_across_chunk_boundary(self):
        total = 10**12
        for ideal in (1, 3, 10_000):
            below = p_at_least_one(total, ideal, EXACT_TERMS_LIMIT)
            above = p_at_least_one(total, ideal, EXACT_TERMS_LIMIT + 1)
            assert 0.0 < below < above

    def test_symmetric_in_ideal_and_draws(self):
        for total, a, b in [(10**12, 7, 3_000_000), (10**9, 2, 500), (1000, 10, 25)]:
            assert log_p_none(total, a, b) == pytest.approx(log_p_none(total, b, a), rel=1e-12)

    def test_both_sides_long(self):
        # Second-order expansion: -mn/C - n m^2/(2C^2) - n^2 m/(2C^2)
        total, n = 10**12, 2_000_000
        assert log_p_none(total, n, n) == pytest.approx(-4.000008, abs=1e-7)

    def test_negligible_miss_probability(self):
        assert p_at_least_one(10**9, 5_000_000, 5_000_000) == 1.0

    def test_curve(self):
        curve = probability_curve(100, 10, 30)
        assert [p.k for p in curve] == list(range(1, 31))
        values = [p.probability for p in curve]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert len(probability_curve(20, 2, 50)) == 20


class TestSmallestK:

    def test_reference_budget(self):
        assert smallest_k(100, 10, 0.95) == 25

    def test_every_ideal_candidate(self):
        assert smallest_k(12, 12, 0.99) == 1

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            total = int(rng.integers(2, 400))
            ideal = int(rng.integers(1, total + 1))
            confidence = float(rng.uniform(0.5, 0.99))
            k = smallest_k(total, ideal, confidence)
            assert p_at_least_one(total, ideal, k) >= confidence
            assert k == 1 or p_at_least_one(total, ideal, k - 1) < confidence

    def test_half_of_huge_space(self):
        total = 10**12
        k = smallest_k(total, 1, 0.5)
        assert abs(k - total // 2) <= 1
        assert p_at_least_one(total, 1, k) >= 0.5
        assert p_at_least_one(total, 1, k - 1) < 0.5

    def test_no_ideal(self):
        with pytest.raises(ValueError):
            smallest_k(10, 0, 0.95)


class TestMinBudget:

    @pytest.mark.parametrize("name,full,effective,defined", KERNELS, ids=[k[0] for k in KERNELS])
    def test_kernel_partition(self, name, full, effective, defined):
        estimate = min_budget(BudgetInputs(full_space=full, effective_space=effective))
        assert estimate.defined is defined
        if defined:
            k = estimate.k_star
            ideal = estimate.ideal_count
            assert estimate.probability_at_k >= 0.95
            assert p_at_least_one(effective, ideal, k - 1) < 0.95
        else:
            assert "allowance" in estimate.reason
            assert estimate.k_star is None
            assert estimate.usable_budget() is None

    def test_reference_inputs(self):
        estimate = min_budget(BudgetInputs(full_space=100, effective_space=100, ideal_count=10))
        assert estimate.k_star == 25
        assert not estimate.budget_exceeded
        assert estimate.usable_budget() == 25

    def test_above_cap(self):
        estimate = min_budget(
            BudgetInputs(full_space=100, effective_space=100, ideal_count=10, max_budget=20)
        )
        assert estimate.budget_exceeded
        assert estimate.usable_budget() is None

    def test_large_budget_flagged(self):
        estimate = min_budget(BudgetInputs(full_space=5196312, effective_space=316800))
        assert estimate.k_star > 30
        assert estimate.budget_exceeded
        assert estimate.usable_budget() is None

    @pytest.mark.parametrize("effective,expected", [(250, 3), (150, 2), (50, 1), (10, 1), (800, 8)])
    def test_ideal_count_rounds_half_up(self, effective, expected):
        inputs = BudgetInputs(full_space=1000, effective_space=effective)
        assert effective_ideal_count(inputs) == expected

    def test_explicit_ideal_count(self):
        inputs = BudgetInputs(full_space=1000, effective_space=500, ideal_count=40)
        assert effective_ideal_count(inputs) == 40

    def test_allowance_boundary(self):
        assert min_budget(BudgetInputs(full_space=1000, effective_space=50)).defined
        assert not min_budget(BudgetInputs(full_space=1000, effective_space=49)).defined

    def test_inputs_validated(self):
        with pytest.raises(ValidationError):
            BudgetInputs(full_space=10, effective_space=11)
        with pytest.raises(ValidationError):
            BudgetInputs(full_space=100, effective_space=10, ideal_count=11)
        with pytest.raises(ValidationError):
            BudgetInputs(full_space=100, effective_space=10, confidence=1.0)


class TestEstimateBudget:

    def test_fitted_model(self, bowl_model):
        estimate, support = estimate_budget(
            bowl_model, ConditionSpec(column="size", value=800), trials=10000, seed=0
        )
        assert support > 0
        assert estimate.inputs.full_space == 1764
        assert estimate.inputs.effective_space == min(1764, max(1, round(support)))
        if estimate.defined:
            assert estimate.probability_at_k >= 0.95
        else:
            assert "allowance" in estimate.reason

    def test_same_seed_same_estimate(self, bowl_model):
        cond = ConditionSpec(column="size", value=800)
        assert estimate_budget(bowl_model, cond, 2000, 4) == estimate_budget(bowl_model, cond, 2000, 4)
