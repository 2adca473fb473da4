"""Tests for the per-column probability integral transforms."""

import numpy as np
import pytest
from scipy.stats import norm, truncnorm

from app.core.errors import DegenerateMarginalError
from app.models.copula import CategoricalMarginal, NumericMarginal
from app.services.marginals import (
    CATEGORY_SMOOTHING,
    LATENT_CLAMP,
    decode_indices,
    fit_categorical,
    fit_marginal,
    fit_numeric,
    forward,
    forward_array,
    inverse,
    inverse_array,
    option_probabilities,
)
from conftest import make_space


class TestFitNumeric:

    def test_moments(self):
        m = fit_numeric([1, 2, 3, 4, 5], 0, 10, column="n", integer=True)
        assert m.mean == pytest.approx(3.0)
        assert m.std == pytest.approx(np.std([1, 2, 3, 4, 5], ddof=1))
        assert m.integer

    def test_std_floor(self):
        m = fit_numeric([4, 4, 4], 0, 10)
        assert m.std == pytest.approx(1e-6 * 10)

    def test_needs_two_values(self):
        with pytest.raises(DegenerateMarginalError):
            fit_numeric([3.0], 0, 10)

    def test_values_outside_bounds(self):
        with pytest.raises(ValueError):
            fit_numeric([1, 11], 0, 10)

    def test_single_value_point_mass(self):
        param = make_space({"name": "n", "kind": "integer", "lo": 0, "hi": 20}).parameters[0]
        m = fit_marginal(param, [7])
        assert isinstance(m, NumericMarginal)
        assert inverse(m, 0.0) == 7
        assert inverse(m, 3.0) == 7


class TestFitCategorical:

    def test_ordering_by_count_then_schema(self):
        m = fit_categorical(["b", "c", "b", "a", "c", "b"], ["a", "b", "c", "d"])
        assert m.ordering == ("b", "c", "a", "d")
        assert sum(m.widths) == pytest.approx(1.0)
        assert m.widths[0] > m.widths[1] > m.widths[2] > m.widths[3] > 0.0

    def test_unseen_option_gets_pseudo_count(self):
        m = fit_categorical(["a", "a"], ["a", "b"])
        assert m.widths[1] == pytest.approx(CATEGORY_SMOOTHING / (2 + CATEGORY_SMOOTHING))

    def test_unknown_value(self):
        with pytest.raises(ValueError, match="unknown category"):
            fit_categorical(["z"], ["a", "b"])


class TestTransforms:

    def test_latents_are_clamped(self):
        m = fit_numeric([5.0, 5.1, 4.9], 0, 100)
        z = forward_array(m, [0.0, 100.0])
        assert np.all(np.abs(z) <= LATENT_CLAMP)
        assert np.all(np.isfinite(z))

    def test_out_of_domain(self):
        m = fit_numeric([1, 2, 3], 0, 10)
        with pytest.raises(ValueError):
            forward(m, 11)
        c = fit_categorical(["a"], ["a", "b"])
        with pytest.raises(ValueError):
            forward(c, "q")

    def test_stochastic_categorical_stays_in_interval(self):
        m = fit_categorical(["a", "b", "b", "c"], ["a", "b", "c"])
        rng = np.random.default_rng(3)
        z = forward_array(m, ["a"] * 500, rng=rng)
        u = norm.cdf(z)
        position = m.ordering.index("a")
        assert np.all(u >= m.edges[position] - 1e-12)
        assert np.all(u <= m.edges[position + 1] + 1e-12)
        assert inverse_array(m, z) == ["a"] * 500

    def test_decode_returns_schema_positions(self):
        m = fit_categorical(["c", "c", "a"], ["a", "b", "c"])
        assert list(decode_indices(m, forward_array(m, ["a", "b", "c"]))) == [0, 1, 2]

    def test_round_trip_random_schemas(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            kind = rng.integers(3)
            if kind == 0:
                lo = int(rng.integers(-50, 50))
                hi = lo + int(rng.integers(1, 60))
                values = rng.integers(lo, hi + 1, size=int(rng.integers(5, 30)))
                m = fit_numeric(values, lo, hi, integer=True)
                assert inverse_array(m, forward_array(m, values)) == [int(v) for v in values]
            elif kind == 1:
                options = [f"o{i}" for i in range(int(rng.integers(1, 8)))]
                values = [options[i] for i in rng.integers(len(options), size=int(rng.integers(1, 30)))]
                m = fit_categorical(values, options)
                assert inverse_array(m, forward_array(m, values)) == values
            else:
                count = int(rng.integers(2, 40))
                param = make_space(
                    {"name": "r", "kind": "real", "lo": 0.5, "hi": 64.0, "grid": {"count": count, "spacing": "log"}}
                ).parameters[0]
                points = param.grid_points()
                values = points[rng.integers(count, size=int(rng.integers(5, 30)))]
                m = fit_marginal(param, list(values))
                decoded = np.array(inverse_array(m, forward_array(m, values)))
                step = np.max(np.diff(points))
                assert np.all(np.abs(decoded - values) <= step)

    def test_bounds_decode_to_bounds(self):
        m = fit_numeric([3, 4, 5, 6], 0, 9, integer=True)
        assert inverse(m, -LATENT_CLAMP) == 0
        assert inverse(m, LATENT_CLAMP) == 9
        assert inverse_array(m, forward_array(m, [0, 9])) == [0, 9]

    def test_decoded_mean_matches_truncated_mean(self):
        m = NumericMarginal(column="n", mean=400.0, std=150.0, lo=0.0, hi=1000.0, integer=True)
        decoded = np.array(inverse_array(m, np.random.default_rng(13).standard_normal(10_000)))
        a, b = (m.lo - m.mean) / m.std, (m.hi - m.mean) / m.std
        expected = truncnorm.mean(a, b, loc=m.mean, scale=m.std)
        standard_error = truncnorm.std(a, b, loc=m.mean, scale=m.std) / np.sqrt(len(decoded))
        assert abs(decoded.mean() - expected) < 3 * standard_error


class TestOptionProbabilities:

    def test_numeric_sums_to_one(self):
        m = fit_numeric([2, 3, 3, 4, 5], 0, 8, integer=True)
        probs = option_probabilities(m)
        assert len(probs) == 9
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.argmax(probs) in (3, 4)

    def test_categorical_in_schema_order(self):
        m = fit_categorical(["b", "b", "a"], ["a", "b", "c"])
        probs = option_probabilities(m)
        assert isinstance(m, CategoricalMarginal)
        assert probs[1] > probs[0] > probs[2] > 0.0
        assert probs.sum() == pytest.approx(1.0)

    def test_matches_sampling_frequencies(self):
        m = fit_numeric([1, 2, 2, 3, 3, 3, 4], 0, 6, integer=True)
        rng = np.random.default_rng(5)
        decoded = decode_indices(m, rng.standard_normal(200_000))
        observed = np.bincount(decoded, minlength=7) / 200_000
        assert observed == pytest.approx(option_probabilities(m), abs=0.01)
