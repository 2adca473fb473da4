"""Tests for dataset loading, quantile filtering, coverage and KL analysis."""

import math

import numpy as np
import pandas as pd
import pytest

from app.core.errors import DatasetError
from app.models.dataset import Dataset, TuningRecord
from app.services.dataset import (
    ANALYZE_QUANTILES,
    analyze,
    avg_marginal_kl,
    coverage,
    filter_report,
    kept_count,
    load_csv,
    load_many,
    per_task_counts,
    quantile_filter,
    reports_to_frame,
    write_csv,
)
from app.services.landscapes import get_landscape
from app.services.tuning_space import enumerate_space
from conftest import make_dataset, make_space


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _one_task(space, objectives, task=200):
    options = [c.key for c in enumerate_space(space)]
    return make_dataset(space, [(options[i % len(options)], task, y) for i, y in enumerate(objectives)])


class TestLoadCsv:

    def test_valid_rows(self, small_space, tmp_path):
        path = _write(tmp_path / "d.csv", "a,b,size,objective\n0,x,200,1.5\n3,z,600,0.5\n1,y,200,2.0\n")
        ds = load_csv(path, small_space)
        assert len(ds) == 3
        assert ds.records[1].config.key == (3, "z")
        assert ds.objectives == [1.5, 0.5, 2.0]

    def test_category_typo_names_row_and_column(self, small_space, tmp_path):
        path = _write(tmp_path / "d.csv", "a,b,size,objective\n0,x,200,1.5\n1,q,200,1.0\n")
        with pytest.raises(DatasetError) as info:
            load_csv(path, small_space)
        assert info.value.row == 2
        assert info.value.column == "b"

    def test_missing_column(self, small_space, tmp_path):
        path = _write(tmp_path / "d.csv", "a,b,objective\n0,x,1.5\n")
        with pytest.raises(DatasetError, match="size"):
            load_csv(path, small_space)

    def test_unparsable_objective(self, small_space, tmp_path):
        path = _write(tmp_path / "d.csv", "a,b,size,objective\n0,x,200,fast\n")
        with pytest.raises(DatasetError) as info:
            load_csv(path, small_space)
        assert info.value.column == "objective"

    def test_missing_file(self, small_space, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            load_csv(tmp_path / "absent.csv", small_space)

    def test_per_task_counts(self, small_space, tmp_path):
        rng = np.random.default_rng(0)
        lines = ["a,b,size,objective"]
        for task in (200, 600, 1000):
            for _ in range(200):
                lines.append(f"{rng.integers(4)},{'xyz'[rng.integers(3)]},{task},{rng.random():.6f}")
        path = _write(tmp_path / "d.csv", "\n".join(lines) + "\n")
        assert per_task_counts(load_csv(path, small_space)) == {200: 200, 600: 200, 1000: 200}

    def test_write_then_load(self, small_space, tmp_path):
        ds = _one_task(small_space, [3.0, 1.0, 2.0, 0.25])
        loaded = load_csv(write_csv(ds, tmp_path / "out.csv"), small_space)
        assert loaded.records == ds.records

    def test_load_many_concatenates_in_file_order(self, small_space, tmp_path):
        first = write_csv(_one_task(small_space, [1.0, 2.0], task=200), tmp_path / "a.csv")
        second = write_csv(_one_task(small_space, [3.0], task=600), tmp_path / "b.csv")
        ds = load_many([first, second], small_space)
        assert ds.objectives == [1.0, 2.0, 3.0]
        assert ds.task_values() == [200, 600]

    def test_concat_rejects_other_space(self, small_space):
        other = make_space({"name": "a", "kind": "integer", "lo": 0, "hi": 5})
        with pytest.raises(DatasetError):
            Dataset.concat([_one_task(small_space, [1.0]), _one_task(other, [1.0])])


class TestQuantileFilter:

    def test_keeps_fastest(self, small_space):
        ds = _one_task(small_space, [5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 10.0])
        assert quantile_filter(ds, 0.3).objectives == [1.0, 3.0, 2.0]

    def test_full_quantile_is_identity(self, small_space):
        ds = _one_task(small_space, [5.0, 1.0, 9.0, 3.0])
        assert quantile_filter(ds, 1.0) == ds

    def test_per_task(self, small_space):
        rows = []
        options = [c.key for c in enumerate_space(small_space)]
        for task in (200, 600):
            for i in range(10):
                rows.append((options[i], task, float(10 - i) + (0.5 if task == 600 else 0.0)))
        filtered = quantile_filter(make_dataset(small_space, rows), 0.5)
        assert per_task_counts(filtered) == {200: 5, 600: 5}

    def test_ties_broken_by_input_order(self, small_space):
        ds = _one_task(small_space, [1.0, 1.0, 1.0, 1.0])
        kept = quantile_filter(ds, 0.5)
        assert kept.records == ds.records[:2]

    def test_count_rule_ignores_float_noise(self):
        assert kept_count(10, 0.3) == 3
        assert kept_count(200, 0.3) == 60
        assert kept_count(7, 0.1) == 1

    @pytest.mark.parametrize("q", [0.0, -0.1, 1.5])
    def test_bad_quantile(self, small_space, q):
        with pytest.raises(ValueError):
            quantile_filter(_one_task(small_space, [1.0]), q)

    def test_empty_dataset(self, small_space):
        with pytest.raises(DatasetError):
            quantile_filter(Dataset(space=small_space), 0.5)

    def test_random_datasets_monotone_and_stable(self, small_space):
        rng = np.random.default_rng(11)
        options = [c.key for c in enumerate_space(small_space)]
        for _ in range(1000):
            n = int(rng.integers(1, 25))
            rows = [
                (options[int(rng.integers(len(options)))], int(rng.choice([200, 600])), float(rng.integers(0, 6)))
                for _ in range(n)
            ]
            ds = make_dataset(small_space, rows)
            q1, q2 = sorted(rng.uniform(0.05, 1.0, size=2))
            low = quantile_filter(ds, q1)
            high = quantile_filter(ds, q2)
            assert set(map(id, low.records)) <= set(map(id, high.records))
            twice = quantile_filter(quantile_filter(ds, q2), q2)
            assert set(map(id, twice.records)) <= set(map(id, high.records))
            assert quantile_filter(high, 1.0) == high
            assert quantile_filter(ds, 1.0) == ds

    @pytest.mark.parametrize("q", [0.3, 0.5, 0.75, 1.0])
    def test_idempotent_when_count_is_stable(self, small_space, q):
        rng = np.random.default_rng(19)
        options = [c.key for c in enumerate_space(small_space)]
        checked = 0
        for _ in range(1000):
            n = int(rng.integers(1, 25))
            rows = [(options[int(rng.integers(len(options)))], 200, float(rng.integers(0, 6))) for _ in range(n)]
            ds = make_dataset(small_space, rows)
            once = quantile_filter(ds, q)
            if kept_count(kept_count(n, q), q) != kept_count(n, q):
                continue
            checked += 1
            assert quantile_filter(once, q) == once
        assert checked > 0


class TestCoverage:

    def test_everything_observed(self, small_space):
        ds = make_dataset(small_space, [(c.key, 200, 1.0) for c in enumerate_space(small_space)])
        assert coverage(ds) == 1.0

    def test_half_of_binary(self):
        space = make_space(
            {"name": "p", "kind": "categorical", "values": ["u", "v"]},
            {"name": "r", "kind": "integer", "lo": 0, "hi": 2},
        )
        ds = make_dataset(space, [(("u", 0), 200, 1.0), (("u", 1), 200, 1.0), (("u", 2), 200, 1.0)])
        assert coverage(ds) == pytest.approx(0.5)

    def test_partial_support(self):
        space = make_space(
            {"name": "p", "kind": "integer", "lo": 0, "hi": 3},
            {"name": "r", "kind": "integer", "lo": 0, "hi": 3},
        )
        ds = make_dataset(space, [((0, 0), 200, 1.0), ((1, 1), 200, 1.0), ((1, 2), 200, 1.0)])
        assert coverage(ds) == pytest.approx(0.375)

    def test_empty(self, small_space):
        assert coverage(Dataset(space=small_space)) == 0.0


class TestMarginalKl:

    def test_identical_is_zero(self, small_space):
        ds = _one_task(small_space, [1.0, 2.0, 3.0, 4.0, 5.0])
        assert avg_marginal_kl(ds, ds) == pytest.approx(0.0, abs=1e-9)

    def test_binary_example(self):
        space = make_space({"name": "p", "kind": "categorical", "values": ["u", "v"]})
        ds = make_dataset(space, [(("u",), 200, 1.0), (("v",), 200, 1.0)])
        ref = make_dataset(space, [(("u",), 200, 1.0)] + [(("v",), 200, 1.0)] * 3)
        expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        assert avg_marginal_kl(ds, ref) == pytest.approx(expected, abs=1e-4)
        assert avg_marginal_kl(ds, ref) == pytest.approx(0.1438, abs=1e-4)

    def test_nonnegative_and_zero_support_finite(self, small_space):
        ds = make_dataset(small_space, [((0, "x"), 200, 1.0)])
        ref = make_dataset(small_space, [((3, "z"), 200, 1.0)])
        value = avg_marginal_kl(ds, ref)
        assert value > 0.0
        assert math.isfinite(value)

    def test_empty_reference(self, small_space):
        with pytest.raises(DatasetError):
            avg_marginal_kl(_one_task(small_space, [1.0]), Dataset(space=small_space))


class TestAnalyze:

    @pytest.fixture(scope="class")
    def exhaustive(self):
        landscape = get_landscape("bowl")
        rows = [
            TuningRecord(config=c, task_value=800, objective=landscape.objective(c, 800))
            for c in enumerate_space(landscape.space)
        ]
        return Dataset(space=landscape.space, records=tuple(rows))

    def test_table_trend(self, exhaustive):
        reference = quantile_filter(exhaustive, 0.1)
        reports = analyze(exhaustive, reference)
        assert [r.quantile for r in reports] == list(ANALYZE_QUANTILES)
        assert len(reports) == 10
        assert reports[0].coverage == 1.0
        coverages = [r.coverage for r in reports]
        assert all(later <= earlier for earlier, later in zip(coverages, coverages[1:]))
        by_q = {r.quantile: r.avg_marginal_kl for r in reports}
        assert by_q[0.5] < by_q[1.0]

    def test_filter_report(self, exhaustive):
        report = filter_report(exhaustive, 0.3)
        assert report.kept == math.ceil(0.3 * len(exhaustive))
        assert report.total == len(exhaustive)
        assert report.avg_marginal_kl is None

    def test_reports_to_frame(self, exhaustive):
        frame = reports_to_frame(analyze(exhaustive, exhaustive, quantiles=(1.0, 0.5)))
        assert isinstance(frame, pd.DataFrame)
        assert list(frame["quantile"]) == [1.0, 0.5]
        assert frame["avg_marginal_kl"].iloc[0] == pytest.approx(0.0, abs=1e-9)
