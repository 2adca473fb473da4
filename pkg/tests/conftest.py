"""Shared fixtures: small spaces, synthetic datasets and fitted models."""

from typing import Iterable, Tuple

import pytest

from app.models.dataset import Dataset, TuningRecord
from app.models.space import Configuration, ParameterSpace
from app.services.copula import fit_copula
from app.services.dataset import quantile_filter
from app.services.landscapes import collect_source_dataset, get_landscape

TASK = {"name": "size", "kind": "integer", "lo": 100, "hi": 2000}


def make_space(*parameters: dict, task: dict = TASK) -> ParameterSpace:
    """Space from parameter dicts and a task feature."""
    return ParameterSpace.from_dict({"parameters": list(parameters), "task_feature": task})


def make_dataset(space: ParameterSpace, rows: Iterable[Tuple[tuple, int, float]]) -> Dataset:
    """Dataset from (values, task, objective) rows."""
    records = [
        TuningRecord(
            config=Configuration.from_values(space.names, tuple(values)),
            task_value=task,
            objective=objective
        )
        for values, task, objective in rows
    ]
    return Dataset(space=space, records=tuple(records))


@pytest.fixture
def small_space() -> ParameterSpace:
    """Integer a in 0..3 and categorical b in {x, y, z}: 12 configurations."""
    return make_space(
        {"name": "a", "kind": "integer", "lo": 0, "hi": 3, "default": 0},
        {"name": "b", "kind": "categorical", "values": ["x", "y", "z"], "default": "x"},
    )


@pytest.fixture
def bowl():
    return get_landscape("bowl")


@pytest.fixture(scope="session")
def bowl_source() -> Dataset:
    """Prior data on the bowl landscape: 200 evaluations at each source task."""
    return collect_source_dataset(get_landscape("bowl"), evaluations=200, seed=0)


@pytest.fixture(scope="session")
def bowl_model(bowl_source):
    """Copula fitted on the best 30% of the bowl source data."""
    return fit_copula(quantile_filter(bowl_source, 0.3), seed=0, quantile=0.3)
