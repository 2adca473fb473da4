"""
Synthetic tuning landscapes with known optima.

Every landscape shares the task feature `size` (integer, 100..2000), three
source tasks used to collect prior data, and three targets: SM and ML lie
between the source tasks, XL lies beyond them.
"""

import itertools
import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np

from app.core.errors import UnknownLandscapeError
from app.models.dataset import Dataset, TuningRecord
from app.models.space import Configuration, ParameterSpace

logger = logging.getLogger(__name__)

TASK_FEATURE = {"name": "size", "kind": "integer", "lo": 100, "hi": 2000}
SOURCE_TASKS = (200, 600, 1000)
TARGET_TASKS = {"SM": 400, "ML": 800, "XL": 1400}

# Mutation parents come from this many best configurations of a task
ELITE_SIZE = 5


def _scale(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Task position: 0 at size 100, 1 at size 1500."""
    return (np.asarray(t, dtype=float) - 100.0) / 1400.0


class Landscape(ABC):
    """Analytic objective f(c; t) over a small tuning space."""

    name: str = "landscape"
    description: str = ""

    def __init__(self):
        self.space = ParameterSpace.from_dict(self.schema())
        self.source_tasks: Tuple[int, ...] = SOURCE_TASKS
        self.targets: Dict[str, int] = dict(TARGET_TASKS)

    @staticmethod
    @abstractmethod
    def schema() -> dict:
        """Space schema document."""
        pass

    @abstractmethod
    def evaluate_columns(self, columns: Dict[str, np.ndarray], t: float) -> np.ndarray:
        """
        Vectorized objective.

        Args:
            columns: Parameter name -> array of values (categoricals as str)
            t: Task value

        Returns:
            Objective per row
        """
        pass

    def objective(self, config: Configuration, t: Union[int, float]) -> float:
        """Objective of one configuration."""
        columns = {name: np.array([value]) for name, value in config.values}
        return float(self.evaluate_columns(columns, float(t))[0])

    def default_configuration(self) -> Configuration:
        """Untuned baseline configuration."""
        return self.space.default_configuration()

    def target(self, label: str) -> int:
        """Task value of a target label (SM, ML or XL)."""
        if label not in self.targets:
            raise KeyError(f"unknown target '{label}', expected one of {sorted(self.targets)}")
        return self.targets[label]


class QuadraticBowl(Landscape):
    """Task-scaled bowl over two tile sizes, gated by an unroll factor."""

    name = "bowl"
    description = "quadratic bowl over tile sizes whose center moves with size, unroll gate"

    UNROLL = {"1": 1.6, "2": 1.3, "4": 1.0, "8": 1.2}

    @staticmethod
    def schema() -> dict:
        return {
            "parameters": [
                {"name": "tile_i", "kind": "integer", "lo": 0, "hi": 20, "default": 0},
                {"name": "tile_j", "kind": "integer", "lo": 0, "hi": 20, "default": 0},
                {"name": "unroll", "kind": "categorical", "values": ["1", "2", "4", "8"], "default": "1"},
            ],
            "task_feature": TASK_FEATURE,
        }

    def evaluate_columns(self, columns: Dict[str, np.ndarray], t: float) -> np.ndarray:
        s = _scale(t)
        x_star = 2.0 + 16.0 * s
        y_star = 18.0 - 12.0 * s
        x = columns["tile_i"].astype(float)
        y = columns["tile_j"].astype(float)
        gate = np.array([self.UNROLL[str(u)] for u in columns["unroll"]])
        return (t / 100.0) * (1.0 + 0.01 * ((x - x_star) ** 2 + (y - y_star) ** 2)) * gate


class CategoricalSwitch(Landscape):
    """The best schedule switches from static to dynamic as size grows."""

    name = "switch"
    description = "best schedule flips from static to dynamic around size 400"

    @staticmethod
    def schema() -> dict:
        return {
            "parameters": [
                {
                    "name": "schedule",
                    "kind": "categorical",
                    "values": ["static", "dynamic", "guided"],
                    "default": "static",
                },
                {"name": "chunk", "kind": "integer", "lo": 1, "hi": 32, "default": 1},
                {"name": "threads", "kind": "integer", "lo": 1, "hi": 16, "default": 1},
            ],
            "task_feature": TASK_FEATURE,
        }

    @staticmethod
    def schedule_penalty(schedule: str, t: float) -> float:
        """Multiplier of a schedule at task t."""
        w = 1.0 / (1.0 + np.exp(-(t - 400.0) / 50.0))
        if schedule == "static":
            return 1.0 + 0.1 * w
        if schedule == "dynamic":
            return 1.1 - 0.1 * w
        return 1.3 - 0.05 * w

    def evaluate_columns(self, columns: Dict[str, np.ndarray], t: float) -> np.ndarray:
        s = _scale(t)
        c_star = 4.0 + 20.0 * s
        th_star = 2.0 + 10.0 * s
        c = columns["chunk"].astype(float)
        th = columns["threads"].astype(float)
        penalty = np.array([self.schedule_penalty(str(v), t) for v in columns["schedule"]])
        shape = 1.0 + 0.004 * (c - c_star) ** 2 + 0.016 * (th - th_star) ** 2
        return (t / 100.0) * shape * penalty


class RuggedInteraction(Landscape):
    """Tilted elliptical valley with small periodic ruggedness."""

    name = "rugged"
    description = "coupled x/y valley with ripples and a mild layout choice"

    LAYOUT = {"row": 1.12, "col": 1.2, "blocked": 1.0}

    @staticmethod
    def schema() -> dict:
        return {
            "parameters": [
                {"name": "x", "kind": "integer", "lo": 0, "hi": 24, "default": 0},
                {"name": "y", "kind": "integer", "lo": 0, "hi": 24, "default": 0},
                {"name": "layout", "kind": "categorical", "values": ["row", "col", "blocked"], "default": "row"},
            ],
            "task_feature": TASK_FEATURE,
        }

    def evaluate_columns(self, columns: Dict[str, np.ndarray], t: float) -> np.ndarray:
        s = _scale(t)
        u = columns["x"].astype(float) - (4.0 + 14.0 * s)
        v = columns["y"].astype(float) - (20.0 - 12.0 * s)
        valley = 0.003 * (u + v) ** 2 + 0.012 * (u - v) ** 2
        ripple = 0.05 * np.sin(0.9 * columns["x"]) ** 2 * np.sin(0.7 * columns["y"]) ** 2
        layout = np.array([self.LAYOUT[str(option)] for option in columns["layout"]])
        return (t / 100.0) * (1.0 + valley + ripple) * layout


LANDSCAPES: Dict[str, Type[Landscape]] = {
    QuadraticBowl.name: QuadraticBowl,
    CategoricalSwitch.name: CategoricalSwitch,
    RuggedInteraction.name: RuggedInteraction,
}


def available_landscapes() -> List[str]:
    """Registered landscape names."""
    return sorted(LANDSCAPES)


def get_landscape(name: str) -> Landscape:
    """
    Instantiate a landscape by name.

    Raises:
        UnknownLandscapeError: Listing the registered names
    """
    if name not in LANDSCAPES:
        raise UnknownLandscapeError(name, available_landscapes())
    return LANDSCAPES[name]()


def _columns(space: ParameterSpace) -> Dict[str, np.ndarray]:
    rows = list(itertools.product(*space.option_lists()))
    return {
        param.name: np.array([row[j] for row in rows], dtype=object if not param.is_numeric else None)
        for j, param in enumerate(space.parameters)
    }


def brute_force(landscape: Landscape, t: Union[int, float]) -> np.ndarray:
    """Objective of every configuration, in enumeration order."""
    return landscape.evaluate_columns(_columns(landscape.space), float(t))


def top_fraction_threshold(objectives: np.ndarray, fraction: float = 0.1) -> float:
    """Objective of the worst configuration still inside the best `fraction`."""
    ordered = np.sort(np.asarray(objectives, dtype=float))
    count = max(1, int(np.ceil(round(fraction * len(ordered), 9))))
    return float(ordered[count - 1])


def rank_fraction(objectives: np.ndarray, value: float) -> float:
    """Share of configurations strictly better than value."""
    objectives = np.asarray(objectives, dtype=float)
    return float(np.count_nonzero(objectives < value) / len(objectives))


def _mutate(
    parent: Tuple[int, ...],
    counts: Sequence[int],
    categorical: Sequence[bool],
    rng: np.random.Generator
) -> Tuple[int, ...]:
    child = list(parent)
    d = len(parent)
    flips = rng.random(d) < 1.0 / d
    if not flips.any():
        flips[rng.integers(d)] = True
    for j in np.flatnonzero(flips):
        if counts[j] == 1:
            continue
        if categorical[j]:
            other = rng.integers(counts[j] - 1)
            child[j] = int(other if other < parent[j] else other + 1)
        else:
            step = int(rng.choice([-2, -1, 1, 2]))
            child[j] = int(np.clip(parent[j] + step, 0, counts[j] - 1))
    return tuple(child)


def collect_source_dataset(
    landscape: Landscape,
    tasks: Optional[Sequence[int]] = None,
    evaluations: int = 200,
    seed: int = 0,
    warmup: Optional[int] = None
) -> Dataset:
    """
    Prior tuning data from a seeded evolutionary local search per task.

    A random warm-up is followed by mutations of configurations drawn from
    the current elite. No configuration is evaluated twice for a task.

    Args:
        landscape: Landscape to search
        tasks: Task values (defaults to the landscape's source tasks)
        evaluations: Evaluations per task
        seed: Random seed
        warmup: Random evaluations before the search starts

    Returns:
        Dataset holding every evaluation, task by task
    """
    tasks = tuple(tasks if tasks is not None else landscape.source_tasks)
    space = landscape.space
    options = space.option_lists()
    counts = [p.option_count for p in space.parameters]
    categorical = [not p.is_numeric for p in space.parameters]
    total = int(np.prod(counts))
    evaluations = min(evaluations, total)
    warmup = warmup if warmup is not None else max(10, evaluations // 5)
    names = space.names

    records: List[TuningRecord] = []
    for task_index, t in enumerate(tasks):
        rng = np.random.default_rng([seed, task_index])
        seen: Dict[Tuple[int, ...], float] = {}

        def measure(row: Tuple[int, ...]) -> None:
            config = Configuration.from_values(names, tuple(o[i] for o, i in zip(options, row)))
            seen[row] = landscape.objective(config, t)
            records.append(TuningRecord(config=config, task_value=t, objective=seen[row]))

        while len(seen) < evaluations:
            if len(seen) < warmup:
                row = tuple(int(rng.integers(c)) for c in counts)
            else:
                elite = sorted(seen, key=seen.get)[:ELITE_SIZE]
                parent = elite[int(rng.integers(len(elite)))]
                row = _mutate(parent, counts, categorical, rng)
                attempts = 0
                while row in seen and attempts < 20:
                    row = _mutate(parent, counts, categorical, rng)
                    attempts += 1
                if row in seen:
                    row = tuple(int(rng.integers(c)) for c in counts)
            if row not in seen:
                measure(row)

    logger.info(
        f"Collected {len(records)} source evaluations on '{landscape.name}' over tasks {list(tasks)}"
    )
    return Dataset(space=space, records=tuple(records))
