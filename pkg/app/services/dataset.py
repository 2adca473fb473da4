"""Loading, quantile filtering and distribution analysis of prior tuning data."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import entropy

from app.core.errors import DatasetError
from app.models.dataset import Dataset, FilterReport
from app.models.space import ParameterSpace

logger = logging.getLogger(__name__)

# Additive smoothing per option before KL renormalization
KL_SMOOTHING = 1e-6

# Quantile levels of the filtering analysis table, best-kept-everything first
ANALYZE_QUANTILES = tuple(round(1.0 - 0.1 * i, 1) for i in range(10))


def load_csv(path: Union[str, Path], space: ParameterSpace) -> Dataset:
    """
    Load prior tuning records from CSV.

    Args:
        path: CSV file with a header naming every tunable, the task
            feature and `objective`
        space: Space the records must validate against

    Returns:
        Dataset in file row order

    Raises:
        DatasetError: Missing file or column, unparsable cell, domain violation
    """
    csv_path = Path(path)
    if not csv_path.exists():
        raise DatasetError(f"dataset file not found: {csv_path}")

    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetError(f"cannot parse {csv_path}: {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    ds = Dataset.from_frame(frame, space)
    logger.info(f"Loaded {len(ds)} records from {csv_path}")
    return ds


def load_many(paths: Sequence[Union[str, Path]], space: ParameterSpace) -> Dataset:
    """Load and concatenate several source files over one space."""
    return Dataset.concat([load_csv(p, space) for p in paths])


def write_csv(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset in the format load_csv reads."""
    csv_path = Path(path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    ds.to_frame().to_csv(csv_path, index=False)
    return csv_path


def per_task_counts(ds: Dataset) -> Dict[Union[int, float], int]:
    """Record count per task value."""
    return {task: len(group) for task, group in ds.by_task().items()}


def kept_count(total: int, q: float) -> int:
    """ceil(q * total), immune to binary float noise such as 0.3 * 10."""
    return min(total, math.ceil(round(q * total, 9)))


def quantile_filter(ds: Dataset, q: float) -> Dataset:
    """
    Keep the best ceil(q * n_t) records of every task.

    Ties are broken by input order; the result keeps the input order.

    Args:
        ds: Source dataset
        q: Quantile in (0, 1]

    Returns:
        Filtered dataset

    Raises:
        ValueError: If q lies outside (0, 1]
        DatasetError: If the dataset is empty
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile must lie in (0, 1], got {q}")
    if len(ds) == 0:
        raise DatasetError("cannot filter an empty dataset")

    by_task: Dict[Union[int, float], List[int]] = {}
    for index, record in enumerate(ds.records):
        by_task.setdefault(record.task_value, []).append(index)

    keep = set()
    for indices in by_task.values():
        ranked = sorted(indices, key=lambda i: (ds.records[i].objective, i))
        keep.update(ranked[:kept_count(len(indices), q)])

    kept = [r for i, r in enumerate(ds.records) if i in keep]
    logger.debug(f"Quantile {q}: kept {len(kept)} of {len(ds)} records over {len(by_task)} task(s)")
    return ds.with_records(kept)


def _option_counts(ds: Dataset, space: ParameterSpace) -> List[np.ndarray]:
    counts = [np.zeros(p.option_count) for p in space.parameters]
    for record in ds.records:
        for j, (param, value) in enumerate(zip(space.parameters, record.config.key)):
            counts[j][param.option_index(value)] += 1
    return counts


def _check_space(ds: Dataset, space: ParameterSpace) -> None:
    if ds.space.fingerprint() != space.fingerprint():
        raise DatasetError("dataset was loaded against a different space")


def coverage(ds: Dataset, space: Optional[ParameterSpace] = None) -> float:
    """
    Fraction of the product space reachable from the observed marginal support.

    Returns:
        Product over tunables of observed/total options; 0 for an empty dataset
    """
    space = space or ds.space
    _check_space(ds, space)
    if len(ds) == 0:
        return 0.0
    fraction = 1.0
    for param, counts in zip(space.parameters, _option_counts(ds, space)):
        fraction *= np.count_nonzero(counts) / param.option_count
    return float(fraction)


def avg_marginal_kl(ds: Dataset, ref: Dataset, space: Optional[ParameterSpace] = None) -> float:
    """
    Mean per-parameter KL(P || Q) in nats.

    P and Q are the empirical option distributions of ds and ref, each
    smoothed by KL_SMOOTHING per option and renormalized.

    Raises:
        DatasetError: If either dataset is empty or the spaces differ
    """
    space = space or ds.space
    _check_space(ds, space)
    _check_space(ref, space)
    if len(ds) == 0 or len(ref) == 0:
        raise DatasetError("KL divergence needs two non-empty datasets")

    divergences = []
    for p_counts, q_counts in zip(_option_counts(ds, space), _option_counts(ref, space)):
        p = p_counts / p_counts.sum() + KL_SMOOTHING
        q = q_counts / q_counts.sum() + KL_SMOOTHING
        divergences.append(entropy(p / p.sum(), q / q.sum()))
    return float(max(0.0, np.mean(divergences)))


def filter_report(ds: Dataset, q: float, ref: Optional[Dataset] = None) -> FilterReport:
    """Filter at q and measure coverage (and KL against ref when given)."""
    filtered = quantile_filter(ds, q)
    return FilterReport(
        quantile=q,
        kept=len(filtered),
        total=len(ds),
        coverage=coverage(filtered),
        avg_marginal_kl=avg_marginal_kl(filtered, ref) if ref is not None else None
    )


def analyze(
    ds: Dataset,
    ref: Dataset,
    quantiles: Sequence[float] = ANALYZE_QUANTILES
) -> List[FilterReport]:
    """
    Coverage and KL of the filtered data at each quantile level.

    Args:
        ds: Source dataset
        ref: Reference dataset (e.g. the top 10% of an exhaustive run)
        quantiles: Levels to report, in output order

    Returns:
        One FilterReport per level
    """
    reports = [filter_report(ds, q, ref) for q in quantiles]
    logger.info(f"Analyzed {len(reports)} quantile levels over {len(ds)} records")
    return reports


def reports_to_frame(reports: Sequence[FilterReport]) -> pd.DataFrame:
    """Tabular form of analysis rows."""
    return pd.DataFrame([r.model_dump() for r in reports])
