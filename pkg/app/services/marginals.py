"""
Per-column probability integral transforms.

Numeric columns use a moment-fit truncated Gaussian; categorical columns
map each option to a sub-interval of [0, 1) sized by its fitted
frequency. Both move values to standard-normal latents and back.
"""

import logging
from typing import Any, Optional, Sequence, Union

import numpy as np
from scipy.stats import norm, truncnorm

from app.core.errors import DegenerateMarginalError
from app.models.copula import CategoricalMarginal, MarginalTransform, NumericMarginal
from app.models.space import ParameterDef, ParameterKind, ParamValue

logger = logging.getLogger(__name__)

# Latents are clipped to [-LATENT_CLAMP, LATENT_CLAMP]
LATENT_CLAMP = 8.0

# Relative floor of a numeric marginal's std (times hi - lo)
STD_FLOOR = 1e-6

# Pseudo-count given to options absent from the fitting data
CATEGORY_SMOOTHING = 1e-3


def fit_numeric(
    values: Sequence[float],
    lo: float,
    hi: float,
    column: str = "x",
    integer: bool = False,
    points: Optional[Sequence[float]] = None
) -> NumericMarginal:
    """
    Moment-fit a truncated Gaussian on [lo, hi].

    Args:
        values: Observed values, all within [lo, hi]
        lo: Lower truncation bound
        hi: Upper truncation bound
        column: Column name
        integer: Decode by rounding to integers
        points: Grid points for a gridded real column

    Returns:
        NumericMarginal with the sample mean and the (n-1) sample std

    Raises:
        DegenerateMarginalError: Fewer than 2 values
        ValueError: Values outside [lo, hi]
    """
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        raise DegenerateMarginalError(f"column '{column}' needs at least 2 values, got {data.size}")
    if data.min() < lo or data.max() > hi:
        raise ValueError(f"column '{column}' has values outside [{lo}, {hi}]")

    std = max(float(np.std(data, ddof=1)), STD_FLOOR * (hi - lo))
    return NumericMarginal(
        column=column,
        mean=float(np.mean(data)),
        std=std,
        lo=float(lo),
        hi=float(hi),
        integer=integer,
        points=tuple(float(p) for p in points) if points is not None else None
    )


def fit_categorical(
    values: Sequence[str],
    options: Sequence[str],
    column: str = "x"
) -> CategoricalMarginal:
    """
    Fit the frequency-interval encoding of a categorical column.

    Options are ordered by descending count, ties in schema order; options
    never observed get CATEGORY_SMOOTHING pseudo-counts so they stay
    generable.

    Raises:
        ValueError: Empty values or a value outside the options
    """
    options = tuple(str(o) for o in options)
    if len(values) == 0:
        raise ValueError(f"column '{column}' has no values")

    position = {option: i for i, option in enumerate(options)}
    counts = np.zeros(len(options))
    for value in values:
        text = str(value)
        if text not in position:
            raise ValueError(f"unknown category '{text}' in column '{column}'")
        counts[position[text]] += 1

    smoothed = np.where(counts > 0, counts, CATEGORY_SMOOTHING)
    order = sorted(range(len(options)), key=lambda i: (-counts[i], i))
    widths = smoothed[order] / smoothed.sum()
    # Absorb rounding so the widths sum to 1 exactly
    widths[-1] = 1.0 - widths[:-1].sum()

    return CategoricalMarginal(
        column=column,
        options=options,
        ordering=tuple(options[i] for i in order),
        widths=tuple(float(w) for w in widths)
    )


def fit_marginal(param: ParameterDef, values: Sequence[Any]) -> MarginalTransform:
    """
    Fit the marginal matching a parameter's kind.

    A numeric column with a single value falls back to a point mass
    (mean = value, std at its floor).
    """
    if param.kind == ParameterKind.CATEGORICAL:
        return fit_categorical([str(v) for v in values], param.values, column=param.name)

    points = param.grid_points() if param.kind == ParameterKind.REAL and param.grid else None
    integer = param.kind == ParameterKind.INTEGER
    try:
        return fit_numeric(values, param.lo, param.hi, param.name, integer, points)
    except DegenerateMarginalError:
        if len(values) == 0:
            raise
        logger.warning(f"Column '{param.name}' has a single value; using a point-mass marginal")
        return NumericMarginal(
            column=param.name,
            mean=float(values[0]),
            std=STD_FLOOR * (float(param.hi) - float(param.lo)),
            lo=float(param.lo),
            hi=float(param.hi),
            integer=integer,
            points=tuple(float(p) for p in points) if points is not None else None
        )


def _truncated(m: NumericMarginal):
    a = (m.lo - m.mean) / m.std
    b = (m.hi - m.mean) / m.std
    return truncnorm(a, b, loc=m.mean, scale=m.std)


def _category_positions(m: CategoricalMarginal, values: Sequence[Any]) -> np.ndarray:
    position = {option: i for i, option in enumerate(m.ordering)}
    try:
        return np.array([position[str(v)] for v in values], dtype=int)
    except KeyError as e:
        raise ValueError(f"unknown category {e.args[0]!r} in column '{m.column}'") from None


def forward_array(
    m: MarginalTransform,
    values: Sequence[Any],
    rng: Optional[np.random.Generator] = None,
    clamp: float = LATENT_CLAMP
) -> np.ndarray:
    """
    Encode values to standard-normal latents.

    Args:
        m: Fitted marginal
        values: In-domain values
        rng: For categoricals, draw u uniformly inside the category's
            interval; None encodes the interval midpoint
        clamp: Latent clamp

    Returns:
        Finite latents in [-clamp, clamp]

    Raises:
        ValueError: Out-of-domain value
    """
    if isinstance(m, CategoricalMarginal):
        edges = m.edges
        index = _category_positions(m, values)
        left, right = edges[index], edges[index + 1]
        if rng is None:
            u = (left + right) / 2.0
        else:
            u = left + rng.random(len(index)) * (right - left)
    else:
        data = np.asarray(values, dtype=float)
        if data.size and (data.min() < m.lo or data.max() > m.hi):
            raise ValueError(f"value outside [{m.lo}, {m.hi}] in column '{m.column}'")
        u = _truncated(m).cdf(data)

    return np.clip(norm.ppf(u), -clamp, clamp)


def forward(
    m: MarginalTransform,
    value: Any,
    rng: Optional[np.random.Generator] = None,
    clamp: float = LATENT_CLAMP
) -> float:
    """Encode one value (see forward_array)."""
    return float(forward_array(m, [value], rng=rng, clamp=clamp)[0])


def decode_indices(m: MarginalTransform, latents: np.ndarray) -> np.ndarray:
    """
    Decode latents to option positions in the schema's option list.

    Integer columns round to the nearest integer, gridded reals snap to
    the nearest grid point, categoricals pick the interval holding Phi(z).
    """
    z = np.asarray(latents, dtype=float)
    u = norm.cdf(z)

    if isinstance(m, CategoricalMarginal):
        slot = np.searchsorted(m.edges[1:-1], u, side="right")
        schema_position = np.array([m.options.index(o) for o in m.ordering], dtype=int)
        return schema_position[slot]

    x = np.clip(_truncated(m).ppf(u), m.lo, m.hi)
    # ppf can return nan where u underflows to exactly 0 or 1
    x = np.where(np.isnan(x), np.where(z < 0, m.lo, m.hi), x)
    if m.points is not None:
        points = np.asarray(m.points)
        return np.abs(x[:, None] - points[None, :]).argmin(axis=1)
    if m.integer:
        return (np.clip(np.floor(x + 0.5), m.lo, m.hi) - m.lo).astype(int)
    raise ValueError(f"column '{m.column}' has no finite decoding grid")


def inverse_array(m: MarginalTransform, latents: np.ndarray) -> list:
    """Decode latents to canonical values."""
    return [option_value(m, i) for i in decode_indices(m, latents)]


def inverse(m: MarginalTransform, latent: float) -> ParamValue:
    """Decode one latent to a canonical value."""
    return inverse_array(m, np.array([latent]))[0]


def option_value(m: MarginalTransform, index: Union[int, np.integer]) -> ParamValue:
    """Canonical value of an option position."""
    index = int(index)
    if isinstance(m, CategoricalMarginal):
        return m.options[index]
    if m.points is not None:
        return float(m.points[index])
    return int(m.lo) + index


def option_probabilities(m: MarginalTransform) -> np.ndarray:
    """
    Exact generation probability of every option, in schema order.

    Numeric columns integrate the truncated density over each option's
    rounding cell; categoricals return their interval widths.
    """
    if isinstance(m, CategoricalMarginal):
        widths = dict(zip(m.ordering, m.widths))
        return np.array([widths[o] for o in m.options])

    if m.points is not None:
        points = np.asarray(m.points)
    elif m.integer:
        points = np.arange(int(m.lo), int(m.hi) + 1, dtype=float)
    else:
        raise ValueError(f"column '{m.column}' has no finite decoding grid")

    if len(points) == 1:
        return np.ones(1)
    cuts = np.concatenate([[m.lo], (points[:-1] + points[1:]) / 2.0, [m.hi]])
    cdf = _truncated(m).cdf(cuts)
    cdf[0], cdf[-1] = 0.0, 1.0
    return np.clip(np.diff(cdf), 0.0, 1.0)
