"""Cardinality, enumeration and validation of tuning spaces."""

import itertools
import logging
import math
from typing import Any, Dict, Iterator, Mapping, Optional

from app.core.errors import CardinalityCapError, ConfigurationValidationError
from app.models.space import Configuration, ParameterSpace

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 100_000


def cardinality(space: ParameterSpace) -> int:
    """
    Size |C| of the tuning space.

    Python integers make the product exact for any schema size.

    Args:
        space: Tuning space

    Returns:
        Product of per-parameter option counts
    """
    return math.prod(param.option_count for param in space.parameters)


def enumerate_space(
    space: ParameterSpace,
    cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[Configuration]:
    """
    Yield every configuration exactly once.

    Order is lexicographic in schema order: the first parameter varies
    slowest, options follow their declared order.

    Args:
        space: Tuning space
        cap: Refuse spaces larger than this

    Yields:
        Configurations

    Raises:
        CardinalityCapError: If |C| exceeds the cap (raised before yielding)
    """
    size = cardinality(space)
    if size > cap:
        raise CardinalityCapError(size, cap)
    return _product(space)


def _product(space: ParameterSpace) -> Iterator[Configuration]:
    names = space.names
    for values in itertools.product(*space.option_lists()):
        yield Configuration.from_values(names, values)


def validate_configuration(space: ParameterSpace, raw: Mapping[str, Any]) -> Configuration:
    """
    Turn a raw name->value record into a well-typed configuration.

    Args:
        space: Tuning space
        raw: Raw values, e.g. a CSV row or a decoded JSON object

    Returns:
        Validated configuration

    Raises:
        ConfigurationValidationError: Listing every violating field
    """
    violations = []
    known = set(space.names)

    for name in raw:
        if name not in known:
            violations.append(f"{name}: unknown parameter")

    values = []
    for param in space.parameters:
        if param.name not in raw:
            violations.append(f"{param.name}: missing value")
            continue
        try:
            values.append(param.coerce(raw[param.name]))
        except ValueError as e:
            violations.append(f"{param.name}: {e}")

    if violations:
        raise ConfigurationValidationError(violations)

    return Configuration.from_values(space.names, tuple(values))


def serialize_configuration(config: Configuration) -> Dict[str, Any]:
    """Plain name->value mapping accepted back by validate_configuration."""
    return config.as_dict()


def space_summary(space: ParameterSpace, cap: Optional[int] = None) -> Dict[str, Any]:
    """Compact description of a space for logs."""
    summary = {
        "parameters": len(space.parameters),
        "task_feature": space.task_feature.name,
        "cardinality": cardinality(space),
        "fingerprint": space.fingerprint(),
    }
    if cap is not None:
        summary["enumerable"] = summary["cardinality"] <= cap
    return summary
