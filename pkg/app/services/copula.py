"""Gaussian copula fitting, conditional sampling and support estimation."""

import logging
from typing import Callable, Iterable, NamedTuple, Optional, Set, Tuple

import numpy as np

from app.core.errors import ConditionError, ModelError
from app.models.copula import ConditionSpec, CopulaModel, FitMetadata, SampleBatch
from app.models.dataset import Dataset
from app.models.space import Configuration, ParameterSpace
from app.services import marginals
from app.services.tuning_space import cardinality

logger = logging.getLogger(__name__)

# Conditioning variances at or below this are treated as independent
MIN_CONDITION_VARIANCE = 1e-12

DEFAULT_ATTEMPT_FACTOR = 100

# Raw draws decoded per sampling round, at minimum
MIN_CHUNK = 64


class ConditionalLatent(NamedTuple):
    """Latent distribution of the tunable columns given the task value."""

    mean: np.ndarray
    cov: np.ndarray
    independent: bool


def clip_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to zero."""
    sym = (np.asarray(matrix, dtype=float) + np.asarray(matrix, dtype=float).T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    if eigenvalues.min() >= 0.0:
        return sym
    clipped = (eigenvectors * np.clip(eigenvalues, 0.0, None)) @ eigenvectors.T
    return (clipped + clipped.T) / 2.0


def repair_correlation(matrix: np.ndarray) -> np.ndarray:
    """
    Nearest-PSD repair of a correlation estimate.

    Eigenvalues are clipped at 0, then the result is rescaled back to a
    unit diagonal. A column whose variance vanishes entirely becomes
    uncorrelated with the rest.
    """
    repaired = clip_psd(matrix)
    diag = np.diag(repaired).copy()
    dead = diag <= 0.0
    diag[dead] = 1.0
    scale = 1.0 / np.sqrt(diag)
    repaired = repaired * scale[:, None] * scale[None, :]
    repaired[dead, :] = 0.0
    repaired[:, dead] = 0.0
    repaired = (repaired + repaired.T) / 2.0
    np.fill_diagonal(repaired, 1.0)
    return repaired


def conditional_normal(corr: np.ndarray, index: int, z: float) -> ConditionalLatent:
    """
    Condition a zero-mean Gaussian on one coordinate.

    Args:
        corr: Full latent correlation
        index: Position of the conditioned coordinate
        z: Its latent value

    Returns:
        Mean and Schur-complement covariance over the remaining coordinates
        (in their original order)
    """
    corr = np.asarray(corr, dtype=float)
    keep = [i for i in range(corr.shape[0]) if i != index]
    sigma_uu = corr[np.ix_(keep, keep)]
    sigma_uc = corr[keep, index]
    sigma_cc = corr[index, index]

    if sigma_cc <= MIN_CONDITION_VARIANCE:
        return ConditionalLatent(np.zeros(len(keep)), sigma_uu.copy(), True)

    mean = sigma_uc * (z / sigma_cc)
    cov = clip_psd(sigma_uu - np.outer(sigma_uc, sigma_uc) / sigma_cc)
    return ConditionalLatent(mean, cov, False)


def fit_copula(
    ds: Dataset,
    space: Optional[ParameterSpace] = None,
    seed: int = 0,
    quantile: Optional[float] = None
) -> CopulaModel:
    """
    Fit marginals and the latent correlation of (tunables, task feature).

    The objective column does not take part; filtering already encodes
    performance.

    Args:
        ds: Filtered source data
        space: Space to fit on (defaults to the dataset's)
        seed: Seed of the stochastic categorical encode
        quantile: Filtering quantile, recorded in the metadata

    Returns:
        Immutable CopulaModel

    Raises:
        ModelError: Fewer than 2 records or a mismatched space
    """
    space = space or ds.space
    if ds.space.fingerprint() != space.fingerprint():
        raise ModelError("dataset was loaded against a different space")
    if len(ds) < 2:
        raise ModelError(f"fitting needs at least 2 records, got {len(ds)}")

    warnings = []
    tasks = ds.task_values()
    if len(tasks) < 2:
        message = "fitted on a single task; conditioning only extrapolates"
        warnings.append(message)
        logger.warning(message)

    columns = [[r.config.key[j] for r in ds.records] for j in range(len(space.parameters))]
    columns.append([r.task_value for r in ds.records])
    params = list(space.parameters) + [space.task_feature]

    rng = np.random.default_rng(seed)
    transforms = []
    latents = np.empty((len(ds), len(params)))
    for j, (param, values) in enumerate(zip(params, columns)):
        transform = marginals.fit_marginal(param, values)
        transforms.append(transform)
        latents[:, j] = marginals.forward_array(transform, values, rng=rng)

    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(latents, rowvar=False)
    corr = np.atleast_2d(corr)
    # Constant latent columns correlate with nothing
    corr = np.where(np.isnan(corr), 0.0, corr)
    np.fill_diagonal(corr, 1.0)
    corr = repair_correlation(corr)

    model = CopulaModel(
        space=space,
        fingerprint=space.fingerprint(),
        transforms=tuple(transforms),
        correlation=tuple(tuple(float(v) for v in row) for row in corr),
        metadata=FitMetadata(
            row_count=len(ds),
            quantile=quantile,
            seed=seed,
            task_values=[float(t) for t in tasks],
            warnings=warnings
        )
    )
    logger.info(
        f"Fitted copula on {len(ds)} rows, {len(tasks)} task(s), {len(params)} columns"
    )
    return model


def _dedup_sample(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    rng: np.random.Generator,
    n: int,
    max_attempts: int,
    exclude: Set[Tuple[int, ...]]
) -> Tuple[list, int, int, bool]:
    """Draw index rows until n new distinct rows or max_attempts draws."""
    seen: Set[Tuple[int, ...]] = set()
    accepted = []
    generated = 0
    rejected = 0

    while len(accepted) < n and generated < max_attempts:
        chunk = min(max_attempts - generated, max(MIN_CHUNK, 2 * (n - len(accepted))))
        rows = draw(rng, chunk)
        for row in map(tuple, rows.tolist()):
            generated += 1
            if row in seen or row in exclude:
                rejected += 1
            else:
                seen.add(row)
                accepted.append(row)
                if len(accepted) == n:
                    break

    return accepted, generated, rejected, len(accepted) < n


def _exclusion_keys(space: ParameterSpace, exclude: Optional[Iterable[Configuration]]) -> Set[Tuple[int, ...]]:
    if not exclude:
        return set()
    return {
        tuple(p.option_index(v) for p, v in zip(space.parameters, config.key))
        for config in exclude
    }


def _build_configs(space: ParameterSpace, option_lists, rows) -> Tuple[Configuration, ...]:
    names = space.names
    return tuple(
        Configuration.from_values(names, tuple(options[i] for options, i in zip(option_lists, row)))
        for row in rows
    )


class GaussianCopula:
    """Sampler over a fitted copula model."""

    def __init__(self, model: CopulaModel, clamp: float = marginals.LATENT_CLAMP):
        """
        Initialize sampler.

        Args:
            model: Fitted model
            clamp: Latent clamp
        """
        self.model = model
        self.space = model.space
        self.clamp = clamp
        self.corr = model.corr
        self.task_index = len(model.space.parameters)
        self.tunable_transforms = model.transforms[:self.task_index]
        self.task_transform = model.transforms[self.task_index]
        self._option_lists = self.space.option_lists()
        logger.debug(f"GaussianCopula initialized over {len(model.columns)} columns")

    def condition_latent(self, cond: ConditionSpec) -> float:
        """
        Latent value of a task condition.

        Raises:
            ConditionError: Wrong column or value outside the task domain
        """
        task = self.space.task_feature
        if cond.column != task.name:
            raise ConditionError(f"can only condition on '{task.name}', got '{cond.column}'")
        if not task.lo <= cond.value <= task.hi:
            raise ConditionError(
                f"task value {cond.value} outside [{task.lo}, {task.hi}]"
            )
        return marginals.forward(self.task_transform, cond.value, clamp=self.clamp)

    def conditional_latent(self, cond: Optional[ConditionSpec]) -> ConditionalLatent:
        """
        Latent mean and covariance of the tunables, given the task value.

        Without a condition this is the unconditional N(0, corr_uu).
        """
        if cond is None:
            keep = list(range(self.task_index))
            return ConditionalLatent(
                np.zeros(self.task_index),
                self.corr[np.ix_(keep, keep)],
                True
            )
        z_c = self.condition_latent(cond)
        result = conditional_normal(self.corr, self.task_index, z_c)
        if result.independent:
            logger.warning("Task column has no latent variance; sampling ignores the condition")
        return result

    def _latent_drawer(self, cond: Optional[ConditionSpec]) -> Callable[[np.random.Generator, int], np.ndarray]:
        latent = self.conditional_latent(cond)
        eigenvalues, eigenvectors = np.linalg.eigh(latent.cov)
        factor = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        clamp = self.clamp

        def draw(rng: np.random.Generator, count: int) -> np.ndarray:
            z = latent.mean + rng.standard_normal((count, len(latent.mean))) @ factor.T
            z = np.clip(z, -clamp, clamp)
            return np.column_stack([
                marginals.decode_indices(t, z[:, j])
                for j, t in enumerate(self.tunable_transforms)
            ])

        return draw

    def latent_draws(self, cond: Optional[ConditionSpec], count: int, seed: int) -> np.ndarray:
        """Raw decoded option positions (count x tunables), duplicates kept."""
        return self._latent_drawer(cond)(np.random.default_rng(seed), count)

    def sample(
        self,
        cond: Optional[ConditionSpec],
        n: int,
        seed: int,
        exclude: Optional[Iterable[Configuration]] = None,
        attempt_factor: int = DEFAULT_ATTEMPT_FACTOR
    ) -> SampleBatch:
        """
        Draw n distinct configurations.

        Args:
            cond: Task condition (None for unconditional sampling)
            n: Unique configurations wanted
            seed: Random seed; identical inputs give identical batches
            exclude: Configurations that must not be returned
            attempt_factor: Give up after attempt_factor * n raw draws

        Returns:
            SampleBatch, flagged saturated when the cap was hit first
        """
        if n < 1:
            raise ValueError(f"n must be at least 1, got {n}")
        rows, generated, rejected, saturated = _dedup_sample(
            self._latent_drawer(cond),
            np.random.default_rng(seed),
            n,
            attempt_factor * n,
            _exclusion_keys(self.space, exclude)
        )
        if saturated:
            logger.warning(f"Sampling saturated: {len(rows)} of {n} unique after {generated} draws")
        logger.debug(f"Sampled {len(rows)} configs, {generated} draws, {rejected} rejected")
        return SampleBatch(
            configs=_build_configs(self.space, self._option_lists, rows),
            generated=generated,
            rejected_repeated=rejected,
            saturated=saturated
        )

    def estimate_unique(self, cond: Optional[ConditionSpec], trials: int, seed: int) -> float:
        """
        Estimate the number of distinct configurations the model generates.

        Chao1-style lower bound d + s1^2 / (2 s2 + 1) over `trials` raw draws,
        where s1 and s2 count configurations seen once and twice.
        """
        if trials < 1000:
            raise ValueError(f"trials must be at least 1000, got {trials}")
        rows = self.latent_draws(cond, trials, seed)
        _, counts = np.unique(rows, axis=0, return_counts=True)
        distinct = len(counts)
        singletons = int(np.sum(counts == 1))
        doubletons = int(np.sum(counts == 2))
        estimate = distinct + singletons ** 2 / (2.0 * doubletons + 1.0)
        logger.info(
            f"Support estimate {estimate:.1f} from {trials} draws "
            f"(distinct {distinct}, s1 {singletons}, s2 {doubletons})"
        )
        return float(estimate)


def sample(
    model: CopulaModel,
    cond: Optional[ConditionSpec],
    n: int,
    seed: int,
    exclude: Optional[Iterable[Configuration]] = None,
    attempt_factor: int = DEFAULT_ATTEMPT_FACTOR
) -> SampleBatch:
    """Conditional sampling with duplicate rejection (see GaussianCopula.sample)."""
    return GaussianCopula(model).sample(cond, n, seed, exclude, attempt_factor)


def estimate_unique(model: CopulaModel, cond: Optional[ConditionSpec], trials: int, seed: int) -> float:
    """Support estimate |C_eff| (see GaussianCopula.estimate_unique)."""
    return GaussianCopula(model).estimate_unique(cond, trials, seed)


def random_batch(
    space: ParameterSpace,
    n: int,
    seed: int,
    exclude: Optional[Iterable[Configuration]] = None,
    attempt_factor: int = DEFAULT_ATTEMPT_FACTOR
) -> SampleBatch:
    """
    Uniform i.i.d. sampling over the full space with the same dedup contract.

    Task conditions do not apply to the uniform baseline.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    counts = [p.option_count for p in space.parameters]

    def draw(rng: np.random.Generator, count: int) -> np.ndarray:
        return np.column_stack([rng.integers(0, c, size=count) for c in counts])

    rows, generated, rejected, saturated = _dedup_sample(
        draw,
        np.random.default_rng(seed),
        n,
        attempt_factor * n,
        _exclusion_keys(space, exclude)
    )
    if saturated:
        logger.warning(f"Random sampling saturated: {len(rows)} of {n} unique")
    return SampleBatch(
        configs=_build_configs(space, space.option_lists(), rows),
        generated=generated,
        rejected_repeated=rejected,
        saturated=saturated
    )


def gc_coverage(model: CopulaModel, cond: Optional[ConditionSpec], trials: int, seed: int) -> float:
    """Estimated |C_eff| / |C|, clamped to 1."""
    return min(1.0, estimate_unique(model, cond, trials, seed) / cardinality(model.space))
