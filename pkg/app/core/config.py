"""Configuration management using Pydantic settings."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path("config") / "config.yaml"


class TuningDefaults(BaseModel):
    """
    Default knobs for fitting, sampling, budgeting and tuning.

    PARAMETER PHILOSOPHY:
    - Quantile 0.30 keeps enough prior data for complex tasks without
      collapsing the reachable space; below 0.15 the model over-specifies
    - Budget knobs express "one of the top 1% within k, at 95% confidence"
    - 30 evaluations is the few-shot wall every strategy is held to
    """

    # Filtering
    quantile: float = Field(
        default=0.30,
        gt=0.0,
        le=1.0,
        description="Fraction of best prior records kept per task before fitting"
    )
    quantile_floor: float = Field(
        default=0.15,
        gt=0.0,
        le=1.0,
        description="Quantiles below this value log an over-specification warning"
    )

    # Budget estimation
    budget: int = Field(default=30, ge=1, le=10000, description="Evaluation budget per target task")
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0, description="Required P(>=1 ideal candidate)")
    ideal_fraction: float = Field(default=0.01, gt=0.0, lt=1.0, description="Share of candidates considered ideal")
    allowance: float = Field(
        default=0.05,
        gt=0.0,
        lt=1.0,
        description="Minimum |C_eff|/|C| ratio for which a budget is defined"
    )
    support_trials: int = Field(
        default=10000,
        ge=1000,
        description="Raw draws used to estimate the generable support |C_eff|"
    )

    # Sampling
    attempt_factor: int = Field(
        default=100,
        ge=1,
        description="Sampling gives up after attempt_factor * n raw draws"
    )
    latent_clamp: float = Field(default=8.0, gt=0.0, description="|z| clamp for latent values")

    # Evaluation
    shell_repeats: int = Field(default=3, ge=1, description="Runs per shell evaluation (first one discarded)")
    shell_timeout: float = Field(default=600.0, gt=0.0, description="Shell evaluation timeout in seconds")

    # Simulation
    source_evaluations: int = Field(
        default=200,
        ge=10,
        description="Prior evaluations collected per source task in simulations"
    )
    simulate_workers: int = Field(default=4, ge=1, le=64, description="Concurrent seeds in simulate")


class LoggingConfig(BaseModel):
    """Logging settings."""

    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Log format string"
    )


class AppConfig(BaseModel):
    """Settings read from the YAML configuration file."""

    tuning: TuningDefaults = Field(default_factory=TuningDefaults)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


class Settings(BaseSettings):
    """
    Environment settings.

    Only the output directory may be overridden from the environment
    (COPULATUNE_OUTPUT_DIR); everything else comes from code defaults or
    the YAML file.
    """

    output_dir: str = Field(default="outputs", description="Output directory")

    model_config = SettingsConfigDict(
        env_prefix="COPULATUNE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def load_app_config(path: Optional[Union[str, Path]] = None) -> AppConfig:
    """
    Load the YAML configuration layer.

    Args:
        path: Explicit config file. If None, config/config.yaml is used when
            it exists, otherwise code defaults apply.

    Returns:
        Validated AppConfig

    Raises:
        UsageError: If an explicit file is missing or the content is invalid
    """
    if path is None:
        if not DEFAULT_CONFIG_PATH.exists():
            return AppConfig()
        path = DEFAULT_CONFIG_PATH

    config_path = Path(path)
    if not config_path.exists():
        raise UsageError(f"Config file not found: {config_path}")

    with open(config_path, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}

    try:
        config = AppConfig.model_validate(raw)
    except ValidationError as e:
        raise UsageError(f"Invalid config file {config_path}: {e}") from e

    logger.debug(f"Loaded configuration from {config_path}")
    return config
