"""Configuration management for Hintfix.

Settings are read from (highest precedence first) explicit overrides such as
CLI flags, ``HINTFIX_*`` environment variables, a flat ``KEY=value`` config
file, and the defaults below.  A config file looks like::

    HINTFIX_CATALOG_PATH=data/catalog.tsv
    HINTFIX_RETRIEVER=dense
    HINTFIX_QUERYGEN=template
    HINTFIX_R_MAX=1
"""

from __future__ import annotations

import os
from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from hintfix.corrector import DEFAULT_D_SUB, Backend
from hintfix.exceptions import ConfigurationError
from hintfix.querygen import QueryStrategy
from hintfix.transport import DEFAULT_RETRY, RetryConfig

#: Config file picked up from the working directory when none is given.
PROJECT_CONFIG_FILE = ".hintfix.env"


class RetrieverKind(StrEnum):
    DENSE = "dense"
    PHONETIC = "phonetic"
    BM25 = "bm25"


class TaggerKind(StrEnum):
    TEMPLATE = "template"
    REMOTE = "remote"


class PipelineConfig(BaseSettings):
    """Pipeline configuration.

    Defaults follow the best-performing setup: D_max 1.0, R_max 1, N_max 5.
    """

    model_config = SettingsConfigDict(
        env_file=None,
        env_file_encoding="utf-8",
        env_prefix="HINTFIX_",
        case_sensitive=False,
        extra="ignore",
    )

    catalog_path: Path | None = Field(None, description="Entity catalog file")
    index_path: Path | None = Field(
        None, description="Prebuilt embedding index; rebuilt from the catalog when absent"
    )
    templates_path: Path | None = Field(
        None, description="Query template file; built-in music templates when absent"
    )
    homophones_path: Path | None = Field(
        None, description="Homophone lexicon (TSV from<TAB>to) for synthetic corruption"
    )
    retriever: RetrieverKind = Field(RetrieverKind.DENSE, description="Retrieval method")
    querygen: QueryStrategy = Field(
        QueryStrategy.TEMPLATE, description="Query generation strategy"
    )
    tagger: TaggerKind = Field(TaggerKind.TEMPLATE, description="NE tagger for ne_tag queries")
    n_max: int = Field(5, ge=1, description="Longest n-gram for all_ngrams queries")
    d_max: float = Field(1.0, gt=0, description="Euclidean distance cutoff for dense hints")
    r_max: int = Field(1, ge=1, description="Hints kept per query")
    include_query_in_hint: bool = Field(
        False, description="Render hints as '<query> :: <entity>'"
    )
    corrector: Backend = Field(Backend.REFERENCE, description="Correction backend")
    d_sub: float = Field(
        DEFAULT_D_SUB,
        gt=0,
        description="Largest span/entity distance the reference corrector substitutes",
    )
    require_improvement: bool = Field(
        True, description="Skip substitutions whose entity already equals the span"
    )
    endpoint: str | None = Field(None, description="Completion service URL for remote backends")
    timeout: float = Field(30.0, gt=0, description="Completion request timeout in seconds")
    retry_count: int = Field(
        DEFAULT_RETRY.max_retries,
        ge=0,
        description="Maximum number of retries for transient errors (0 to disable)",
    )
    retry_backoff: float = Field(
        DEFAULT_RETRY.backoff_base,
        ge=0,
        description="Base backoff delay in seconds (exponential: base * 2^attempt)",
    )
    retry_max_backoff: float = Field(
        DEFAULT_RETRY.backoff_max,
        ge=0,
        description="Maximum backoff delay in seconds",
    )
    seed: int = Field(0, ge=0, lt=2**64, description="Seed for synthetic data and clustering")
    workers: int | None = Field(
        None, ge=1, description="Worker threads for record-level parallelism (default: CPUs)"
    )
    ann_probe: int | None = Field(
        None,
        ge=1,
        description="Dense retriever: probe this many clusters instead of exact search",
    )

    @model_validator(mode="after")
    def _check_consistency(self) -> PipelineConfig:
        if self.d_sub > self.d_max:
            raise ValueError(f"d_sub ({self.d_sub}) must not exceed d_max ({self.d_max})")
        needs_endpoint = self.corrector is Backend.REMOTE or (
            self.querygen is QueryStrategy.NE_TAG and self.tagger is TaggerKind.REMOTE
        )
        if needs_endpoint and not self.endpoint:
            raise ValueError("A remote corrector or tagger requires HINTFIX_ENDPOINT")
        return self

    @property
    def retry_config(self) -> RetryConfig:
        """Build a :class:`RetryConfig` from the configuration values."""
        return RetryConfig(
            max_retries=self.retry_count,
            backoff_base=self.retry_backoff,
            backoff_max=self.retry_max_backoff,
        )

    @property
    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    def require_catalog(self) -> Path:
        """Return the catalog path.

        Raises:
            ConfigurationError: If no catalog is configured.
        """
        if self.catalog_path is None:
            raise ConfigurationError(
                "No catalog configured. Pass --catalog or set HINTFIX_CATALOG_PATH."
            )
        return self.catalog_path


def detect_config_file(config_path: Path | None = None) -> Path | None:
    """Return the config file to read, if any."""
    if config_path is not None:
        if not config_path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")
        return config_path
    candidate = Path.cwd() / PROJECT_CONFIG_FILE
    return candidate if candidate.exists() else None


def get_config(config_path: Path | None = None, **overrides: Any) -> PipelineConfig:
    """Get the pipeline configuration.

    Args:
        config_path: Explicit path to a config file.
        **overrides: Values that win over environment and file (``None``
            values are ignored, so unset CLI flags fall through).

    Returns:
        PipelineConfig instance.

    Raises:
        ConfigurationError: If the file is missing or a value is invalid.
    """
    selected = detect_config_file(config_path)
    values = {key: value for key, value in overrides.items() if value is not None}
    try:
        return PipelineConfig(_env_file=selected, **values)  # type: ignore[call-arg]
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid configuration: {exc}") from exc
