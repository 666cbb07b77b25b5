"""Hintfix: retrieval-augmented correction of named-entity errors in ASR output.

Quick start as a library::

    from pathlib import Path

    from hintfix import Pipeline, get_config

    config = get_config(catalog_path=Path("catalog.tsv"), r_max=1)
    with Pipeline.from_config(config) as pipeline:
        outcome = pipeline.correct("play the weekend")
        print(outcome.corrected)        # "play the weeknd"
        print(outcome.rendered_context) # "[H] the weeknd [A] play the weekend [P]"

Building blocks can be used on their own::

    from hintfix import build_index, knn, load_catalog_file, encode_dense

    catalog = load_catalog_file(Path("catalog.tsv"))
    index = build_index(catalog)
    neighbors = knn(index, encode_dense("the weekend"), k=5)
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__: str = version("hintfix")
except PackageNotFoundError:
    # Editable install without a tag, or running from source checkout
    __version__ = "0.0.0.dev0"

from hintfix.catalog import Entity, EntityCatalog, load_catalog, load_catalog_file, normalize_text
from hintfix.config import PipelineConfig, get_config
from hintfix.context import CorrectionContext, build_context, parse_context, render_context
from hintfix.corrector import Backend, CorrectionResult, correct_reference, correct_remote
from hintfix.encoders import dense_distance, encode_dense, encode_phonetic
from hintfix.exceptions import (
    ConfigurationError,
    DataError,
    EncodingError,
    EntityNotFoundError,
    EvaluationError,
    HintfixError,
    RemoteBackendError,
    TransportError,
)
from hintfix.pipeline import Pipeline, PipelineOutcome
from hintfix.querygen import Query, QueryStrategy, all_ngrams, ne_tag, template_match
from hintfix.transport import CompletionClient, RetryConfig
from hintfix.vectordb import EmbeddingIndex, build_index, knn

__all__ = [
    "Backend",
    "CompletionClient",
    "ConfigurationError",
    "CorrectionContext",
    "CorrectionResult",
    "DataError",
    "EmbeddingIndex",
    "EncodingError",
    "Entity",
    "EntityCatalog",
    "EntityNotFoundError",
    "EvaluationError",
    "HintfixError",
    "Pipeline",
    "PipelineConfig",
    "PipelineOutcome",
    "Query",
    "QueryStrategy",
    "RemoteBackendError",
    "RetryConfig",
    "TransportError",
    "all_ngrams",
    "build_context",
    "build_index",
    "correct_reference",
    "correct_remote",
    "dense_distance",
    "encode_dense",
    "encode_phonetic",
    "get_config",
    "knn",
    "load_catalog",
    "load_catalog_file",
    "ne_tag",
    "normalize_text",
    "parse_context",
    "render_context",
    "template_match",
]
