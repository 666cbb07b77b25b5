"""Four-stage correction pipeline.

Query generation -> entity retrieval -> context construction -> correction,
wired from a :class:`~hintfix.config.PipelineConfig`.  Loaded resources
(catalog, indices, templates, completion client) live in
:class:`PipelineResources` so experiment sweeps can vary the pipeline
options without re-reading or re-indexing anything.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from types import TracebackType
from typing import Any

from hintfix.bm25 import Bm25Index, bm25_build
from hintfix.catalog import EntityCatalog, load_catalog_file, normalize_text
from hintfix.config import PipelineConfig, RetrieverKind, TaggerKind
from hintfix.context import (
    CorrectionContext,
    build_context,
    filter_candidates,
    no_hints_context,
    render_context,
)
from hintfix.corrector import (
    Backend,
    CorrectionResult,
    SubstitutionPolicy,
    correct_reference,
    correct_remote,
)
from hintfix.encoders import encode_phonetic
from hintfix.exceptions import IndexFormatError, RemoteBackendError
from hintfix.querygen import (
    NeTagger,
    Query,
    QueryStrategy,
    RemoteTagger,
    TemplateSet,
    TemplateTagger,
    all_ngrams,
    default_templates,
    load_templates,
    ne_tag,
    template_match,
)
from hintfix.transport import CompletionClient
from hintfix.vectordb import (
    Bm25Retriever,
    ClusteredIndex,
    DenseRetriever,
    EmbeddingIndex,
    RetrievedEntity,
    Retriever,
    build_index,
    load_index,
    retrieve_grouped,
)

_logger = logging.getLogger(__name__)


@dataclass
class PipelineResources:
    """Everything a pipeline reads but never mutates."""

    catalog: EntityCatalog
    dense_index: EmbeddingIndex
    bm25_index: Bm25Index
    templates: TemplateSet
    clustered: ClusteredIndex | None = None
    client: CompletionClient | None = None

    @classmethod
    def load(cls, config: PipelineConfig) -> PipelineResources:
        """Load the catalog and build or load every index *config* needs.

        Raises:
            ConfigurationError: If no catalog is configured.
            DataError: If an input file is unreadable or malformed.
        """
        catalog = load_catalog_file(config.require_catalog())
        if config.index_path is not None and config.index_path.exists():
            dense_index = load_index(config.index_path)
            if len(dense_index) != len(catalog):
                raise IndexFormatError(
                    f"Index {config.index_path} has {len(dense_index)} rows but the catalog "
                    f"has {len(catalog)} entities; rebuild it with 'hintfix build-index'"
                )
        else:
            dense_index = build_index(catalog)
        templates = (
            load_templates(config.templates_path)
            if config.templates_path is not None
            else default_templates()
        )
        return cls.from_parts(config, catalog, dense_index, templates)

    @classmethod
    def from_parts(
        cls,
        config: PipelineConfig,
        catalog: EntityCatalog,
        dense_index: EmbeddingIndex | None = None,
        templates: TemplateSet | None = None,
    ) -> PipelineResources:
        dense_index = dense_index or build_index(catalog)
        clustered = (
            ClusteredIndex.build(dense_index, seed=config.seed)
            if config.ann_probe is not None
            else None
        )
        client = None
        if config.endpoint:
            client = CompletionClient(
                config.endpoint, timeout=config.timeout, retry=config.retry_config
            )
        return cls(
            catalog=catalog,
            dense_index=dense_index,
            bm25_index=bm25_build(catalog),
            templates=templates or default_templates(),
            clustered=clustered,
            client=client,
        )

    @cached_property
    def phonetic_index(self) -> EmbeddingIndex:
        """Code-only keys, built on first use by a phonetic retriever."""
        return build_index(self.catalog, encode_phonetic)

    def close(self) -> None:
        if self.client is not None:
            self.client.close()


@dataclass
class PipelineOutcome:
    """Everything one hypothesis went through, for output and ``--explain``."""

    hypothesis: str
    normalized: str
    queries: list[Query] = field(default_factory=list)
    candidates: list[RetrievedEntity] = field(default_factory=list)
    context: CorrectionContext | None = None
    result: CorrectionResult | None = None
    error: str | None = None

    @property
    def corrected(self) -> str:
        """The output line; the input verbatim when nothing changed."""
        if self.result is None:
            return self.hypothesis
        if self.result.backend is Backend.REFERENCE and not self.result.changed:
            return self.hypothesis
        return self.result.corrected

    @property
    def rendered_context(self) -> str:
        return render_context(self.context) if self.context is not None else ""


class Pipeline:
    """Configured four-stage pipeline; safe to call from worker threads."""

    def __init__(self, config: PipelineConfig, resources: PipelineResources) -> None:
        self.config = config
        self.resources = resources
        self.policy = SubstitutionPolicy(
            d_sub=config.d_sub, require_improvement=config.require_improvement
        )
        self.retriever = self._make_retriever()
        self.tagger = self._make_tagger()

    @classmethod
    def from_config(cls, config: PipelineConfig) -> Pipeline:
        return cls(config, PipelineResources.load(config))

    def with_options(self, **changes: Any) -> Pipeline:
        """A pipeline sharing these resources with some options changed."""
        return Pipeline(self.config.model_copy(update=changes), self.resources)

    def __enter__(self) -> Pipeline:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.resources.close()

    def _make_retriever(self) -> Retriever:
        if self.config.retriever is RetrieverKind.BM25:
            return Bm25Retriever(self.resources.bm25_index)
        if self.config.retriever is RetrieverKind.PHONETIC:
            return DenseRetriever(
                self.resources.phonetic_index, d_max=self.config.d_max, encoder=encode_phonetic
            )
        return DenseRetriever(
            self.resources.dense_index,
            d_max=self.config.d_max,
            clustered=self.resources.clustered,
            probe=self.config.ann_probe,
        )

    def _make_tagger(self) -> NeTagger:
        if self.config.tagger is TaggerKind.REMOTE and self.resources.client is not None:
            return RemoteTagger(self.resources.client)
        return TemplateTagger(self.resources.templates)

    # -- Stages --

    def queries(self, normalized: str) -> list[Query]:
        """Stage 1: retrieval queries for a normalized hypothesis."""
        strategy = self.config.querygen
        if strategy is QueryStrategy.ALL_NGRAMS:
            return all_ngrams(normalized, self.config.n_max)
        if strategy is QueryStrategy.TEMPLATE:
            return template_match(normalized, self.resources.templates)
        return ne_tag(normalized, self.tagger)

    def retrieve(self, queries: Sequence[Query], k: int | None = None) -> list[RetrievedEntity]:
        """Stage 2: top-k candidates of every query (k defaults to R_max)."""
        groups = retrieve_grouped(self.retriever, queries, k or self.config.r_max)
        return [hit for group in groups for hit in group]

    def build_context(
        self, normalized: str, candidates: Sequence[RetrievedEntity]
    ) -> tuple[list[RetrievedEntity], CorrectionContext]:
        """Stage 3: filter candidates and resolve them into hints."""
        kept = filter_candidates(candidates, self.config.d_max, self.config.r_max)
        ctx = build_context(
            normalized,
            kept,
            self.resources.catalog,
            include_query=self.config.include_query_in_hint,
        )
        return kept, ctx

    def apply_corrector(self, ctx: CorrectionContext) -> CorrectionResult:
        """Stage 4: rewrite the hypothesis."""
        if self.config.corrector is Backend.REMOTE:
            if self.resources.client is None:
                raise RemoteBackendError("No completion endpoint configured")
            return correct_remote(ctx, self.resources.client)
        return correct_reference(ctx, self.policy)

    # -- End to end --

    def correct(
        self,
        hypothesis: str,
        *,
        strict: bool = False,
        no_hints: bool = False,
    ) -> PipelineOutcome:
        """Run all four stages on one hypothesis.

        Remote failures leave the hypothesis uncorrected and are recorded in
        ``outcome.error``; with *strict* they propagate instead.

        Raises:
            RemoteBackendError: Only when *strict* is set.
        """
        outcome = PipelineOutcome(hypothesis=hypothesis, normalized=normalize_text(hypothesis))
        if not outcome.normalized:
            return outcome
        try:
            outcome.queries = self.queries(outcome.normalized)
            if not no_hints:
                outcome.candidates, outcome.context = self.build_context(
                    outcome.normalized, self.retrieve(outcome.queries)
                )
            else:
                outcome.context = no_hints_context(outcome.normalized)
            outcome.result = self.apply_corrector(outcome.context)
        except RemoteBackendError as exc:
            if strict:
                raise
            _logger.warning("Remote backend failed for %r; passing through: %s", hypothesis, exc)
            outcome.error = str(exc)
            outcome.result = None
        return outcome

    def correct_many(
        self,
        hypotheses: Sequence[str],
        *,
        strict: bool = False,
        no_hints: bool = False,
        workers: int | None = None,
    ) -> list[PipelineOutcome]:
        """Correct many hypotheses; output order matches input order."""
        count = workers or self.config.worker_count
        if count == 1 or len(hypotheses) <= 1:
            return [self.correct(h, strict=strict, no_hints=no_hints) for h in hypotheses]
        with ThreadPoolExecutor(max_workers=count) as pool:
            return list(
                pool.map(lambda h: self.correct(h, strict=strict, no_hints=no_hints), hypotheses)
            )
