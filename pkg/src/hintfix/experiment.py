"""Experiment sweeps over retrieval and context options.

Two reports come out of a run:

- recall: recall@k of every retriever x query strategy pair;
- wer: pooled WER for every retriever x query strategy x R_max x hint
  format, plus the "No correction" and "No hints" reference rows.

The WER report is summarized by the change in WER from the smallest to the
largest R_max for each remaining option combination.

Each report has one row per method and one column group per record subset
(``all`` first).  All three are written as TSV and together as ``report.json``;
with fixed inputs and seed the files are byte-identical across runs.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from itertools import product
from pathlib import Path

from pydantic import BaseModel

from hintfix.config import RetrieverKind
from hintfix.evaluation import DEFAULT_K_VALUES, corpus_wer, recall_at_k
from hintfix.exceptions import EvaluationError
from hintfix.pipeline import Pipeline
from hintfix.querygen import QueryStrategy
from hintfix.synth import EvalRecord

_logger = logging.getLogger(__name__)

ALL_SUBSETS = "all"
NO_CORRECTION = "No correction"
NO_HINTS = "No hints"

REPORT_JSON = "report.json"
RECALL_TSV = "recall.tsv"
WER_TSV = "wer.tsv"
R_MAX_TSV = "r_max.tsv"


class RecallRow(BaseModel):
    method: str
    retriever: RetrieverKind
    querygen: QueryStrategy
    recall: dict[str, dict[int, float]]
    gain_at_5: float | None = None


class WerRow(BaseModel):
    method: str
    retriever: RetrieverKind | None = None
    querygen: QueryStrategy | None = None
    r_max: int | None = None
    include_query: bool | None = None
    wer: dict[str, float]
    reduction: dict[str, float]


class RMaxDeltaRow(BaseModel):
    """WER at the largest R_max minus WER at the smallest, per subset."""

    method: str
    retriever: RetrieverKind
    querygen: QueryStrategy
    include_query: bool
    r_max_low: int
    r_max_high: int
    delta: dict[str, float]


class ExperimentReport(BaseModel):
    """Machine-readable sweep results."""

    record_count: int
    seed: int
    subsets: list[str]
    k_values: list[int]
    recall: list[RecallRow]
    wer: list[WerRow]
    r_max_delta: list[RMaxDeltaRow]


def _subsets(records: Sequence[EvalRecord]) -> dict[str, list[int]]:
    """Record positions per subset, ``all`` first, others sorted."""
    groups: dict[str, list[int]] = {ALL_SUBSETS: list(range(len(records)))}
    for name in sorted({r.subset for r in records}):
        if name != ALL_SUBSETS:
            groups[name] = [i for i, r in enumerate(records) if r.subset == name]
    return groups


def _wer_row(
    method: str,
    records: Sequence[EvalRecord],
    outputs: Sequence[str],
    subsets: dict[str, list[int]],
    **options: object,
) -> WerRow:
    wer: dict[str, float] = {}
    reduction: dict[str, float] = {}
    for name, positions in subsets.items():
        result = corpus_wer([records[i] for i in positions], [outputs[i] for i in positions])
        wer[name] = result.corrected.wer
        reduction[name] = result.reduction
    return WerRow.model_validate({"method": method, "wer": wer, "reduction": reduction, **options})


def _method_name(
    retriever: RetrieverKind,
    querygen: QueryStrategy,
    r_max: int | None = None,
    include_query: bool | None = None,
) -> str:
    name = f"{retriever}/{querygen}"
    if r_max is not None:
        name += f" r_max={r_max}"
    if include_query is not None:
        name += f" query={'on' if include_query else 'off'}"
    return name


def _r_max_deltas(
    wer_rows: Sequence[WerRow], r_max_values: Sequence[int], subsets: Sequence[str]
) -> list[RMaxDeltaRow]:
    if len(set(r_max_values)) < 2:
        return []
    low, high = min(r_max_values), max(r_max_values)
    by_key = {
        (row.retriever, row.querygen, row.include_query, row.r_max): row
        for row in wer_rows
        if row.r_max is not None
    }
    deltas: list[RMaxDeltaRow] = []
    for (retriever, querygen, include_query, r_max), row in by_key.items():
        if r_max != low or retriever is None or querygen is None or include_query is None:
            continue
        other = by_key[(retriever, querygen, include_query, high)]
        deltas.append(
            RMaxDeltaRow(
                method=_method_name(retriever, querygen, include_query=include_query),
                retriever=retriever,
                querygen=querygen,
                include_query=include_query,
                r_max_low=low,
                r_max_high=high,
                delta={s: other.wer[s] - row.wer[s] for s in subsets},
            )
        )
    return deltas


def run_experiment(
    pipeline: Pipeline,
    records: Sequence[EvalRecord],
    *,
    retrievers: Sequence[RetrieverKind] = tuple(RetrieverKind),
    querygens: Sequence[QueryStrategy] = tuple(QueryStrategy),
    r_max_values: Sequence[int] = (1, 5),
    include_query_values: Sequence[bool] = (False, True),
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> ExperimentReport:
    """Run the recall and WER sweeps.

    Raises:
        EvaluationError: If there are no records or none has a gold entity.
    """
    if not records:
        raise EvaluationError("Cannot run an experiment over zero records")
    subsets = _subsets(records)
    hypotheses = [r.hypothesis for r in records]
    ks = sorted(set(k_values))

    recall_rows: list[RecallRow] = []
    for retriever, querygen in product(retrievers, querygens):
        variant = pipeline.with_options(retriever=retriever, querygen=querygen)
        recall: dict[str, dict[int, float]] = {}
        for name, positions in subsets.items():
            subset_records = [records[i] for i in positions]
            report = recall_at_k(subset_records, variant.retriever, variant.queries, ks)
            recall[name] = report.recall_at_k
        gain = None
        if 1 in ks and 5 in ks:
            gain = recall[ALL_SUBSETS][5] - recall[ALL_SUBSETS][1]
        recall_rows.append(
            RecallRow(
                method=_method_name(retriever, querygen),
                retriever=retriever,
                querygen=querygen,
                recall=recall,
                gain_at_5=gain,
            )
        )
        _logger.info("Recall %s: %s", recall_rows[-1].method, recall[ALL_SUBSETS])

    wer_rows = [
        _wer_row(NO_CORRECTION, records, hypotheses, subsets),
        _wer_row(
            NO_HINTS,
            records,
            [o.corrected for o in pipeline.correct_many(hypotheses, no_hints=True)],
            subsets,
        ),
    ]
    for retriever, querygen, r_max, include_query in product(
        retrievers, querygens, r_max_values, include_query_values
    ):
        variant = pipeline.with_options(
            retriever=retriever,
            querygen=querygen,
            r_max=r_max,
            include_query_in_hint=include_query,
        )
        outputs = [o.corrected for o in variant.correct_many(hypotheses)]
        wer_rows.append(
            _wer_row(
                _method_name(retriever, querygen, r_max, include_query),
                records,
                outputs,
                subsets,
                retriever=retriever,
                querygen=querygen,
                r_max=r_max,
                include_query=include_query,
            )
        )
        _logger.info("WER %s: %.4f", wer_rows[-1].method, wer_rows[-1].wer[ALL_SUBSETS])

    return ExperimentReport(
        record_count=len(records),
        seed=pipeline.config.seed,
        subsets=list(subsets),
        k_values=ks,
        recall=recall_rows,
        wer=wer_rows,
        r_max_delta=_r_max_deltas(wer_rows, r_max_values, list(subsets)),
    )


# ---------------------------------------------------------------------------
# Tabular views
# ---------------------------------------------------------------------------


def recall_table(report: ExperimentReport) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the recall report (method x subset/k columns)."""
    header = ["method"]
    header += [f"{subset} R@{k}" for subset in report.subsets for k in report.k_values]
    header.append("R@5-R@1")
    rows = []
    for row in report.recall:
        cells = [row.method]
        cells += [f"{row.recall[s][k]:.4f}" for s in report.subsets for k in report.k_values]
        cells.append("" if row.gain_at_5 is None else f"{row.gain_at_5:.4f}")
        rows.append(cells)
    return header, rows


def wer_table(report: ExperimentReport) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the WER report (method x subset columns)."""
    header = ["method"]
    for subset in report.subsets:
        header += [f"{subset} WER", f"{subset} rel. reduction"]
    rows = []
    for row in report.wer:
        cells = [row.method]
        for subset in report.subsets:
            cells += [f"{row.wer[subset]:.4f}", f"{row.reduction[subset]:.4f}"]
        rows.append(cells)
    return header, rows


def r_max_table(report: ExperimentReport) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the R_max summary (WER change per subset)."""
    header = ["method", *(f"{subset} WER change" for subset in report.subsets)]
    rows = []
    for row in report.r_max_delta:
        label = f"{row.method} r_max={row.r_max_low}->{row.r_max_high}"
        rows.append([label, *(f"{row.delta[s]:+.4f}" for s in report.subsets)])
    return header, rows


def _tsv(header: list[str], rows: list[list[str]]) -> str:
    return "".join("\t".join(cells) + "\n" for cells in [header, *rows])


def write_reports(report: ExperimentReport, out_dir: Path) -> list[Path]:
    """Write ``report.json`` and the recall, WER and R_max TSVs into *out_dir*."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / REPORT_JSON, out_dir / RECALL_TSV, out_dir / WER_TSV, out_dir / R_MAX_TSV]
    paths[0].write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    paths[1].write_text(_tsv(*recall_table(report)), encoding="utf-8")
    paths[2].write_text(_tsv(*wer_table(report)), encoding="utf-8")
    paths[3].write_text(_tsv(*r_max_table(report)), encoding="utf-8")
    return paths
