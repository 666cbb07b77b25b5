"""Main CLI application for Hintfix."""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from hintfix.bm25 import bm25_build
from hintfix.catalog import load_catalog_file, normalize_text, write_catalog
from hintfix.config import PipelineConfig, RetrieverKind, TaggerKind, get_config
from hintfix.corrector import Backend
from hintfix.display import configure_output, display_outcomes, display_retrieval, print_table
from hintfix.exceptions import (
    ConfigurationError,
    DataError,
    EncodingError,
    EntityNotFoundError,
    EvaluationError,
    HintfixError,
    TransportError,
)
from hintfix.experiment import (
    r_max_table,
    recall_table,
    run_experiment,
    wer_table,
    write_reports,
)
from hintfix.pipeline import Pipeline
from hintfix.querygen import QueryStrategy
from hintfix.synth import (
    DEFAULT_CARRIERS,
    CorruptionModel,
    EvalRecord,
    generate_catalog,
    generate_records,
    iter_records,
    load_homophones,
    read_records,
    write_records,
)
from hintfix.vectordb import build_index, retrieve_grouped, save_index

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REMOTE = 3

_logger = logging.getLogger("hintfix")
_log_handler: logging.Handler | None = None

console = Console()
err_console = Console(stderr=True)


@contextmanager
def _handle_errors() -> Iterator[None]:
    """Catch Hintfix exceptions and exit with a formatted error message."""
    try:
        yield
    except ConfigurationError as e:
        err_console.print(f"[red]Configuration error:[/red] {escape(str(e))}")
        raise typer.Exit(EXIT_USAGE) from e
    except (DataError, EncodingError, EntityNotFoundError, EvaluationError) as e:
        err_console.print(f"[red]Data error:[/red] {escape(str(e))}")
        raise typer.Exit(EXIT_DATA) from e
    except TransportError as e:
        err_console.print(f"[red]Remote backend error:[/red] {escape(str(e))}")
        raise typer.Exit(EXIT_REMOTE) from e
    except HintfixError as e:
        err_console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(EXIT_USAGE) from e


app = typer.Typer(
    name="hintfix",
    help="Retrieval-augmented correction of named-entity errors in ASR hypotheses",
    no_args_is_help=True,
)


def _setup_logging(verbose: bool) -> None:
    global _log_handler  # noqa: PLW0603
    if _log_handler is not None:
        _logger.removeHandler(_log_handler)
    _log_handler = RichHandler(console=err_console, show_path=False, show_time=verbose)
    _logger.addHandler(_log_handler)
    _logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        from importlib.metadata import version

        app_version = version("hintfix")
        console.print(f"hintfix version {app_version}")
        raise typer.Exit()


@app.callback()
def main_callback(
    simple: Annotated[
        bool,
        typer.Option("--simple", help="Plain TSV output instead of rich tables"),
    ] = False,
    verbose: Annotated[
        bool,
        typer.Option("--verbose", help="Log pipeline details to stderr"),
    ] = False,
    version: Annotated[  # noqa: ARG001
        bool,
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit",
            callback=version_callback,
            is_eager=True,
        ),
    ] = False,
) -> None:
    """Global options for hintfix CLI."""
    global console  # noqa: PLW0603
    console = Console(force_terminal=False if simple else None, no_color=simple)
    configure_output(console=console, simple=simple)
    _setup_logging(verbose)


# -- Shared pipeline options ---------------------------------------------------

ConfigOpt = Annotated[
    Path | None, typer.Option("--config", "-c", help="Config file (KEY=value lines)")
]
CatalogOpt = Annotated[Path | None, typer.Option("--catalog", help="Entity catalog file")]
IndexOpt = Annotated[Path | None, typer.Option("--index", help="Prebuilt embedding index")]
TemplatesOpt = Annotated[Path | None, typer.Option("--templates", help="Query template file")]
RetrieverOpt = Annotated[RetrieverKind | None, typer.Option("--retriever", help="Retriever")]
QuerygenOpt = Annotated[
    QueryStrategy | None, typer.Option("--querygen", help="Query generation strategy")
]
TaggerOpt = Annotated[TaggerKind | None, typer.Option("--tagger", help="NE tagger (ne_tag)")]
NMaxOpt = Annotated[int | None, typer.Option("--n-max", help="Longest all_ngrams query")]
DMaxOpt = Annotated[float | None, typer.Option("--d-max", help="Dense distance cutoff")]
RMaxOpt = Annotated[int | None, typer.Option("--r-max", help="Hints kept per query")]
IncludeQueryOpt = Annotated[
    bool | None,
    typer.Option(
        "--include-query/--entity-only",
        help="Hint format: '<query> :: <entity>' or entity only",
        show_default=False,
    ),
]
CorrectorOpt = Annotated[Backend | None, typer.Option("--corrector", help="Correction backend")]
DSubOpt = Annotated[
    float | None, typer.Option("--d-sub", help="Reference corrector substitution cutoff")
]
EndpointOpt = Annotated[str | None, typer.Option("--endpoint", help="Completion service URL")]
TimeoutOpt = Annotated[float | None, typer.Option("--timeout", help="Request timeout (s)")]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Random seed")]
WorkersOpt = Annotated[int | None, typer.Option("--workers", help="Worker threads")]
AnnProbeOpt = Annotated[
    int | None,
    typer.Option("--ann-probe", help="Approximate search: clusters to probe (default exact)"),
]


def _load_config(config_path: Path | None, **overrides: Any) -> PipelineConfig:
    return get_config(config_path, **overrides)


def _pipeline_overrides(
    catalog: Path | None,
    index: Path | None,
    templates: Path | None,
    retriever: RetrieverKind | None,
    querygen: QueryStrategy | None,
    tagger: TaggerKind | None,
    n_max: int | None,
    d_max: float | None,
    r_max: int | None,
    include_query: bool | None,
    corrector: Backend | None,
    d_sub: float | None,
    endpoint: str | None,
    timeout: float | None,
    seed: int | None,
    workers: int | None,
    ann_probe: int | None,
) -> dict[str, Any]:
    return {
        "catalog_path": catalog,
        "index_path": index,
        "templates_path": templates,
        "retriever": retriever,
        "querygen": querygen,
        "tagger": tagger,
        "n_max": n_max,
        "d_max": d_max,
        "r_max": r_max,
        "include_query_in_hint": include_query,
        "corrector": corrector,
        "d_sub": d_sub,
        "endpoint": endpoint,
        "timeout": timeout,
        "seed": seed,
        "workers": workers,
        "ann_probe": ann_probe,
    }


def _read_lines(source: Path | None) -> list[str]:
    if source is None or str(source) == "-":
        return [line.rstrip("\r\n") for line in sys.stdin]
    try:
        return source.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot read input file {source}: {exc}") from exc


# -- Commands ------------------------------------------------------------------


@app.command("build-index")
def build_index_cmd(
    catalog: Annotated[Path, typer.Argument(help="Entity catalog file")],
    out: Annotated[Path, typer.Option("--out", "-o", help="Index file to write")],
) -> None:
    """Build the dense and BM25 indices and write the dense index file."""
    with _handle_errors():
        entities = load_catalog_file(catalog)
        index = build_index(entities)
        bm25 = bm25_build(entities)
        save_index(index, out)
        console.print(
            f"[green]Indexed {len(entities)} entities[/green] "
            f"({len(bm25.df)} distinct terms) -> {out}"
        )


@app.command("correct")
def correct_cmd(
    source: Annotated[
        Path | None, typer.Argument(help="Hypothesis lines or record file ('-' for stdin)")
    ] = None,
    records: Annotated[
        bool, typer.Option("--records", help="Input is an EvalRecord file (JSON Lines)")
    ] = False,
    output: Annotated[
        Path | None, typer.Option("--output", "-o", help="Write results here instead of stdout")
    ] = None,
    explain: Annotated[
        bool, typer.Option("--explain", help="Show contexts and substitutions")
    ] = False,
    strict: Annotated[
        bool, typer.Option("--strict", help="Fail (exit 3) on remote backend errors")
    ] = False,
    config_path: ConfigOpt = None,
    catalog: CatalogOpt = None,
    index: IndexOpt = None,
    templates: TemplatesOpt = None,
    retriever: RetrieverOpt = None,
    querygen: QuerygenOpt = None,
    tagger: TaggerOpt = None,
    n_max: NMaxOpt = None,
    d_max: DMaxOpt = None,
    r_max: RMaxOpt = None,
    include_query: IncludeQueryOpt = None,
    corrector: CorrectorOpt = None,
    d_sub: DSubOpt = None,
    endpoint: EndpointOpt = None,
    timeout: TimeoutOpt = None,
    seed: SeedOpt = None,
    workers: WorkersOpt = None,
    ann_probe: AnnProbeOpt = None,
) -> None:
    """Correct hypotheses: query generation, retrieval, context, correction."""
    with _handle_errors():
        overrides = _pipeline_overrides(
            catalog, index, templates, retriever, querygen, tagger, n_max, d_max, r_max,
            include_query, corrector, d_sub, endpoint, timeout, seed, workers, ann_probe,
        )  # fmt: skip
        config = _load_config(config_path, **overrides)
        lines = _read_lines(source)
        if records:
            record_list = list(iter_records(lines))
            hypotheses = [record.hypothesis for record in record_list]
        else:
            hypotheses = lines
        if not hypotheses:
            return

        with Pipeline.from_config(config) as pipeline:
            outcomes = pipeline.correct_many(hypotheses, strict=strict)

        for outcome in outcomes:
            if outcome.error:
                _logger.warning("Passed through uncorrected: %s", outcome.error)

        if records:
            corrected = [
                record.model_copy(update={"hypothesis": o.corrected, "error": o.error})
                for record, o in zip(record_list, outcomes, strict=True)
            ]
            _emit_records(corrected, output)
        else:
            _emit_lines([o.corrected for o in outcomes], output)
        if explain:
            display_outcomes(outcomes)


def _emit_lines(lines: list[str], output: Path | None) -> None:
    if output is not None:
        output.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        return
    for line in lines:
        print(line)


def _emit_records(records: list[EvalRecord], output: Path | None) -> None:
    if output is not None:
        write_records(output, records)
        return
    for record in records:
        print(record.model_dump_json(exclude_none=True))


@app.command("retrieve")
def retrieve_cmd(
    hypothesis: Annotated[str, typer.Argument(help="Hypothesis text")],
    k: Annotated[int, typer.Option("--k", "-k", help="Candidates per query")] = 10,
    config_path: ConfigOpt = None,
    catalog: CatalogOpt = None,
    index: IndexOpt = None,
    templates: TemplatesOpt = None,
    retriever: RetrieverOpt = None,
    querygen: QuerygenOpt = None,
    tagger: TaggerOpt = None,
    n_max: NMaxOpt = None,
    d_max: DMaxOpt = None,
    endpoint: EndpointOpt = None,
    ann_probe: AnnProbeOpt = None,
) -> None:
    """Show the top-k candidates of every query of one hypothesis."""
    if k < 1:
        raise typer.BadParameter("k must be >= 1", param_hint="--k")
    with _handle_errors():
        overrides = _pipeline_overrides(
            catalog, index, templates, retriever, querygen, tagger, n_max, d_max, None,
            None, None, None, endpoint, None, None, None, ann_probe,
        )  # fmt: skip
        config = _load_config(config_path, **overrides)
        with Pipeline.from_config(config) as pipeline:
            queries = pipeline.queries(normalize_text(hypothesis))
            groups = retrieve_grouped(pipeline.retriever, queries, k)
            display_retrieval(groups, pipeline.resources.catalog)


@app.command("synth")
def synth_cmd(
    records_out: Annotated[Path, typer.Argument(help="EvalRecord file to write")],
    catalog: CatalogOpt = None,
    entities: Annotated[
        int, typer.Option("--entities", help="Size of a generated catalog (without --catalog)")
    ] = 1000,
    catalog_out: Annotated[
        Path | None, typer.Option("--catalog-out", help="Where to write a generated catalog")
    ] = None,
    count: Annotated[int, typer.Option("--records", "-n", help="Number of records")] = 1000,
    p_err: Annotated[
        float, typer.Option("--p-err", help="Probability of corrupting the entity span")
    ] = 0.5,
    seed: Annotated[int, typer.Option("--seed", help="Random seed")] = 0,
    carriers: Annotated[
        Path | None,
        typer.Option("--carriers", help="Carrier phrases with an {entity} slot, one per line"),
    ] = None,
    homophones: Annotated[
        Path | None, typer.Option("--homophones", help="Homophone lexicon (from<TAB>to)")
    ] = None,
    subset: Annotated[str, typer.Option("--subset", help="Subset label")] = "synthetic",
    config_path: ConfigOpt = None,
) -> None:
    """Generate a synthetic evaluation set (and optionally its catalog)."""
    with _handle_errors():
        homophones = homophones or _load_config(config_path).homophones_path
        if catalog is not None:
            entity_catalog = load_catalog_file(catalog)
        else:
            if catalog_out is None:
                raise ConfigurationError("Pass --catalog, or --catalog-out for a generated one")
            entity_catalog = generate_catalog(entities, seed)
            write_catalog(catalog_out, entity_catalog)
        carrier_list = (
            [line for line in _read_lines(carriers) if line.strip()]
            if carriers is not None
            else list(DEFAULT_CARRIERS)
        )
        model = CorruptionModel(
            p_err=p_err,
            seed=seed,
            homophones=load_homophones(homophones) if homophones is not None else {},
        )
        generated = generate_records(entity_catalog, carrier_list, count, model, subset=subset)
        write_records(records_out, generated)
        console.print(f"[green]Wrote {len(generated)} records[/green] -> {records_out}")
        if catalog_out is not None and catalog is None:
            console.print(f"[green]Wrote {len(entity_catalog)} entities[/green] -> {catalog_out}")


@app.command("experiment")
def experiment_cmd(
    records_path: Annotated[Path, typer.Argument(help="EvalRecord file with gold entities")],
    out_dir: Annotated[Path, typer.Option("--out-dir", "-o", help="Report directory")] = Path(
        "reports"
    ),
    config_path: ConfigOpt = None,
    catalog: CatalogOpt = None,
    index: IndexOpt = None,
    templates: TemplatesOpt = None,
    tagger: TaggerOpt = None,
    n_max: NMaxOpt = None,
    d_max: DMaxOpt = None,
    corrector: CorrectorOpt = None,
    d_sub: DSubOpt = None,
    endpoint: EndpointOpt = None,
    timeout: TimeoutOpt = None,
    seed: SeedOpt = None,
    workers: WorkersOpt = None,
    ann_probe: AnnProbeOpt = None,
) -> None:
    """Sweep retrievers, query strategies, R_max and hint formats."""
    with _handle_errors():
        overrides = _pipeline_overrides(
            catalog, index, templates, None, None, tagger, n_max, d_max, None,
            None, corrector, d_sub, endpoint, timeout, seed, workers, ann_probe,
        )  # fmt: skip
        config = _load_config(config_path, **overrides)
        record_list = read_records(records_path)
        with Pipeline.from_config(config) as pipeline:
            report = run_experiment(pipeline, record_list)
        print_table("Retrieval recall", *recall_table(report))
        print_table("Corpus WER", *wer_table(report))
        print_table("WER change with R_max", *r_max_table(report))
        for path in write_reports(report, out_dir):
            _logger.info("Wrote %s", path)


def _click_exception(name: str) -> type[Exception]:
    """Find a click exception class through typer's re-exports.

    Typer ships either the ``click`` package or a vendored copy, and only
    re-exports ``BadParameter``; its ancestors are ``UsageError`` and
    ``ClickException`` in both.
    """
    return next(cls for cls in typer.BadParameter.__mro__ if cls.__name__ == name)


_UsageError = _click_exception("UsageError")
_ClickException = _click_exception("ClickException")


def run() -> None:
    """Console-script entry point; usage errors exit with code 1."""
    try:
        rc = app(standalone_mode=False)
    except typer.Abort as exc:
        err_console.print("Aborted!")
        raise SystemExit(EXIT_USAGE) from exc
    except _UsageError as exc:
        exc.show()  # type: ignore[attr-defined]
        raise SystemExit(EXIT_USAGE) from exc
    except _ClickException as exc:
        exc.show()  # type: ignore[attr-defined]
        raise SystemExit(exc.exit_code) from exc  # type: ignore[attr-defined]
    raise SystemExit(rc if isinstance(rc, int) else 0)


if __name__ == "__main__":
    run()
