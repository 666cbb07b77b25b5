"""Console output helpers shared by the CLI commands.

Output goes through one configured :class:`rich.console.Console`; in simple
mode every table is printed as plain TSV (header line first) instead.
"""

from __future__ import annotations

from collections.abc import Sequence

from rich.console import Console
from rich.table import Table

from hintfix.catalog import EntityCatalog
from hintfix.pipeline import PipelineOutcome
from hintfix.vectordb import RetrievedEntity

_output_console: Console | None = None
_output_simple = False


def configure_output(*, console: Console | None = None, simple: bool = False) -> None:
    """Configure the output console and mode.

    Args:
        console: Rich Console instance to use for output.
        simple: If ``True``, tables are emitted as plain TSV.
    """
    global _output_console, _output_simple  # noqa: PLW0603
    if console is not None:
        _output_console = console
    _output_simple = simple


def _get_console() -> Console:
    global _output_console  # noqa: PLW0603
    if _output_console is None:
        _output_console = Console()
    return _output_console


def is_simple_output() -> bool:
    return _output_simple


def print_table(title: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    """Print a table (rich) or TSV (simple mode)."""
    if _output_simple:
        print("\t".join(header))
        for row in rows:
            print("\t".join(row))
        return
    table = Table(title=title)
    for i, name in enumerate(header):
        table.add_column(name, style="cyan" if i == 0 else None, overflow="fold")
    for row in rows:
        table.add_row(*row)
    _get_console().print(table)


def _format_substitutions(outcome: PipelineOutcome) -> str:
    if outcome.result is None:
        return ""
    return "; ".join(
        f"{sub.replaced_text} -> {sub.replacement} [{sub.span[0]},{sub.span[1]})"
        for sub in outcome.result.substitutions
    )


def display_outcomes(outcomes: Sequence[PipelineOutcome]) -> None:
    """Explain view: context, output and substitutions per hypothesis."""
    header = ["hypothesis", "context", "corrected", "substitutions", "error"]
    rows = [
        [
            o.hypothesis,
            o.rendered_context,
            o.corrected,
            _format_substitutions(o),
            o.error or "",
        ]
        for o in outcomes
    ]
    print_table("Corrections", header, rows)


def display_retrieval(
    groups: Sequence[Sequence[RetrievedEntity]],
    catalog: EntityCatalog,
) -> None:
    """Top-k candidates per query, one row per candidate."""
    header = ["query", "span", "rank", "entity_id", "entity", "distance", "kind"]
    rows: list[list[str]] = []
    for group in groups:
        for rank, hit in enumerate(group, start=1):
            query = hit.source_query
            rows.append(
                [
                    query.text,
                    f"{query.start}-{query.end}",
                    str(rank),
                    str(hit.entity_id),
                    catalog.lookup(hit.entity_id).surface,
                    f"{hit.distance:.4f}",
                    hit.kind.value,
                ]
            )
    if not rows and not _output_simple:
        _get_console().print("[yellow]No candidates retrieved[/yellow]")
        return
    print_table("Retrieval", header, rows)
