"""Hintfix exception hierarchy.

All public exceptions inherit from :class:`HintfixError` so that library
consumers can catch a single base class when desired.

:class:`DataError` groups problems with user-supplied files (catalogs,
templates, index files, record files).  The CLI maps it to exit code 2,
separately from configuration mistakes (exit code 1) and remote backend
failures under ``--strict`` (exit code 3).

Hierarchy overview::

    HintfixError
    ├── ConfigurationError
    ├── DataError
    │   ├── IngestionError
    │   ├── TemplateError
    │   ├── IndexFormatError
    │   └── RecordFormatError
    ├── EncodingError
    ├── EntityNotFoundError
    ├── EvaluationError
    └── TransportError
        └── RemoteBackendError
            └── MalformedCompletionError
"""

from typing import Any


class HintfixError(Exception):
    """Base exception for all Hintfix errors."""


# -- Configuration -------------------------------------------------------------


class ConfigurationError(HintfixError):
    """Raised when the configuration is invalid or incomplete."""


# -- User data -----------------------------------------------------------------


class DataError(HintfixError):
    """Raised when an input file cannot be used."""


class IngestionError(DataError):
    """Raised when a catalog file cannot be ingested.

    Carries the 1-based *line* number when the problem is tied to one line.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class TemplateError(DataError):
    """Raised when a query template does not compile or has the wrong group count."""

    def __init__(self, pattern: str, reason: str) -> None:
        self.pattern = pattern
        super().__init__(f"Invalid template {pattern!r}: {reason}")


class IndexFormatError(DataError):
    """Raised when a persisted embedding index is malformed."""


class RecordFormatError(DataError):
    """Raised when an evaluation record file contains a malformed line."""

    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


# -- Encoding / lookup ---------------------------------------------------------


class EncodingError(HintfixError):
    """Raised when text cannot be encoded (empty, or without letters/digits)."""


class EntityNotFoundError(HintfixError):
    """Raised when an entity id is not present in a catalog or index."""

    def __init__(self, entity_id: int) -> None:
        self.entity_id = entity_id
        super().__init__(f"Entity {entity_id} not found")


class EvaluationError(HintfixError):
    """Raised when a metric is undefined for its inputs."""


# -- Transport -----------------------------------------------------------------


class TransportError(HintfixError):
    """Raised on HTTP transport failures against a completion service.

    Carries the numeric *code* (HTTP status, or -1 when no response was
    received) and the raw *data* dict returned by the server so that callers
    can inspect details without string-parsing.
    """

    def __init__(
        self,
        message: str,
        code: int = -1,
        data: dict[str, Any] | None = None,
    ) -> None:
        self.code = code
        self.data = data or {}
        super().__init__(f"[{code}] {message}")


class RemoteBackendError(TransportError):
    """The completion service failed, timed out, or returned no text."""


class MalformedCompletionError(RemoteBackendError):
    """A completion could not be parsed (e.g. unbalanced tagging brackets)."""


def transport_error_from_status(
    status_code: int,
    data: dict[str, Any] | None = None,
) -> RemoteBackendError:
    """Create the error for a non-success HTTP status."""
    message = f"Completion service returned HTTP {status_code}"
    if data and isinstance(data.get("error"), str):
        message = f"{message}: {data['error']}"
    return RemoteBackendError(message, code=status_code, data=data)
