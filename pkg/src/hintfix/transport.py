"""HTTP client for the completion wire protocol.

Request (``POST <endpoint>``, UTF-8 JSON)::

    {"context": "<rendered context>", "max_tokens": 1000, "greedy": true}

Response (status 200)::

    {"text": "<completion>"}

The same client serves the remote corrector and the remote NE tagger.
"""

import logging
import time
from dataclasses import dataclass
from types import TracebackType
from typing import Any

import httpx

from hintfix.exceptions import RemoteBackendError, transport_error_from_status

_logger = logging.getLogger(__name__)

#: Decode parameters sent with every request.
MAX_TOKENS = 1000
GREEDY = True

_RETRYABLE_ERRORS = (httpx.ConnectError, httpx.TimeoutException)


@dataclass(frozen=True)
class RetryConfig:
    """Configuration for transient-error retry behaviour.

    Retries use exponential backoff: ``backoff_base * 2 ** attempt`` seconds,
    capped at *backoff_max*.

    Attributes:
        max_retries: Maximum number of retry attempts (0 to disable retries).
        backoff_base: Initial backoff delay in seconds.
        backoff_max: Upper bound on the backoff delay in seconds.
    """

    max_retries: int = 2
    backoff_base: float = 0.5
    backoff_max: float = 30.0

    def delay(self, attempt: int) -> float:
        """Return the backoff delay for the given zero-based *attempt*."""
        return float(min(self.backoff_base * 2**attempt, self.backoff_max))


#: Default retry configuration used when none is supplied.
DEFAULT_RETRY = RetryConfig()


def _is_retryable(exc: Exception) -> bool:
    if isinstance(exc, RemoteBackendError):
        return exc.code >= 500
    return isinstance(exc, _RETRYABLE_ERRORS)


class CompletionClient:
    """Blocking completion client; safe to share across worker threads.

    Each :meth:`complete` call is independent, so concurrent requests never
    see each other's retries.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 30.0,
        retry: RetryConfig | None = None,
        http_transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.retry = retry or DEFAULT_RETRY
        self._http = httpx.Client(
            timeout=timeout,
            transport=http_transport,
            headers={"User-Agent": "hintfix"},
        )

    def __enter__(self) -> "CompletionClient":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.close()

    def close(self) -> None:
        """Close the underlying HTTP client."""
        self._http.close()

    def complete(self, context: str) -> str:
        """Send *context* and return the completion text.

        Raises:
            RemoteBackendError: On transport failure, timeout, a non-200
                status, a malformed body or an empty completion.
        """
        payload: dict[str, Any] = {"context": context, "max_tokens": MAX_TOKENS, "greedy": GREEDY}
        last_exc: Exception | None = None
        for attempt in range(self.retry.max_retries + 1):
            try:
                return self._request(payload)
            except (RemoteBackendError, *_RETRYABLE_ERRORS) as exc:
                last_exc = exc
                if attempt < self.retry.max_retries and _is_retryable(exc):
                    _logger.debug("Retrying completion request (attempt %d): %s", attempt + 1, exc)
                    time.sleep(self.retry.delay(attempt))
                    continue
                break
        if isinstance(last_exc, RemoteBackendError):
            raise last_exc
        raise RemoteBackendError(f"Completion request failed: {last_exc}") from last_exc

    def _request(self, payload: dict[str, Any]) -> str:
        try:
            response = self._http.post(self.endpoint, json=payload)
        except _RETRYABLE_ERRORS:
            raise
        except httpx.HTTPError as exc:
            raise RemoteBackendError(f"Completion request failed: {exc}") from exc

        if response.status_code != httpx.codes.OK:
            err_data: dict[str, Any] | None = None
            try:
                body = response.json()
                if isinstance(body, dict):
                    err_data = body
            except ValueError:
                pass
            raise transport_error_from_status(response.status_code, err_data)

        try:
            body = response.json()
        except ValueError as exc:
            raise RemoteBackendError("Completion response is not JSON", code=200) from exc
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise RemoteBackendError("Completion response has no 'text' field", code=200)
        if not text.strip():
            raise RemoteBackendError("Completion service returned an empty completion", code=200)
        return text
