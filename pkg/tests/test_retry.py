"""Tests for RetryConfig and exponential backoff behaviour."""

from __future__ import annotations

from unittest.mock import MagicMock, patch

import httpx
import pytest

from hintfix.config import PipelineConfig
from hintfix.exceptions import RemoteBackendError
from hintfix.transport import DEFAULT_RETRY, CompletionClient, RetryConfig

# -- RetryConfig unit tests ---------------------------------------------------


class TestRetryConfig:
    def test_two_retries_by_default(self) -> None:
        assert DEFAULT_RETRY == RetryConfig()
        assert (DEFAULT_RETRY.max_retries, DEFAULT_RETRY.backoff_base) == (2, 0.5)

    def test_immutable(self) -> None:
        with pytest.raises(AttributeError):
            DEFAULT_RETRY.backoff_max = 1.0  # type: ignore[misc]

    @pytest.mark.parametrize(
        ("attempt", "expected"), [(0, 0.25), (1, 0.5), (2, 1.0), (3, 2.0), (4, 2.0), (20, 2.0)]
    )
    def test_delay_doubles_until_cap(self, attempt: int, expected: float) -> None:
        assert RetryConfig(backoff_base=0.25, backoff_max=2.0).delay(attempt) == expected

    def test_zero_base_never_waits(self) -> None:
        assert RetryConfig(backoff_base=0.0).delay(5) == 0.0


# -- PipelineConfig integration -----------------------------------------------


class TestPipelineConfigRetry:
    """PipelineConfig exposes retry settings and builds RetryConfig."""

    def test_default_retry_config(self) -> None:
        cfg = PipelineConfig(_env_file=None)  # type: ignore[call-arg]
        assert cfg.retry_config == DEFAULT_RETRY

    def test_custom_retry_config(self) -> None:
        cfg = PipelineConfig(
            _env_file=None,  # type: ignore[call-arg]
            retry_count=5,
            retry_backoff=2.0,
            retry_max_backoff=120.0,
        )
        assert cfg.retry_config == RetryConfig(max_retries=5, backoff_base=2.0, backoff_max=120.0)

    def test_env_vars(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("HINTFIX_RETRY_COUNT", "4")
        monkeypatch.setenv("HINTFIX_RETRY_BACKOFF", "1.5")
        monkeypatch.setenv("HINTFIX_RETRY_MAX_BACKOFF", "60")
        rc = PipelineConfig(_env_file=None).retry_config  # type: ignore[call-arg]
        assert rc == RetryConfig(max_retries=4, backoff_base=1.5, backoff_max=60.0)


# -- Client retry behaviour ---------------------------------------------------


class TestClientRetry:
    def test_default_retry_when_none(self) -> None:
        with CompletionClient("http://localhost:1/complete") as client:
            assert client.retry == DEFAULT_RETRY

    @patch("hintfix.transport.time.sleep")
    def test_exponential_backoff_delays(self, mock_sleep: MagicMock) -> None:
        calls = 0

        def handler(request: httpx.Request) -> httpx.Response:
            nonlocal calls
            calls += 1
            raise httpx.ConnectError("connection refused", request=request)

        rc = RetryConfig(max_retries=3, backoff_base=0.1, backoff_max=10.0)
        client = CompletionClient(
            "http://localhost:1/complete", retry=rc, http_transport=httpx.MockTransport(handler)
        )
        with client, pytest.raises(RemoteBackendError):
            client.complete("[A] x [P]")

        assert calls == 4  # 1 initial + 3 retries
        delays = [call.args[0] for call in mock_sleep.call_args_list]
        assert delays == pytest.approx([0.1, 0.2, 0.4])

    @patch("hintfix.transport.time.sleep")
    def test_backoff_capped(self, mock_sleep: MagicMock) -> None:
        rc = RetryConfig(max_retries=4, backoff_base=1.0, backoff_max=3.0)
        client = CompletionClient(
            "http://localhost:1/complete",
            retry=rc,
            http_transport=httpx.MockTransport(lambda _: httpx.Response(503)),
        )
        with client, pytest.raises(RemoteBackendError):
            client.complete("[A] x [P]")
        delays = [call.args[0] for call in mock_sleep.call_args_list]
        assert delays == [1.0, 2.0, 3.0, 3.0]
