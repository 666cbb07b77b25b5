"""Tests for configuration loading and precedence."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from hintfix.config import (
    PROJECT_CONFIG_FILE,
    PipelineConfig,
    RetrieverKind,
    TaggerKind,
    detect_config_file,
    get_config,
)
from hintfix.corrector import Backend
from hintfix.exceptions import ConfigurationError
from hintfix.querygen import QueryStrategy


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    for key in list(os.environ):
        if key.startswith("HINTFIX_"):
            monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)


def _write_env(path: Path, *lines: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestDefaults:
    def test_snapshot(self) -> None:
        cfg = get_config()
        assert cfg.model_dump() == {
            "catalog_path": None,
            "index_path": None,
            "templates_path": None,
            "homophones_path": None,
            "retriever": RetrieverKind.DENSE,
            "querygen": QueryStrategy.TEMPLATE,
            "tagger": TaggerKind.TEMPLATE,
            "n_max": 5,
            "d_max": 1.0,
            "r_max": 1,
            "include_query_in_hint": False,
            "corrector": Backend.REFERENCE,
            "d_sub": 0.9,
            "require_improvement": True,
            "endpoint": None,
            "timeout": 30.0,
            "retry_count": 2,
            "retry_backoff": 0.5,
            "retry_max_backoff": 30.0,
            "seed": 0,
            "workers": None,
            "ann_probe": None,
        }

    def test_worker_count_defaults_to_cpus(self) -> None:
        assert get_config().worker_count == (os.cpu_count() or 1)
        assert get_config(workers=3).worker_count == 3

    def test_require_catalog(self) -> None:
        with pytest.raises(ConfigurationError, match="No catalog configured"):
            get_config().require_catalog()
        assert get_config(catalog_path=Path("c.tsv")).require_catalog() == Path("c.tsv")


class TestPrecedence:
    def test_project_file_is_picked_up(self, tmp_path: Path) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_R_MAX=3", "HINTFIX_RETRIEVER=bm25")
        cfg = get_config()
        assert cfg.r_max == 3
        assert cfg.retriever is RetrieverKind.BM25

    def test_explicit_file(self, tmp_path: Path) -> None:
        path = _write_env(tmp_path / "conf" / "run.env", "HINTFIX_QUERYGEN=all_ngrams")
        assert get_config(path).querygen is QueryStrategy.ALL_NGRAMS

    def test_env_beats_file(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_R_MAX=3")
        monkeypatch.setenv("HINTFIX_R_MAX", "4")
        assert get_config().r_max == 4

    def test_overrides_beat_env(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_R_MAX=3")
        monkeypatch.setenv("HINTFIX_R_MAX", "4")
        assert get_config(r_max=5).r_max == 5

    def test_none_overrides_fall_through(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("HINTFIX_N_MAX", "2")
        assert get_config(n_max=None).n_max == 2

    def test_unrelated_keys_ignored(self, tmp_path: Path) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "OTHER_TOOL=1", "HINTFIX_SEED=7")
        assert get_config().seed == 7


class TestValidation:
    def test_missing_explicit_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigurationError, match="Config file not found"):
            get_config(tmp_path / "missing.env")

    @pytest.mark.parametrize(
        "overrides",
        [
            {"r_max": 0},
            {"n_max": 0},
            {"d_max": 0.0},
            {"seed": -1},
            {"seed": 2**64},
            {"workers": 0},
            {"d_max": 0.5},
        ],
    )
    def test_invalid_values(self, overrides: dict[str, object]) -> None:
        with pytest.raises(ConfigurationError, match="Invalid configuration"):
            get_config(**overrides)

    def test_invalid_value_in_file(self, tmp_path: Path) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_RETRIEVER=tfidf")
        with pytest.raises(ConfigurationError):
            get_config()

    def test_remote_corrector_requires_endpoint(self) -> None:
        with pytest.raises(ConfigurationError, match="ENDPOINT"):
            get_config(corrector=Backend.REMOTE)
        cfg = get_config(corrector=Backend.REMOTE, endpoint="http://127.0.0.1:9/complete")
        assert cfg.corrector is Backend.REMOTE

    def test_remote_tagger_requires_endpoint(self) -> None:
        with pytest.raises(ConfigurationError, match="ENDPOINT"):
            get_config(querygen=QueryStrategy.NE_TAG, tagger=TaggerKind.REMOTE)
        # the tagger only matters for ne_tag queries
        assert get_config(tagger=TaggerKind.REMOTE).tagger is TaggerKind.REMOTE

    def test_d_sub_may_equal_d_max(self) -> None:
        cfg = get_config(d_max=0.5, d_sub=0.5)
        assert cfg.d_sub == cfg.d_max


class TestDetectConfigFile:
    def test_none_when_absent(self) -> None:
        assert detect_config_file() is None

    def test_project_file(self, tmp_path: Path) -> None:
        path = _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_SEED=1")
        assert detect_config_file() == path

    def test_direct_construction_ignores_files(self, tmp_path: Path) -> None:
        _write_env(tmp_path / PROJECT_CONFIG_FILE, "HINTFIX_SEED=1")
        assert PipelineConfig().seed == 0
