"""Shared fixtures: a small music catalog on disk and a matching config."""

from __future__ import annotations

import json
import os
from pathlib import Path

import httpx
import pytest

from hintfix.catalog import EntityCatalog, write_catalog
from hintfix.config import PipelineConfig, get_config

ARTISTS = [
    "The Weeknd",
    "Drake",
    "Taylor Swift",
    "Pink Floyd",
    "Metallica",
    "Adele",
    "Imagine Dragons",
    "Dark Side",
]


@pytest.fixture(autouse=True)
def _no_hintfix_env(monkeypatch: pytest.MonkeyPatch) -> None:
    for key in list(os.environ):
        if key.startswith("HINTFIX_"):
            monkeypatch.delenv(key)


@pytest.fixture
def catalog() -> EntityCatalog:
    return EntityCatalog.from_surfaces(ARTISTS)


@pytest.fixture
def catalog_path(tmp_path: Path, catalog: EntityCatalog) -> Path:
    path = tmp_path / "catalog.tsv"
    write_catalog(path, catalog)
    return path


@pytest.fixture
def config(catalog_path: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> PipelineConfig:
    monkeypatch.chdir(tmp_path)
    return get_config(catalog_path=catalog_path, workers=1)


def _echo_hypothesis(request: httpx.Request) -> httpx.Response:
    """Completion stub that answers with the text between ``[A]`` and ``[P]``."""
    context = json.loads(request.content)["context"]
    _, _, tail = context.rpartition("[A] ")
    return httpx.Response(200, json={"text": tail.removesuffix(" [P]")})


@pytest.fixture
def echo_stub() -> httpx.MockTransport:
    return httpx.MockTransport(_echo_hypothesis)
