"""Shared fixtures: the sample corpus, its index, and the scripted engine."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from convrec.corpus import build_documents, load_items, load_reviews
from convrec.embedding import LocalHashEmbedder
from convrec.engine import Engine
from convrec.llm import ScriptedBackend, load_script
from convrec.retrieval import build_index, save_index

REPO_ROOT = Path(__file__).resolve().parent.parent
SAMPLE_DIR = REPO_ROOT / "sample"
FIXTURE_DIR = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def sample_items():
    return load_items(SAMPLE_DIR / "items.jsonl")


@pytest.fixture(scope="session")
def sample_reviews(sample_items):
    reviews, skipped = load_reviews(
        SAMPLE_DIR / "reviews.jsonl", [item.item_id for item in sample_items]
    )
    assert not skipped
    return reviews


@pytest.fixture(scope="session")
def sample_documents(sample_items, sample_reviews):
    return build_documents(sample_items, sample_reviews)


@pytest.fixture(scope="session")
def local_encoder():
    return LocalHashEmbedder(dim=64, seed=0)


@pytest.fixture(scope="session")
def sample_index(sample_documents, local_encoder, sample_items):
    return build_index(sample_documents, local_encoder, items=sample_items)


@pytest.fixture(scope="session")
def sample_index_dir(tmp_path_factory, sample_index) -> Path:
    out = tmp_path_factory.mktemp("sample_index")
    save_index(sample_index, out)
    return out


@pytest.fixture(scope="session")
def scripted_llm():
    return ScriptedBackend(load_script(FIXTURE_DIR / "scripted_llm.json"))


@pytest.fixture
def engine(sample_index, scripted_llm, local_encoder):
    return Engine(sample_index, scripted_llm, local_encoder)


@pytest.fixture
def scripted_config(tmp_path, sample_index_dir) -> Path:
    """Config file wiring the saved sample index to the scripted fixtures."""
    payload = {
        "index_dir": str(sample_index_dir),
        "llm": {
            "backend": "scripted",
            "script_file": str(FIXTURE_DIR / "scripted_llm.json"),
        },
        "encoder": {"provider": "local", "dim": 64, "seed": 0},
        "k": 2,
        "m": 5,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
