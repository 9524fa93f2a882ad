from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpusgen import build_fixture_corpus  # noqa: E402


@pytest.fixture(scope="session")
def corpus_config(tmp_path_factory) -> Path:
    """Shared synthetic corpus; tests must treat the directory as read-only."""
    root = tmp_path_factory.mktemp("corpus")
    return build_fixture_corpus(root)
