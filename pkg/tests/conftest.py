from pathlib import Path

import pytest

from costar.dataset import ingest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def synthetic():
    """(posts, annotations) from the clean 50-record fixture."""
    posts, annotations, errors = ingest(FIXTURES / "synthetic_corpus.jsonl")
    assert not errors, errors
    return posts, annotations
