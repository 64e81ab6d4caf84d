import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus_helpers import corpus_records, write_corpus

from gpt2_backend import FineTuneJob, TrainingConfig, finetune


@pytest.fixture(scope="session")
def toy20(tmp_path_factory) -> Path:
    return write_corpus(
        tmp_path_factory.mktemp("corpora") / "toy20.jsonl", corpus_records(20)
    )


@pytest.fixture(scope="session")
def toy5(tmp_path_factory) -> Path:
    return write_corpus(
        tmp_path_factory.mktemp("corpora") / "toy5.jsonl", corpus_records(5)
    )


@pytest.fixture(scope="session")
def quick_checkpoint(tmp_path_factory, toy20) -> Path:
    """A cheaply trained checkpoint for serving tests."""
    result = finetune(
        FineTuneJob(
            corpus_path=toy20,
            checkpoint_dir=tmp_path_factory.mktemp("ckpt") / "quick",
            config=TrainingConfig(epochs=3, learning_rate=5e-3),
            seed=0,
        )
    )
    return result.checkpoints[-1]
