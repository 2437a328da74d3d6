import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from questkit import corpus
from questkit.data import demo_embeddings_path, lexicon_path, minicorpus_path


@pytest.fixture(scope="session")
def minicorpus():
    return corpus.load_jsonl(minicorpus_path())


@pytest.fixture(scope="session")
def demo_table_path():
    return demo_embeddings_path()


@pytest.fixture(scope="session")
def default_lexicon_path():
    return lexicon_path()
