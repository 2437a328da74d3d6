"""Bundled data files: hand-labeled mini-corpus, default semantic lexicon,
and a small demo word-embedding table."""

from importlib.resources import files
from pathlib import Path


def _data_path(name: str) -> Path:
    return Path(str(files("questkit.data").joinpath(name)))


def minicorpus_path() -> Path:
    return _data_path("minicorpus.jsonl")


def lexicon_path() -> Path:
    return _data_path("semantic_lexicon.tsv")


def demo_embeddings_path() -> Path:
    return _data_path("demo_embeddings.txt")


DEMO_EMBEDDING_DIM = 50
