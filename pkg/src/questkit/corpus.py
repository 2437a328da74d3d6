"""Dialogue-sentence datasets: loading, validation, splitting, summary stats.

The on-disk format is JSONL, one sentence object per line:

    {"id": "s1", "text": "please see comments?", "label": "non_question",
     "pos_tags": null, "dialogue_id": "d01", "position": 4}

Only "id" and "text" are required.  A Dataset owns the vocabulary: tokens
are lowercased for vocabulary identity while the raw text keeps its casing
(the capitalized-word statistic needs it).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DataError

LABELS = ("question", "c_question", "non_question")
UNK_TOKEN = "<unk>"
UNK_ID = 0


@dataclass(frozen=True)
class LabeledSentence:
    """One log sentence with optional gold label and dialogue metadata."""

    id: str
    text: str
    label: Optional[str] = None
    pos_tags: Optional[tuple[str, ...]] = None
    dialogue_id: Optional[str] = None
    position: Optional[int] = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise DataError(f"sentence {self.id!r}: text is empty")
        if self.label is not None and self.label not in LABELS:
            raise DataError(
                f"sentence {self.id!r}: unknown label {self.label!r}; "
                f"expected one of {LABELS}"
            )
        if self.position is not None and self.position < 0:
            raise DataError(f"sentence {self.id!r}: negative position")


@dataclass
class Dataset:
    """Ordered sentences plus the token vocabulary built from them."""

    sentences: list[LabeledSentence]
    vocab: dict[str, int] = field(default_factory=dict)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def __len__(self) -> int:
        return len(self.sentences)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.sentences == other.sentences and self.vocab == other.vocab

    def by_id(self, sentence_id: str) -> LabeledSentence:
        for s in self.sentences:
            if s.id == sentence_id:
                return s
        raise KeyError(sentence_id)


@dataclass(frozen=True)
class Split:
    """Train/validation/test index lists produced by a seeded shuffle."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int


def build_vocab(sentences: Iterable[LabeledSentence]) -> dict[str, int]:
    """Map lowercased tokens to contiguous ids, UNK reserved at id 0.

    Ids follow first appearance in sentence order, so a fixed file always
    produces the same vocabulary.
    """
    from . import features  # circular at module level: features needs LabeledSentence

    vocab = {UNK_TOKEN: UNK_ID}
    for s in sentences:
        for tok in features.tokenize(s.text):
            tok = tok.lower()
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


def _sentence_from_obj(obj: dict, lineno: int) -> LabeledSentence:
    if not isinstance(obj, dict):
        raise DataError(f"line {lineno}: expected a JSON object")
    for key in ("id", "text"):
        if key not in obj:
            raise DataError(f"line {lineno}: missing required field {key!r}")
    pos_tags = obj.get("pos_tags")
    if pos_tags is not None:
        pos_tags = tuple(str(t) for t in pos_tags)
    try:
        return LabeledSentence(
            id=str(obj["id"]),
            text=str(obj["text"]),
            label=obj.get("label"),
            pos_tags=pos_tags,
            dialogue_id=obj.get("dialogue_id"),
            position=obj.get("position"),
        )
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from exc


def load_jsonl(path: str | Path) -> Dataset:
    """Load a JSONL corpus and build its vocabulary.

    Raises DataError naming the offending line for malformed JSON, duplicate
    sentence ids, empty text, or unknown label strings.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    sentences: list[LabeledSentence] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if isinstance(obj, dict) and "_manifest" in obj:
                continue  # CLI outputs open with a manifest-reference record
            s = _sentence_from_obj(obj, lineno)
            if s.id in seen_ids:
                raise DataError(f"line {lineno}: duplicate id {s.id!r}")
            seen_ids.add(s.id)
            sentences.append(s)
    ds = Dataset(sentences=sentences, vocab=build_vocab(sentences))
    _check_pos_tag_lengths(ds)
    return ds


def _check_pos_tag_lengths(ds: Dataset) -> None:
    from . import features

    for s in ds.sentences:
        if s.pos_tags is not None:
            n_tok = len(features.tokenize(s.text))
            if len(s.pos_tags) != n_tok:
                raise DataError(
                    f"sentence {s.id!r}: {len(s.pos_tags)} pos_tags for "
                    f"{n_tok} tokens"
                )


def write_jsonl(ds: Dataset, path: str | Path) -> None:
    """Write a dataset back out; load_jsonl of the result round-trips."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for s in ds.sentences:
            obj = {"id": s.id, "text": s.text}
            if s.label is not None:
                obj["label"] = s.label
            if s.pos_tags is not None:
                obj["pos_tags"] = list(s.pos_tags)
            if s.dialogue_id is not None:
                obj["dialogue_id"] = s.dialogue_id
            if s.position is not None:
                obj["position"] = s.position
            fh.write(json.dumps(obj) + "\n")


def split_dataset(ds: Dataset, seed: int) -> Split:
    """Deterministic 80/10/10 shuffle split.

    Sizes are (floor(0.8n), floor(0.1n), rest): any remainder after the two
    floors lands in the test slice first, then train, so every slice stays
    within one sentence of its floor.
    """
    n = len(ds)
    if n < 10:
        raise DataError(f"need at least 10 sentences to split, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(0.8 * n)
    n_val = int(0.1 * n)
    remainder = n - n_train - n_val - n_val
    # remainder is 0, 1 or 2; first extra goes to test, second to train
    if remainder >= 2:
        n_train += 1
    n_test = n - n_train - n_val
    train = tuple(int(i) for i in perm[:n_train])
    val = tuple(int(i) for i in perm[n_train:n_train + n_val])
    test = tuple(int(i) for i in perm[n_train + n_val:])
    assert len(test) == n_test
    return Split(train=train, validation=val, test=test, seed=seed)


def corpus_stats(ds: Dataset) -> dict[str, dict[str, float]]:
    """Per-label-class summary table plus an "all" row.

    Columns: sentence count, count ending in '?', count containing a 5W1H
    token, and the averages of the four per-sentence statistical features
    (words, char length, capitalized words, vocabulary coverage).
    """
    from . import features, rules

    if len(ds) == 0:
        raise DataError("corpus_stats needs a non-empty dataset")

    def summarize(sents: list[LabeledSentence]) -> dict[str, float]:
        n = len(sents)
        stats = np.array(
            [features.statistical_features(s, ds.vocab_size) for s in sents]
        )
        return {
            "count": float(n),
            "ending_in_qm": float(sum(rules.rule_qm(s) for s in sents)),
            "with_5w1h": float(sum(rules.rule_5w1h(s) for s in sents)),
            "avg_words": float(stats[:, 1].mean()),
            "avg_length": float(stats[:, 0].mean()),
            "avg_capitalized": float(stats[:, 2].mean()),
            "avg_coverage": float(stats[:, 3].mean()),
        }

    table = {"all": summarize(ds.sentences)}
    for label in LABELS:
        group = [s for s in ds.sentences if s.label == label]
        if group:
            table[label] = summarize(group)
    return table
