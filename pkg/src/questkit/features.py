"""Sentence -> multi-channel encoding: word, POS and semantic channels plus
the 4-vector of statistical features (char length, word count, capitalized
words, vocabulary coverage).
"""

from __future__ import annotations

import hashlib
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .corpus import LabeledSentence
from .errors import ConfigError, DataError
from .postag import POS_TAGS, default_tagger

_PUNCT = set(string.punctuation)

FIVE_W1H = frozenset({"what", "who", "where", "when", "why", "how"})

# Semantic group inventory used when no lexicon overrides it.
DEFAULT_SEMANTIC_GROUPS = ("Anatomy", "Disorders", "Phenomena", "Procedures")

PAD_ID = -1


def tokenize(text: str) -> list[str]:
    """Split on whitespace, then detach leading/trailing punctuation.

    Punctuation inside a token (contractions, "Kt/V") is preserved; '?' and
    other end punctuation become their own tokens.
    """
    if not text or not text.strip():
        raise DataError("cannot tokenize empty text")
    tokens: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        trail: list[str] = []
        while len(chunk) > 1 and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while len(chunk) > 1 and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


def is_word_token(token: str) -> bool:
    """Word tokens carry at least one alphanumeric character."""
    return any(ch.isalnum() for ch in token)


def statistical_features(s: LabeledSentence, vocab_size: int) -> np.ndarray:
    """(char length, word count, capitalized words, vocabulary coverage).

    Word count excludes detached punctuation tokens; coverage is the number
    of unique lowercased word tokens divided by the vocabulary size.
    """
    if vocab_size <= 0:
        raise DataError("vocab_size must be positive")
    tokens = tokenize(s.text)
    words = [t for t in tokens if is_word_token(t)]
    n_caps = sum(1 for t in tokens if t[0].isupper())
    coverage = len({w.lower() for w in words}) / vocab_size
    return np.array(
        [len(s.text), len(words), n_caps, coverage], dtype=np.float64
    )


def pos_tag(
    tokens: list[str],
    sentence: Optional[LabeledSentence] = None,
    tagger: Optional[Callable[[list[str]], list[str]]] = None,
) -> list[str]:
    """One Penn-style tag per token.

    Pre-computed tags on the sentence win; otherwise the pluggable tagger
    runs (default: closed-class lexicon + suffix heuristics + NN fallback).
    """
    if not tokens:
        raise DataError("cannot tag an empty token list")
    if sentence is not None and sentence.pos_tags is not None:
        tags = list(sentence.pos_tags)
    else:
        tags = (tagger or default_tagger)(tokens)
    if len(tags) != len(tokens):
        raise DataError(
            f"tagger returned {len(tags)} tags for {len(tokens)} tokens"
        )
    return tags


def _stable_token_seed(token: str, seed: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return (int.from_bytes(digest[:8], "little") ^ (seed & 0xFFFFFFFFFFFFFFFF))


@dataclass
class EmbeddingTable:
    """Token -> dim-vector table with a deterministic OOV policy.

    Unknown tokens get a vector drawn uniformly from
    [-sqrt(3/dim), +sqrt(3/dim)] componentwise, seeded by (token, oov_seed),
    so repeated queries return the identical vector.
    """

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    trainable: bool = True
    oov_seed: int = 0

    def __post_init__(self):
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(
                    f"embedding for {tok!r} has shape {vec.shape}, "
                    f"expected ({self.dim},)"
                )

    @property
    def oov_bound(self) -> float:
        return math.sqrt(3.0 / self.dim)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            rng = np.random.default_rng(_stable_token_seed(token, self.oov_seed))
            bound = self.oov_bound
            vec = rng.uniform(-bound, bound, size=self.dim)
            self.vectors[token] = vec
        return vec


def random_table(
    tokens: list[str], dim: int, seed: int, trainable: bool = True
) -> EmbeddingTable:
    """Uniform [-sqrt(3/dim), sqrt(3/dim)] vectors for every token."""
    rng = np.random.default_rng(seed)
    bound = math.sqrt(3.0 / dim)
    vectors = {t: rng.uniform(-bound, bound, size=dim) for t in tokens}
    return EmbeddingTable(dim=dim, vectors=vectors, trainable=trainable, oov_seed=seed)


def load_word2vec(path: str | Path, dim: int, trainable: bool = True,
                  oov_seed: int = 0) -> EmbeddingTable:
    """Parse a word2vec text file: header "count dim", then token + floats.

    The header count must match the number of vector lines and the header
    dim must match the requested one.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError("line 1: expected header 'count dim'")
        try:
            count, file_dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise DataError("line 1: non-integer header fields") from exc
        if file_dim != dim:
            raise DataError(
                f"embedding dim mismatch: file declares {file_dim}, caller "
                f"expects {dim}"
            )
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(
                    f"line {lineno}: expected 1 token + {dim} floats, "
                    f"got {len(parts)} fields"
                )
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"line {lineno}: non-numeric component") from exc
            vectors[parts[0]] = vec
    if len(vectors) != count:
        raise DataError(
            f"header declares {count} vectors but file holds {len(vectors)}"
        )
    return EmbeddingTable(dim=dim, vectors=vectors, trainable=trainable,
                          oov_seed=oov_seed)


@dataclass
class SemanticLexicon:
    """Token -> semantic group mapping with two wiring strategies.

    "separate_channel" emits a third channel of group vectors;
    "replace_words" swaps mapped tokens for their group name in the word
    channel instead.
    """

    groups: tuple[str, ...] = DEFAULT_SEMANTIC_GROUPS
    word_to_group: dict[str, str] = field(default_factory=dict)
    strategy: str = "separate_channel"

    def __post_init__(self):
        if self.strategy not in ("separate_channel", "replace_words"):
            raise ConfigError(f"unknown semantic strategy {self.strategy!r}")
        for tok, group in self.word_to_group.items():
            if group not in self.groups:
                raise DataError(
                    f"lexicon maps {tok!r} to unknown group {group!r}"
                )

    def group_of(self, token: str) -> Optional[str]:
        return self.word_to_group.get(token.lower())


def load_lexicon(path: str | Path, strategy: str = "separate_channel",
                 groups: tuple[str, ...] = ()) -> SemanticLexicon:
    """Read a 'token<TAB>group' TSV; group inventory defaults to the groups
    present in the file plus the standard four."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"lexicon file not found: {path}")
    word_to_group: dict[str, str] = {}
    seen_groups: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"line {lineno}: expected 'token<TAB>group'")
            token, group = parts[0].strip().lower(), parts[1].strip()
            word_to_group[token] = group
            if group not in seen_groups:
                seen_groups.append(group)
    inventory = tuple(groups) if groups else tuple(
        dict.fromkeys(list(DEFAULT_SEMANTIC_GROUPS) + seen_groups)
    )
    return SemanticLexicon(groups=inventory, word_to_group=word_to_group,
                           strategy=strategy)


@dataclass
class ChannelEncoding:
    """Per-sentence stack of channel matrices plus statistical features.

    Every channel matrix is (max_len x dim); token_ids has PAD_ID in the
    padded tail.  channel_names records the channel order.
    """

    channels: list[np.ndarray]
    channel_names: tuple[str, ...]
    token_ids: np.ndarray
    stats: np.ndarray
    n_tokens: int

    def __post_init__(self):
        shapes = {c.shape for c in self.channels}
        if len(shapes) > 1:
            raise DataError(f"channel shapes differ: {shapes}")


PosSpec = Union[EmbeddingTable, str, None]


def encode(
    s: LabeledSentence,
    word_emb: EmbeddingTable,
    pos_emb: PosSpec,
    lex: Optional[SemanticLexicon],
    max_len: int,
    vocab_size: int,
    tagger: Optional[Callable[[list[str]], list[str]]] = None,
    vocab: Optional[dict[str, int]] = None,
) -> ChannelEncoding:
    """Build the channel stack for one sentence.

    pos_emb may be an EmbeddingTable, the string "one_hot" (tag indicator
    vectors zero-extended to the word dim), or None to skip the POS channel.
    With lex.strategy == "replace_words" mapped tokens are swapped for their
    lowercased group name in the word channel and no semantic channel is
    emitted.
    """
    tokens = tokenize(s.text)
    if len(tokens) > max_len:
        raise DataError(
            f"sentence {s.id!r} has {len(tokens)} tokens, padded length is "
            f"{max_len}"
        )
    dim = word_emb.dim

    word_tokens = list(tokens)
    if lex is not None and lex.strategy == "replace_words":
        word_tokens = [
            lex.group_of(t).lower() if lex.group_of(t) else t for t in tokens
        ]

    channels: list[np.ndarray] = []
    names: list[str] = []

    word_mat = np.zeros((max_len, dim))
    for i, tok in enumerate(word_tokens):
        word_mat[i] = word_emb.lookup(tok.lower())
    channels.append(word_mat)
    names.append("word")

    if pos_emb is not None:
        tags = pos_tag(tokens, sentence=s, tagger=tagger)
        pos_mat = np.zeros((max_len, dim))
        if pos_emb == "one_hot":
            if len(POS_TAGS) > dim:
                raise ConfigError(
                    f"one-hot POS needs dim >= {len(POS_TAGS)}, got {dim}"
                )
            for i, tag in enumerate(tags):
                pos_mat[i, tag_index(tag)] = 1.0
        elif isinstance(pos_emb, EmbeddingTable):
            if pos_emb.dim != dim:
                raise ConfigError(
                    "POS embedding dim must match the word dim"
                )
            for i, tag in enumerate(tags):
                pos_mat[i] = pos_emb.lookup(tag)
        else:
            raise ConfigError(f"bad pos_emb value {pos_emb!r}")
        channels.append(pos_mat)
        names.append("pos")

    if lex is not None and lex.strategy == "separate_channel":
        group_vectors = {
            g: word_emb.lookup(g.lower()) for g in lex.groups
        }
        sem_mat = np.zeros((max_len, dim))
        for i, tok in enumerate(tokens):
            group = lex.group_of(tok)
            if group is not None:
                sem_mat[i] = group_vectors[group]
        channels.append(sem_mat)
        names.append("semantic")

    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, tok in enumerate(tokens):
        ids[i] = vocab.get(tok.lower(), 0) if vocab is not None else 0
    stats = statistical_features(s, vocab_size)
    return ChannelEncoding(
        channels=channels,
        channel_names=tuple(names),
        token_ids=ids,
        stats=stats,
        n_tokens=len(tokens),
    )


def tag_index(tag: str) -> int:
    """Position of a tag in the supported inventory (one-hot index)."""
    try:
        return POS_TAGS.index(tag)
    except ValueError:
        raise DataError(f"POS tag {tag!r} not in the supported inventory")
