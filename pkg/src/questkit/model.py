"""The multi-channel question classifier (Quest-CNN), its training loop,
and the degenerate baseline configurations (Kim-style word-only CNN,
FastText-style averaged embeddings).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import features as F
from . import nn
from . import rules as R
from .corpus import Dataset, LabeledSentence, Split, UNK_TOKEN
from .errors import ConfigError, DataError, NumericError
from .features import ChannelEncoding, EmbeddingTable, SemanticLexicon
from .postag import POS_TAGS

CLASS_ORDER = ("question", "c_question", "non_question")
N_RULE_BITS = len(R.RuleId)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class QuestCNNConfig:
    """Architecture and training hyperparameters.

    The numeric defaults are the tuned assignment the toolkit ships with:
    batch 32, learning rate 0.012, 160 feature maps per filter size,
    filter sizes (3, 4, 5), hidden layer 96, dropout 0.164, embedding
    dropout 0.016, 30 epochs.
    """

    channels_enabled: tuple[str, ...] = ("word", "pos", "semantic")
    semantic_strategy: str = "separate_channel"
    pos_representation: str = "embedding"
    filter_sizes: tuple[int, ...] = (3, 4, 5)
    feature_maps: int = 160
    hidden_size: int = 96
    dropout: float = 0.164
    embedding_dropout: float = 0.016
    use_stats: bool = True
    use_rule_indicators: bool = False
    embeddings_trainable: bool = True
    lr: float = 0.012
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    embedding_dim: int = 50
    activation: str = "relu"
    batchnorm: bool = True
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    spatial_bn_prepool: bool = True

    def __post_init__(self):
        if not self.filter_sizes or any(h < 1 for h in self.filter_sizes):
            raise ConfigError("filter_sizes must be non-empty, all >= 1")
        if len(set(self.filter_sizes)) != len(self.filter_sizes):
            raise ConfigError("filter_sizes must be distinct")
        if self.feature_maps < 1:
            raise ConfigError("feature_maps must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if not 0.0 <= self.embedding_dropout < 1.0:
            raise ConfigError("embedding_dropout must be in [0, 1)")
        bad = set(self.channels_enabled) - {"word", "pos", "semantic"}
        if bad or "word" not in self.channels_enabled:
            raise ConfigError(
                "channels_enabled must contain 'word' and only "
                "word/pos/semantic"
            )
        if self.pos_representation not in ("embedding", "one_hot"):
            raise ConfigError("pos_representation must be embedding|one_hot")
        if self.semantic_strategy not in ("separate_channel", "replace_words"):
            raise ConfigError(
                "semantic_strategy must be separate_channel|replace_words"
            )
        if self.activation not in ("relu", "tanh"):
            raise ConfigError("activation must be relu|tanh")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.batchnorm and self.batch_size < 2:
            raise ConfigError("batch norm needs batch_size >= 2")


def kim_cnn_config(base: Optional[QuestCNNConfig] = None, **overrides) -> QuestCNNConfig:
    """Word-channel-only degenerate configuration (Kim-style text CNN)."""
    base = base or QuestCNNConfig()
    return dc_replace(
        base, channels_enabled=("word",), use_stats=False,
        use_rule_indicators=False, **overrides,
    )


@dataclass
class SentenceIndex:
    """Per-sentence integer view used by the training fast path."""

    word_ids: np.ndarray
    pos_ids: Optional[np.ndarray]
    sem_ids: Optional[np.ndarray]
    stats: np.ndarray
    rule_bits: Optional[np.ndarray]
    n_tokens: int


def _gather(table: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Row lookup where negative ids (padding / no group) yield zero rows."""
    out = table[np.clip(ids, 0, None)]
    out[ids < 0] = 0.0
    return out


class QuestCNN:
    """Multi-channel CNN over word/POS/semantic channels with statistical
    features, two dense layers, and a softmax head.

    Holds the trainable parameter dict, batch-norm state, vocabulary,
    class list, and training history.  Construction initializes parameters
    from the config seed; call train() to fit.
    """

    def __init__(
        self,
        config: QuestCNNConfig,
        vocab: dict[str, int],
        classes: tuple[str, ...],
        max_len: int,
        word_table: Optional[EmbeddingTable] = None,
        lexicon: Optional[SemanticLexicon] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        if max_len < max(config.filter_sizes):
            raise ConfigError(
                f"padded length {max_len} is shorter than the largest "
                f"filter {max(config.filter_sizes)}"
            )
        if "semantic" in config.channels_enabled and lexicon is None:
            raise ConfigError("semantic channel enabled but no lexicon given")
        if (
            "pos" in config.channels_enabled
            and config.pos_representation == "one_hot"
            and len(POS_TAGS) > config.embedding_dim
        ):
            raise ConfigError(
                f"one-hot POS needs embedding_dim >= {len(POS_TAGS)}"
            )
        self.config = config
        self.classes = tuple(classes)
        self.max_len = max_len
        self.lexicon = lexicon
        self.stats_vocab_size = len(vocab)
        self.stats_mean = np.zeros(4)
        self.stats_std = np.ones(4)
        self.history: list[dict] = []

        self.vocab = dict(vocab)
        if (
            lexicon is not None
            and "semantic" in config.channels_enabled
            and config.semantic_strategy == "replace_words"
        ):
            for group in lexicon.groups:
                self.vocab.setdefault(group.lower(), len(self.vocab))

        rng = rng or np.random.default_rng(config.seed)
        self.rng = rng
        k = config.embedding_dim
        bound = math.sqrt(3.0 / k)

        self.params: dict[str, np.ndarray] = {}
        self.trainable: list[str] = []

        tokens_by_id = sorted(self.vocab, key=self.vocab.get)
        if word_table is not None:
            if word_table.dim != k:
                raise ConfigError(
                    f"word table dim {word_table.dim} != embedding_dim {k}"
                )
            word_rows = np.stack([word_table.lookup(t) for t in tokens_by_id])
        else:
            word_rows = rng.uniform(-bound, bound, size=(len(self.vocab), k))
        self.params["word_emb"] = np.array(word_rows, dtype=np.float64)
        if config.embeddings_trainable:
            self.trainable.append("word_emb")

        if "pos" in config.channels_enabled and config.pos_representation == "embedding":
            self.params["pos_emb"] = rng.uniform(
                -bound, bound, size=(len(POS_TAGS), k)
            )
            if config.embeddings_trainable:
                self.trainable.append("pos_emb")

        self._sep_semantic = (
            "semantic" in config.channels_enabled
            and config.semantic_strategy == "separate_channel"
        )
        if self._sep_semantic:
            if word_table is not None:
                sem_rows = np.stack(
                    [word_table.lookup(g.lower()) for g in lexicon.groups]
                )
            else:
                sem_rows = rng.uniform(
                    -bound, bound, size=(len(lexicon.groups), k)
                )
            self.params["sem_emb"] = np.array(sem_rows, dtype=np.float64)
            if config.embeddings_trainable:
                self.trainable.append("sem_emb")

        n_ch = self.n_channels
        t = config.feature_maps
        self.bn_conv: dict[int, nn.BatchNormState] = {}
        for h in config.filter_sizes:
            fan_in = n_ch * h * k
            a = math.sqrt(6.0 / fan_in)
            self.params[f"conv_w{h}"] = rng.uniform(-a, a, size=(t, n_ch, h, k))
            self.params[f"conv_b{h}"] = np.zeros(t)
            self.trainable += [f"conv_w{h}", f"conv_b{h}"]
            if config.batchnorm:
                st = nn.BatchNormState.create(t, config.bn_momentum, config.bn_eps)
                self.bn_conv[h] = st
                self.params[f"bn{h}_gamma"] = st.gamma
                self.params[f"bn{h}_beta"] = st.beta
                self.trainable += [f"bn{h}_gamma", f"bn{h}_beta"]

        d_in = self.dense_input_width
        a = math.sqrt(6.0 / d_in)
        self.params["dense1_w"] = rng.uniform(
            -a, a, size=(d_in, config.hidden_size)
        )
        self.params["dense1_b"] = np.zeros(config.hidden_size)
        self.trainable += ["dense1_w", "dense1_b"]

        self.bn_hidden: Optional[nn.BatchNormState] = None
        if config.batchnorm:
            self.bn_hidden = nn.BatchNormState.create(
                config.hidden_size, config.bn_momentum, config.bn_eps
            )
            self.params["bnh_gamma"] = self.bn_hidden.gamma
            self.params["bnh_beta"] = self.bn_hidden.beta
            self.trainable += ["bnh_gamma", "bnh_beta"]

        # zero-initialized head: an untrained model emits the uniform
        # distribution regardless of input
        self.params["dense2_w"] = np.zeros(
            (config.hidden_size, len(self.classes))
        )
        self.params["dense2_b"] = np.zeros(len(self.classes))
        self.trainable += ["dense2_w", "dense2_b"]

    # -- structure ---------------------------------------------------------

    @property
    def n_channels(self) -> int:
        n = 1
        if "pos" in self.config.channels_enabled:
            n += 1
        if self._sep_semantic:
            n += 1
        return n

    @property
    def pooled_dim(self) -> int:
        return len(self.config.filter_sizes) * self.config.feature_maps

    @property
    def dense_input_width(self) -> int:
        d = self.pooled_dim
        if self.config.use_stats:
            d += 4
        if self.config.use_rule_indicators:
            d += N_RULE_BITS
        return d

    # -- sentence indexing / encoding --------------------------------------

    def index_sentence(self, s: LabeledSentence) -> SentenceIndex:
        cfg = self.config
        tokens = F.tokenize(s.text)
        if len(tokens) > self.max_len:
            raise DataError(
                f"sentence {s.id!r} has {len(tokens)} tokens, model padded "
                f"length is {self.max_len}"
            )
        word_tokens = tokens
        if (
            self.lexicon is not None
            and "semantic" in cfg.channels_enabled
            and cfg.semantic_strategy == "replace_words"
        ):
            word_tokens = [
                g.lower() if (g := self.lexicon.group_of(t)) else t
                for t in tokens
            ]
        word_ids = np.full(self.max_len, F.PAD_ID, dtype=np.int64)
        for i, tok in enumerate(word_tokens):
            word_ids[i] = self.vocab.get(tok.lower(), self.vocab[UNK_TOKEN])

        pos_ids = None
        if "pos" in cfg.channels_enabled:
            tags = F.pos_tag(tokens, sentence=s)
            pos_ids = np.full(self.max_len, F.PAD_ID, dtype=np.int64)
            for i, tag in enumerate(tags):
                pos_ids[i] = F.tag_index(tag)

        sem_ids = None
        if self._sep_semantic:
            sem_ids = np.full(self.max_len, F.PAD_ID, dtype=np.int64)
            for i, tok in enumerate(tokens):
                group = self.lexicon.group_of(tok)
                if group is not None:
                    sem_ids[i] = self.lexicon.groups.index(group)

        stats = F.statistical_features(s, self.stats_vocab_size)
        bits = None
        if cfg.use_rule_indicators:
            bits = np.array(R.rule_indicator_vector(s), dtype=np.float64)
        return SentenceIndex(word_ids, pos_ids, sem_ids, stats, bits,
                             len(tokens))

    def _lookup(self, batch: list[SentenceIndex]) -> np.ndarray:
        """(B, C, max_len, dim) channel tensor from the current tables."""
        cfg = self.config
        wids = np.stack([ix.word_ids for ix in batch])
        chans = [_gather(self.params["word_emb"], wids)]
        if "pos" in cfg.channels_enabled:
            pids = np.stack([ix.pos_ids for ix in batch])
            if cfg.pos_representation == "embedding":
                chans.append(_gather(self.params["pos_emb"], pids))
            else:
                one_hot = np.zeros(
                    (len(batch), self.max_len, cfg.embedding_dim)
                )
                rows, cols = np.nonzero(pids >= 0)
                one_hot[rows, cols, pids[rows, cols]] = 1.0
                chans.append(one_hot)
        if self._sep_semantic:
            sids = np.stack([ix.sem_ids for ix in batch])
            chans.append(_gather(self.params["sem_emb"], sids))
        return np.stack(chans, axis=1)

    def encode_sentence(self, s: LabeledSentence) -> ChannelEncoding:
        """ChannelEncoding built from the model's own (current) tables."""
        ix = self.index_sentence(s)
        x = self._lookup([ix])[0]
        names = ["word"]
        if "pos" in self.config.channels_enabled:
            names.append("pos")
        if self._sep_semantic:
            names.append("semantic")
        return ChannelEncoding(
            channels=list(x), channel_names=tuple(names),
            token_ids=ix.word_ids.copy(), stats=ix.stats.copy(),
            n_tokens=ix.n_tokens,
        )

    # -- forward / backward -------------------------------------------------

    def _zscore(self, stats: np.ndarray) -> np.ndarray:
        return (stats - self.stats_mean) / self.stats_std

    def _forward_core(
        self,
        x: np.ndarray,
        stats: np.ndarray,
        rule_bits: Optional[np.ndarray],
        training: bool,
        rng: Optional[np.random.Generator] = None,
        update_running: bool = True,
    ) -> tuple[np.ndarray, dict]:
        cfg = self.config
        cache: dict = {}
        x, emb_mask = nn.embedding_dropout(
            x, cfg.embedding_dropout, training, rng
        )
        cache["x"] = x
        cache["emb_mask"] = emb_mask

        pooled_parts = []
        for h in cfg.filter_sizes:
            raw = nn.conv_raw(x, self.params[f"conv_w{h}"], self.params[f"conv_b{h}"])
            c = {"raw": raw}
            pre_act = raw
            if cfg.batchnorm and cfg.spatial_bn_prepool:
                pre_act, c["bn"] = nn.spatial_batchnorm_forward(
                    raw, self.bn_conv[h], training, update_running
                )
            c["pre_act"] = pre_act
            act = nn.relu(pre_act) if cfg.activation == "relu" else np.tanh(pre_act)
            c["act"] = act
            vals, idx = nn.maxpool_batch(act)
            c["pool_idx"] = idx
            pooled_parts.append(vals)
            cache[f"conv{h}"] = c
        pooled = np.concatenate(pooled_parts, axis=1)
        if cfg.batchnorm and not cfg.spatial_bn_prepool:
            pooled_bn = []
            for i, h in enumerate(cfg.filter_sizes):
                t = cfg.feature_maps
                seg, bn_cache = nn.batchnorm_forward(
                    pooled[:, i * t:(i + 1) * t], self.bn_conv[h],
                    training, update_running,
                )
                cache[f"conv{h}"]["bn"] = bn_cache
                pooled_bn.append(seg)
            pooled = np.concatenate(pooled_bn, axis=1)
        cache["pooled"] = pooled

        parts = [pooled]
        if cfg.use_stats:
            parts.append(self._zscore(stats))
        if cfg.use_rule_indicators:
            if rule_bits is None:
                raise DataError(
                    "config enables rule indicators but none were supplied"
                )
            parts.append(rule_bits)
        elif rule_bits is not None:
            raise DataError(
                "rule indicators supplied but the config does not use them"
            )
        z = np.concatenate(parts, axis=1)
        cache["z"] = z

        h1 = nn.dense_forward(z, self.params["dense1_w"], self.params["dense1_b"])
        cache["h1"] = h1
        pre_act = h1
        if cfg.batchnorm:
            pre_act, cache["bnh"] = nn.batchnorm_forward(
                h1, self.bn_hidden, training, update_running
            )
        cache["h_pre_act"] = pre_act
        h_act = nn.relu(pre_act) if cfg.activation == "relu" else np.tanh(pre_act)
        cache["h_act"] = h_act
        h_drop, drop_mask = nn.dropout(h_act, cfg.dropout, training, rng)
        cache["h_drop"] = h_drop
        cache["drop_mask"] = drop_mask
        logits = nn.dense_forward(
            h_drop, self.params["dense2_w"], self.params["dense2_b"]
        )
        return logits, cache

    def _act_backward(self, grad, cache_in, cache_out):
        if self.config.activation == "relu":
            return nn.relu_backward(grad, cache_in)
        return nn.tanh_backward(grad, cache_out)

    def _backward_core(self, dlogits: np.ndarray, cache: dict
                       ) -> tuple[dict[str, np.ndarray], np.ndarray]:
        cfg = self.config
        grads: dict[str, np.ndarray] = {}
        dh_drop, grads["dense2_w"], grads["dense2_b"] = nn.dense_backward(
            dlogits, cache["h_drop"], self.params["dense2_w"]
        )
        if cache["drop_mask"] is not None:
            dh_drop = dh_drop * cache["drop_mask"]
        dpre = self._act_backward(dh_drop, cache["h_pre_act"], cache["h_act"])
        if cfg.batchnorm:
            dpre, grads["bnh_gamma"], grads["bnh_beta"] = nn.batchnorm_backward(
                dpre, cache["bnh"]
            )
        dz, grads["dense1_w"], grads["dense1_b"] = nn.dense_backward(
            dpre, cache["z"], self.params["dense1_w"]
        )
        dpooled = dz[:, : self.pooled_dim]

        t = cfg.feature_maps
        dx = np.zeros_like(cache["x"])
        for i, h in enumerate(cfg.filter_sizes):
            c = cache[f"conv{h}"]
            dvals = dpooled[:, i * t:(i + 1) * t]
            if cfg.batchnorm and not cfg.spatial_bn_prepool:
                dvals, grads[f"bn{h}_gamma"], grads[f"bn{h}_beta"] = (
                    nn.batchnorm_backward(dvals, c["bn"])
                )
            dact = nn.maxpool_backward(dvals, c["act"].shape, c["pool_idx"])
            dpre = self._act_backward(dact, c["pre_act"], c["act"])
            if cfg.batchnorm and cfg.spatial_bn_prepool:
                dpre, grads[f"bn{h}_gamma"], grads[f"bn{h}_beta"] = (
                    nn.spatial_batchnorm_backward(dpre, c["bn"])
                )
            dxi, grads[f"conv_w{h}"], grads[f"conv_b{h}"] = nn.conv_backward(
                dpre, cache["x"], self.params[f"conv_w{h}"]
            )
            dx += dxi
        if cache["emb_mask"] is not None:
            dx = dx * cache["emb_mask"][:, None, :, None]
        return grads, dx

    def batch_loss_grads(
        self,
        batch: list[SentenceIndex],
        labels: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        training: bool = True,
        update_running: bool = True,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Forward + backward over one mini-batch; grads cover trainables only."""
        cfg = self.config
        x = self._lookup(batch)
        stats = np.stack([ix.stats for ix in batch])
        bits = (
            np.stack([ix.rule_bits for ix in batch])
            if cfg.use_rule_indicators else None
        )
        logits, cache = self._forward_core(
            x, stats, bits, training, rng, update_running
        )
        loss, dlogits = nn.softmax_xent(logits, labels)
        grads, dx = self._backward_core(dlogits, cache)

        ch = 0
        if "word_emb" in self.trainable:
            g = np.zeros_like(self.params["word_emb"])
            wids = np.stack([ix.word_ids for ix in batch])
            valid = wids >= 0
            np.add.at(g, wids[valid], dx[:, ch][valid])
            grads["word_emb"] = g
        ch += 1
        if "pos" in cfg.channels_enabled:
            if "pos_emb" in self.trainable:
                g = np.zeros_like(self.params["pos_emb"])
                pids = np.stack([ix.pos_ids for ix in batch])
                valid = pids >= 0
                np.add.at(g, pids[valid], dx[:, ch][valid])
                grads["pos_emb"] = g
            ch += 1
        if self._sep_semantic and "sem_emb" in self.trainable:
            g = np.zeros_like(self.params["sem_emb"])
            sids = np.stack([ix.sem_ids for ix in batch])
            valid = sids >= 0
            np.add.at(g, sids[valid], dx[:, ch][valid])
            grads["sem_emb"] = g

        return loss, {k: v for k, v in grads.items() if k in self.trainable}

    def forward(self, enc: ChannelEncoding,
                rule_bits: Optional[np.ndarray] = None) -> np.ndarray:
        """Class probability vector for one encoded sentence (eval mode)."""
        expected = self.n_channels
        if len(enc.channels) != expected:
            raise DataError(
                f"encoding has {len(enc.channels)} channels, model expects "
                f"{expected}"
            )
        x = np.stack(enc.channels)[None]
        stats = enc.stats[None]
        bits = None
        if rule_bits is not None:
            bits = np.asarray(rule_bits, dtype=np.float64)[None]
        logits, _ = self._forward_core(x, stats, bits, training=False)
        return nn.softmax(logits)[0]

    def predict_proba_indices(self, batch: list[SentenceIndex]) -> np.ndarray:
        x = self._lookup(batch)
        stats = np.stack([ix.stats for ix in batch])
        bits = (
            np.stack([ix.rule_bits for ix in batch])
            if self.config.use_rule_indicators else None
        )
        logits, _ = self._forward_core(x, stats, bits, training=False)
        return nn.softmax(logits)

    # -- state snapshots ----------------------------------------------------

    def snapshot(self) -> dict:
        snap = {name: arr.copy() for name, arr in self.params.items()}
        snap["__running__"] = {
            f"conv{h}": (st.running_mean.copy(), st.running_var.copy())
            for h, st in self.bn_conv.items()
        }
        if self.bn_hidden is not None:
            snap["__running__"]["hidden"] = (
                self.bn_hidden.running_mean.copy(),
                self.bn_hidden.running_var.copy(),
            )
        return snap

    def restore(self, snap: dict) -> None:
        for name, arr in self.params.items():
            arr[...] = snap[name]
        running = snap["__running__"]
        for h, st in self.bn_conv.items():
            st.running_mean, st.running_var = (
                running[f"conv{h}"][0].copy(), running[f"conv{h}"][1].copy()
            )
        if self.bn_hidden is not None:
            self.bn_hidden.running_mean, self.bn_hidden.running_var = (
                running["hidden"][0].copy(), running["hidden"][1].copy()
            )


TrainedModel = QuestCNN


# ---------------------------------------------------------------------------
# training

def _label_array(ds: Dataset, idxs, classes: tuple[str, ...]) -> np.ndarray:
    out = []
    for i in idxs:
        label = ds.sentences[i].label
        if label is None:
            raise DataError(
                f"sentence {ds.sentences[i].id!r} has no gold label"
            )
        out.append(classes.index(label))
    return np.array(out, dtype=np.int64)


def infer_classes(ds: Dataset, split: Split) -> tuple[str, ...]:
    present = {
        ds.sentences[i].label
        for i in tuple(split.train) + tuple(split.validation)
        if ds.sentences[i].label is not None
    }
    classes = tuple(c for c in CLASS_ORDER if c in present)
    if len(classes) < 2:
        raise DataError(
            f"need at least two label classes to train, found {classes}"
        )
    return classes


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    # batch norm cannot normalize a singleton batch: fold it into the
    # previous chunk
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _micro_f1(gold: np.ndarray, pred: np.ndarray) -> float:
    return float((gold == pred).mean()) if len(gold) else 0.0


def _fit(
    model,
    cfg: QuestCNNConfig,
    indexed: list[SentenceIndex],
    ds: Dataset,
    split: Split,
    rng: np.random.Generator,
    track_train_f1: bool = False,
    early_stop_train_f1: Optional[float] = None,
) -> None:
    """Shared mini-batch Adam loop with best-validation-epoch selection."""
    classes = model.classes
    train_idx = np.array(split.train, dtype=np.int64)
    val_idx = np.array(split.validation, dtype=np.int64)
    y_train = _label_array(ds, train_idx, classes)
    y_val = _label_array(ds, val_idx, classes)

    train_stats = np.stack([indexed[i].stats for i in train_idx])
    model.stats_mean = train_stats.mean(axis=0)
    std = train_stats.std(axis=0)
    std[std == 0.0] = 1.0
    model.stats_std = std

    adam = nn.AdamState(lr=cfg.lr)
    trainable = {k: model.params[k] for k in model.trainable}
    best_f1 = -1.0
    best_snap = None

    def predict(idxs: np.ndarray) -> np.ndarray:
        preds = []
        for i in range(0, len(idxs), 256):
            chunk = [indexed[j] for j in idxs[i:i + 256]]
            preds.append(np.argmax(model.predict_proba_indices(chunk), axis=1))
        return np.concatenate(preds) if preds else np.array([], dtype=np.int64)

    for epoch in range(1, cfg.epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        epoch_loss = 0.0
        n_seen = 0
        for b, chunk in enumerate(_batches(order, cfg.batch_size)):
            batch = [indexed[i] for i in chunk]
            labels = _label_array(ds, chunk, classes)
            loss, grads = model.batch_loss_grads(batch, labels, rng=rng)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {b}"
                )
            nn.adam_step(trainable, grads, adam)
            epoch_loss += loss * len(chunk)
            n_seen += len(chunk)
        val_f1 = _micro_f1(y_val, predict(val_idx))
        record = {
            "epoch": epoch,
            "train_loss": epoch_loss / max(n_seen, 1),
            "val_f1": val_f1,
        }
        if track_train_f1 or early_stop_train_f1 is not None:
            record["train_f1"] = _micro_f1(y_train, predict(train_idx))
        model.history.append(record)
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_snap = model.snapshot()
        if (
            early_stop_train_f1 is not None
            and record.get("train_f1", 0.0) >= early_stop_train_f1
        ):
            break
    if best_snap is not None:
        model.restore(best_snap)


def train(
    cfg: QuestCNNConfig,
    ds: Dataset,
    split: Split,
    word_table: Optional[EmbeddingTable] = None,
    lexicon: Optional[SemanticLexicon] = None,
    track_train_f1: bool = False,
    early_stop_train_f1: Optional[float] = None,
) -> QuestCNN:
    """Train a QuestCNN; returns the best-validation-epoch checkpoint.

    word_table=None means randomly initialized embeddings; pass a table and
    embeddings_trainable=False for the static variant, True for fine-tuning.
    """
    classes = infer_classes(ds, split)
    rng = np.random.default_rng(cfg.seed)
    max_tokens = max(len(F.tokenize(s.text)) for s in ds.sentences)
    max_len = max(max_tokens, max(cfg.filter_sizes))
    if lexicon is not None and cfg.semantic_strategy != lexicon.strategy:
        lexicon = SemanticLexicon(
            groups=lexicon.groups, word_to_group=lexicon.word_to_group,
            strategy=cfg.semantic_strategy,
        )
    model = QuestCNN(
        cfg, ds.vocab, classes, max_len,
        word_table=word_table, lexicon=lexicon, rng=rng,
    )
    indexed = [model.index_sentence(s) for s in ds.sentences]
    _fit(model, cfg, indexed, ds, split, rng,
         track_train_f1=track_train_f1,
         early_stop_train_f1=early_stop_train_f1)
    return model


# ---------------------------------------------------------------------------
# FastText-style baseline

class FastTextModel:
    """Averaged word embeddings into a single dense + softmax layer."""

    def __init__(self, config: QuestCNNConfig, vocab: dict[str, int],
                 classes: tuple[str, ...], max_len: int,
                 word_table: Optional[EmbeddingTable] = None,
                 rng: Optional[np.random.Generator] = None):
        self.config = config
        self.classes = tuple(classes)
        self.vocab = dict(vocab)
        self.max_len = max_len
        self.lexicon = None
        self.stats_vocab_size = len(vocab)
        self.history: list[dict] = []
        self.stats_mean = np.zeros(4)
        self.stats_std = np.ones(4)
        rng = rng or np.random.default_rng(config.seed)
        self.rng = rng
        k = config.embedding_dim
        bound = math.sqrt(3.0 / k)
        tokens_by_id = sorted(self.vocab, key=self.vocab.get)
        if word_table is not None:
            rows = np.stack([word_table.lookup(t) for t in tokens_by_id])
        else:
            rows = rng.uniform(-bound, bound, size=(len(vocab), k))
        self.params = {
            "word_emb": np.array(rows, dtype=np.float64),
            "dense_w": np.zeros((k, len(classes))),
            "dense_b": np.zeros(len(classes)),
        }
        self.trainable = ["dense_w", "dense_b"]
        if config.embeddings_trainable:
            self.trainable.insert(0, "word_emb")

    def index_sentence(self, s: LabeledSentence) -> SentenceIndex:
        tokens = F.tokenize(s.text)
        if len(tokens) > self.max_len:
            raise DataError(
                f"sentence {s.id!r} has {len(tokens)} tokens, model padded "
                f"length is {self.max_len}"
            )
        ids = np.full(self.max_len, F.PAD_ID, dtype=np.int64)
        for i, tok in enumerate(tokens):
            ids[i] = self.vocab.get(tok.lower(), self.vocab[UNK_TOKEN])
        stats = F.statistical_features(s, self.stats_vocab_size)
        return SentenceIndex(ids, None, None, stats, None, len(tokens))

    def _mean_embedding(
        self, batch: list[SentenceIndex]
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ids = np.stack([ix.word_ids for ix in batch])
        emb = _gather(self.params["word_emb"], ids)
        counts = np.array([ix.n_tokens for ix in batch], dtype=np.float64)
        return emb.sum(axis=1) / counts[:, None], ids, counts

    def batch_loss_grads(self, batch, labels, rng=None, training=True,
                         update_running=True):
        mean_emb, ids, counts = self._mean_embedding(batch)
        logits = nn.dense_forward(
            mean_emb, self.params["dense_w"], self.params["dense_b"]
        )
        loss, dlogits = nn.softmax_xent(logits, labels)
        dmean, dw, db = nn.dense_backward(
            dlogits, mean_emb, self.params["dense_w"]
        )
        grads = {"dense_w": dw, "dense_b": db}
        if "word_emb" in self.trainable:
            g = np.zeros_like(self.params["word_emb"])
            drows = dmean[:, None, :] / counts[:, None, None]
            drows = np.broadcast_to(drows, (len(batch), self.max_len,
                                            drows.shape[2]))
            valid = ids >= 0
            np.add.at(g, ids[valid], drows[valid])
            grads["word_emb"] = g
        return loss, grads

    def predict_proba_indices(self, batch: list[SentenceIndex]) -> np.ndarray:
        mean_emb, _, _ = self._mean_embedding(batch)
        logits = nn.dense_forward(
            mean_emb, self.params["dense_w"], self.params["dense_b"]
        )
        return nn.softmax(logits)

    def representation(self, s: LabeledSentence) -> np.ndarray:
        """Order-invariant averaged embedding of one sentence."""
        mean_emb, _, _ = self._mean_embedding([self.index_sentence(s)])
        return mean_emb[0]

    def snapshot(self) -> dict:
        snap = {k: v.copy() for k, v in self.params.items()}
        snap["__running__"] = {}
        return snap

    def restore(self, snap: dict) -> None:
        for name, arr in self.params.items():
            arr[...] = snap[name]


def fasttext_baseline(cfg: QuestCNNConfig, ds: Dataset, split: Split,
                      word_table: Optional[EmbeddingTable] = None,
                      track_train_f1: bool = False) -> FastTextModel:
    """Train the averaged-embedding baseline with the shared loop."""
    classes = infer_classes(ds, split)
    rng = np.random.default_rng(cfg.seed)
    max_len = max(len(F.tokenize(s.text)) for s in ds.sentences)
    model = FastTextModel(cfg, ds.vocab, classes, max_len,
                          word_table=word_table, rng=rng)
    indexed = [model.index_sentence(s) for s in ds.sentences]
    _fit(model, cfg, indexed, ds, split, rng, track_train_f1=track_train_f1)
    return model


# ---------------------------------------------------------------------------
# prediction and checkpoints

def predict_batch(model, sentences: list[LabeledSentence]) -> list[dict]:
    """Per-sentence {"id", "label", "probs"}; unencodable sentences get an
    {"id", "error"} record instead of aborting the batch."""
    results: list[dict] = []
    encodable: list[tuple[int, SentenceIndex]] = []
    for s in sentences:
        try:
            encodable.append((len(results), model.index_sentence(s)))
            results.append({"id": s.id})
        except (DataError, ConfigError) as exc:
            results.append({"id": s.id, "error": str(exc)})
    for start in range(0, len(encodable), 256):
        chunk = encodable[start:start + 256]
        probs = model.predict_proba_indices([ix for _, ix in chunk])
        for (slot, _), p in zip(chunk, probs):
            results[slot]["label"] = model.classes[int(np.argmax(p))]
            results[slot]["probs"] = [float(v) for v in p]
    return results


def save_checkpoint(model, path: str | Path) -> None:
    """Versioned JSON checkpoint: config, vocabulary, shapes and arrays."""
    is_cnn = isinstance(model, QuestCNN)
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "questcnn" if is_cnn else "fasttext",
        "config": _config_to_dict(model.config),
        "classes": list(model.classes),
        "vocab": model.vocab,
        "max_len": model.max_len,
        "stats_vocab_size": model.stats_vocab_size,
        "stats_mean": model.stats_mean.tolist(),
        "stats_std": model.stats_std.tolist(),
        "history": model.history,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in model.params.items()
        },
    }
    if is_cnn:
        blob["lexicon"] = (
            None if model.lexicon is None else {
                "groups": list(model.lexicon.groups),
                "word_to_group": model.lexicon.word_to_group,
                "strategy": model.lexicon.strategy,
            }
        )
        blob["bn_running"] = {
            str(h): {
                "mean": st.running_mean.tolist(),
                "var": st.running_var.tolist(),
            }
            for h, st in model.bn_conv.items()
        }
        if model.bn_hidden is not None:
            blob["bn_running"]["hidden"] = {
                "mean": model.bn_hidden.running_mean.tolist(),
                "var": model.bn_hidden.running_var.tolist(),
            }
    Path(path).write_text(json.dumps(blob))


def _config_to_dict(cfg: QuestCNNConfig) -> dict:
    d = dict(cfg.__dict__)
    d["channels_enabled"] = list(cfg.channels_enabled)
    d["filter_sizes"] = list(cfg.filter_sizes)
    return d


def config_from_dict(d: dict) -> QuestCNNConfig:
    d = dict(d)
    unknown = set(d) - set(QuestCNNConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "channels_enabled" in d:
        d["channels_enabled"] = tuple(d["channels_enabled"])
    if "filter_sizes" in d:
        d["filter_sizes"] = tuple(d["filter_sizes"])
    return QuestCNNConfig(**d)


def load_checkpoint(path: str | Path):
    """Rebuild a model from save_checkpoint output, validating shapes."""
    blob = json.loads(Path(path).read_text())
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise DataError(
            f"unsupported checkpoint version {blob.get('format_version')}"
        )
    cfg = config_from_dict(blob["config"])
    classes = tuple(blob["classes"])
    vocab = {k: int(v) for k, v in blob["vocab"].items()}
    if blob["kind"] == "questcnn":
        lex = None
        if blob.get("lexicon"):
            lex = SemanticLexicon(
                groups=tuple(blob["lexicon"]["groups"]),
                word_to_group=blob["lexicon"]["word_to_group"],
                strategy=blob["lexicon"]["strategy"],
            )
        model = QuestCNN(cfg, vocab, classes, blob["max_len"], lexicon=lex)
    else:
        model = FastTextModel(cfg, vocab, classes, blob["max_len"])
    model.stats_vocab_size = blob["stats_vocab_size"]
    model.stats_mean = np.array(blob["stats_mean"])
    model.stats_std = np.array(blob["stats_std"])
    model.history = blob["history"]
    for name, arr in model.params.items():
        if name not in blob["params"]:
            raise DataError(f"checkpoint is missing parameter {name!r}")
        rec = blob["params"][name]
        if tuple(rec["shape"]) != arr.shape:
            raise DataError(
                f"checkpoint parameter {name!r} has shape {rec['shape']}, "
                f"model expects {list(arr.shape)}"
            )
        arr[...] = np.array(rec["data"]).reshape(arr.shape)
    if isinstance(model, QuestCNN):
        running = blob.get("bn_running", {})
        for h, st in model.bn_conv.items():
            rec = running[str(h)]
            st.running_mean = np.array(rec["mean"])
            st.running_var = np.array(rec["var"])
        if model.bn_hidden is not None:
            rec = running["hidden"]
            model.bn_hidden.running_mean = np.array(rec["mean"])
            model.bn_hidden.running_var = np.array(rec["var"])
    return model
