"""Metrics, hyperparameter random search, expected-validation-performance
curves, and the ablation runner.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import model as M
from .corpus import Dataset, Split
from .errors import ConfigError, DataError
from .features import EmbeddingTable, SemanticLexicon


# ---------------------------------------------------------------------------
# classification metrics

@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    classes: tuple[str, ...]
    per_class: dict[str, ClassScore]
    micro_f1: float
    confusion: np.ndarray  # rows = gold, cols = predicted
    n: int


def compute_metrics(gold: Sequence[str], pred: Sequence[str]) -> MetricsReport:
    """Per-class precision/recall/F1 plus micro-F1 and the confusion matrix.

    Zero denominators score 0.  For single-label classification micro-F1
    equals accuracy; that identity is asserted.
    """
    if len(gold) != len(pred):
        raise DataError(
            f"gold has {len(gold)} items, predictions have {len(pred)}"
        )
    if not gold:
        raise DataError("compute_metrics needs at least one example")
    classes = tuple(sorted(set(gold) | set(pred)))
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, pred):
        confusion[index[g], index[p]] += 1

    per_class = {}
    for c in classes:
        i = index[c]
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum() - tp)
        fn = int(confusion[i, :].sum() - tp)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall else 0.0
        )
        per_class[c] = ClassScore(precision, recall, f1,
                                  support=int(confusion[i, :].sum()))

    tp_total = int(np.trace(confusion))
    n = len(gold)
    micro_p = tp_total / n
    micro_f1 = micro_p  # fp_total == fn_total == n - tp for single label
    accuracy = tp_total / n
    assert abs(micro_f1 - accuracy) < 1e-15, "micro-F1 must equal accuracy"
    return MetricsReport(
        classes=classes, per_class=per_class, micro_f1=micro_f1,
        confusion=confusion, n=n,
    )


# ---------------------------------------------------------------------------
# hyperparameter random search

@dataclass(frozen=True)
class HpoBounds:
    """Sampling space for the random search."""

    batch_sizes: tuple[int, ...] = (32, 64)
    dropout: tuple[float, float] = (0.0, 0.5)
    embedding_dropout: tuple[float, float] = (0.0, 0.2)
    lr_log10: tuple[float, float] = (-6.0, -1.0)  # log-uniform over [1e-6, 1e-1]
    filter_size_choices: tuple[tuple[int, ...], ...] = (
        (2, 3, 4), (3, 4, 5), (2, 4, 8),
    )
    feature_maps: tuple[int, int] = (100, 200)
    hidden_size: tuple[int, int] = (40, 100)


DEFAULT_BOUNDS = HpoBounds()


@dataclass
class HpoTrial:
    index: int
    config: M.QuestCNNConfig
    val_f1: float
    runtime_s: float


def sample_config(
    bounds: HpoBounds, rng: np.random.Generator,
    base: Optional[M.QuestCNNConfig] = None,
) -> M.QuestCNNConfig:
    """Draw one configuration uniformly inside the bounds (lr log-uniform)."""
    base = base or M.QuestCNNConfig()
    return dc_replace(
        base,
        batch_size=int(rng.choice(bounds.batch_sizes)),
        dropout=float(rng.uniform(*bounds.dropout)),
        embedding_dropout=float(rng.uniform(*bounds.embedding_dropout)),
        lr=float(10.0 ** rng.uniform(*bounds.lr_log10)),
        filter_sizes=tuple(
            bounds.filter_size_choices[
                rng.integers(len(bounds.filter_size_choices))
            ]
        ),
        feature_maps=int(rng.integers(bounds.feature_maps[0],
                                      bounds.feature_maps[1] + 1)),
        hidden_size=int(rng.integers(bounds.hidden_size[0],
                                     bounds.hidden_size[1] + 1)),
    )


def config_in_bounds(cfg: M.QuestCNNConfig, bounds: HpoBounds) -> bool:
    return (
        cfg.batch_size in bounds.batch_sizes
        and bounds.dropout[0] <= cfg.dropout <= bounds.dropout[1]
        and bounds.embedding_dropout[0] <= cfg.embedding_dropout
        <= bounds.embedding_dropout[1]
        and 10.0 ** bounds.lr_log10[0] <= cfg.lr <= 10.0 ** bounds.lr_log10[1]
        and cfg.filter_sizes in bounds.filter_size_choices
        and bounds.feature_maps[0] <= cfg.feature_maps <= bounds.feature_maps[1]
        and bounds.hidden_size[0] <= cfg.hidden_size <= bounds.hidden_size[1]
    )


def hpo_search(
    ds: Dataset,
    split: Split,
    trials: int,
    seed: int,
    bounds: HpoBounds = DEFAULT_BOUNDS,
    base_config: Optional[M.QuestCNNConfig] = None,
    word_table: Optional[EmbeddingTable] = None,
    lexicon: Optional[SemanticLexicon] = None,
    eval_fn: Optional[Callable[[M.QuestCNNConfig], float]] = None,
) -> list[HpoTrial]:
    """Random search: sample, train, record validation F1; ranked best-first.

    eval_fn replaces the train-and-score step (used by tests and dry runs);
    the sampling stream depends only on (seed, trials).
    """
    if trials < 1:
        raise ConfigError("hpo_search needs trials >= 1")
    rng = np.random.default_rng(seed)
    results: list[HpoTrial] = []
    for i in range(trials):
        cfg = sample_config(bounds, rng, base=base_config)
        cfg = dc_replace(cfg, seed=seed + i)
        start = time.perf_counter()
        if eval_fn is not None:
            score = float(eval_fn(cfg))
        else:
            trained = M.train(cfg, ds, split, word_table=word_table,
                              lexicon=lexicon)
            score = max(h["val_f1"] for h in trained.history)
        results.append(HpoTrial(
            index=i, config=cfg, val_f1=score,
            runtime_s=time.perf_counter() - start,
        ))
    return sorted(results, key=lambda t: (-t.val_f1, t.index))


# ---------------------------------------------------------------------------
# expected validation performance

def _exact_evp(values: np.ndarray) -> list[tuple[int, float, float]]:
    """Closed form over all size-j subsets (sampling without replacement).

    With values sorted ascending, P(max <= v_(i)) = C(i, j) / C(N, j), so the
    pmf of the max follows from consecutive differences.
    """
    v = np.sort(values)
    n = len(v)
    curve = []
    for j in range(1, n + 1):
        total = math.comb(n, j)
        pmf = []
        prev = 0
        for i in range(1, n + 1):
            cur = math.comb(i, j) if i >= j else 0
            pmf.append((cur - prev) / total)
            prev = cur
        mean = math.fsum(p * x for p, x in zip(pmf, v))
        var = math.fsum(p * (x - mean) ** 2 for p, x in zip(pmf, v))
        curve.append((j, mean, math.sqrt(max(var, 0.0))))
    return curve


def _bootstrap_evp(values: np.ndarray, n_boot: int,
                   rng: np.random.Generator) -> list[tuple[int, float, float]]:
    """Permutation bootstrap: prefix maxima of shuffled trial lists.

    Each replicate's curve is monotone by construction and every replicate
    ends at the global max, so the averaged curve keeps both properties.
    """
    n = len(values)
    maxima = np.empty((n_boot, n))
    for r in range(n_boot):
        maxima[r] = np.maximum.accumulate(values[rng.permutation(n)])
    mean = maxima.mean(axis=0)
    sd = maxima.std(axis=0)
    curve = [(j + 1, float(mean[j]), float(sd[j])) for j in range(n - 1)]
    # every replicate's full prefix ends at the global max: pin it exactly
    curve.append((n, float(values.max()), 0.0))
    return curve


def expected_validation_performance(
    trials: Sequence[HpoTrial] | Sequence[float],
    n_boot: int = 1000,
    seed: int = 0,
    exact_threshold: int = 10,
) -> list[tuple[int, float, float]]:
    """(j, mean, sd) of the best validation score over j search trials.

    Exact enumeration (closed form over subsets) for short trial lists,
    permutation bootstrap beyond; both estimators are monotone in j and end
    at the best trial value.
    """
    if len(trials) == 0:
        raise DataError("expected_validation_performance needs >= 1 trial")
    values = np.array([
        t.val_f1 if isinstance(t, HpoTrial) else float(t) for t in trials
    ])
    if len(values) <= exact_threshold:
        return _exact_evp(values)
    return _bootstrap_evp(values, n_boot, np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# ablation runner

@dataclass(frozen=True)
class AblationRow:
    name: str
    test_f1: float
    val_f1: float


def standard_ablation_matrix(
    base: M.QuestCNNConfig,
    with_embeddings: bool = False,
    with_semantic: bool = True,
    with_pos_onehot: bool = True,
) -> list[tuple[str, M.QuestCNNConfig]]:
    """Named config variants: channel combinations, feature toggles, and the
    embedding-initialization modes.

    Static/non-static variants need a word table; semantic variants need a
    lexicon; the one-hot POS variant needs embedding_dim to cover the tag
    inventory — switch the flags off when a prerequisite is missing.
    """
    variants: list[tuple[str, M.QuestCNNConfig]] = [
        ("cnn-rand", dc_replace(base, embeddings_trainable=True)),
    ]
    if with_embeddings:
        variants += [
            ("cnn-static", dc_replace(base, embeddings_trainable=False)),
            ("cnn-non-static", dc_replace(base, embeddings_trainable=True)),
        ]
    variants += [
        ("word-only", dc_replace(base, channels_enabled=("word",))),
        ("word+pos", dc_replace(base, channels_enabled=("word", "pos"))),
    ]
    if with_semantic:
        variants += [
            ("word+semantic", dc_replace(
                base, channels_enabled=("word", "semantic"))),
            ("all-channels", dc_replace(
                base, channels_enabled=("word", "pos", "semantic"))),
        ]
    variants.append(("no-stats", dc_replace(base, use_stats=False)))
    if with_semantic:
        variants.append(("semantic-replace-words", dc_replace(
            base, channels_enabled=("word", "pos", "semantic"),
            semantic_strategy="replace_words")))
    if with_pos_onehot:
        variants.append(("pos-one-hot", dc_replace(
            base, channels_enabled=("word", "pos"),
            pos_representation="one_hot")))
    variants.append(("rule-indicators",
                     dc_replace(base, use_rule_indicators=True)))
    return variants


def run_ablation(
    ds: Dataset,
    split: Split,
    matrix: list[tuple[str, M.QuestCNNConfig]],
    word_table: Optional[EmbeddingTable] = None,
    lexicon: Optional[SemanticLexicon] = None,
) -> list[AblationRow]:
    """Train every variant on the shared split and tabulate test/val F1."""
    if not matrix:
        raise ConfigError("run_ablation needs at least one variant")
    rows = []
    for name, cfg in matrix:
        trained = M.train(cfg, ds, split, word_table=word_table,
                          lexicon=lexicon)
        val_f1 = max(h["val_f1"] for h in trained.history)
        gold, pred = [], []
        test_sents = [ds.sentences[i] for i in split.test]
        for s, rec in zip(test_sents, M.predict_batch(trained, test_sents)):
            if "error" in rec or s.label is None:
                continue
            gold.append(s.label)
            pred.append(rec["label"])
        test_f1 = compute_metrics(gold, pred).micro_f1 if gold else 0.0
        rows.append(AblationRow(name=name, test_f1=test_f1, val_f1=val_f1))
    return rows
