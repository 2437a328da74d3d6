"""questkit: rule-based question extraction from dialogue logs and a
multi-channel CNN classifier separating questions, context-dependent
questions, and non-questions.
"""

from . import corpus, evaluation, features, model, nn, postag, rules, synthetic
from .corpus import Dataset, LabeledSentence, Split, load_jsonl, split_dataset
from .errors import ConfigError, DataError, NumericError, QuestkitError
from .model import QuestCNN, QuestCNNConfig, TrainedModel, train

__version__ = "0.1.0"

__all__ = [
    "corpus", "evaluation", "features", "model", "nn", "postag", "rules",
    "synthetic",
    "Dataset", "LabeledSentence", "Split", "load_jsonl", "split_dataset",
    "QuestCNN", "QuestCNNConfig", "TrainedModel", "train",
    "ConfigError", "DataError", "NumericError", "QuestkitError",
    "__version__",
]
