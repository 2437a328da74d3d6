"""Exception hierarchy shared by all questkit modules.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3,
ConfigError -> 1 (usage-level problems).
"""


class QuestkitError(Exception):
    """Base class for all questkit errors."""


class DataError(QuestkitError):
    """Malformed or inconsistent input data (corpora, embeddings, lexicons)."""


class ConfigError(QuestkitError):
    """Invalid configuration value or incompatible option combination."""


class NumericError(QuestkitError):
    """Numerical failure: non-finite loss, divergence, bad shapes in kernels."""
