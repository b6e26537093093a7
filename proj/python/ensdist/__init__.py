"""ensdist: training students from multiple opaque expert transcribers.

The heavy lifting lives in the C++ core; this package re-exports the main
operations (WER scoring, ROVER fusion, n-best entropy, expert weighting,
transducer loss, speaker clustering).
"""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    align,
    bce_loss,
    best_expert_labels,
    best_expert_weights,
    entropy,
    kmeans,
    normalize_scores,
    oracle_weights,
    random_partition,
    rnnt_grad,
    rnnt_loss,
    rover,
    temperature_renormalize,
    tokenize,
    uniform_weights,
    weighted_wer,
    weighter_accuracy,
    wer,
    __version__,
)

__all__ = [
    "ConfigError",
    "DataError",
    "align",
    "bce_loss",
    "best_expert_labels",
    "best_expert_weights",
    "entropy",
    "kmeans",
    "normalize_scores",
    "oracle_weights",
    "random_partition",
    "rnnt_grad",
    "rnnt_loss",
    "rover",
    "temperature_renormalize",
    "tokenize",
    "uniform_weights",
    "weighted_wer",
    "weighter_accuracy",
    "wer",
]
