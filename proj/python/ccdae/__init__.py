"""Conceptual distance between texts from capacity-constrained description distributions."""

from ._core import (
    Backend,
    BackendError,
    BenchFailure,
    CompareConfig,
    DistanceCurve,
    DistanceReport,
    InvalidInput,
    NoFeasibleDescription,
    UndefinedCorrelation,
    Units,
    auc,
    bench_choice,
    bench_pairs,
    bernoulli_entropy,
    compare,
    linspace,
    ncd,
    noise_experiment,
    open_backend,
    oracle,
    spearman,
    table_backend,
    train_ngram,
    trajectory_distance,
)

__all__ = [
    "Backend",
    "BackendError",
    "BenchFailure",
    "CompareConfig",
    "DistanceCurve",
    "DistanceReport",
    "InvalidInput",
    "NoFeasibleDescription",
    "UndefinedCorrelation",
    "Units",
    "auc",
    "bench_choice",
    "bench_pairs",
    "bernoulli_entropy",
    "compare",
    "linspace",
    "ncd",
    "noise_experiment",
    "open_backend",
    "oracle",
    "spearman",
    "table_backend",
    "train_ngram",
    "trajectory_distance",
]
