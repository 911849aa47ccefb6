"""Python bindings for lotnet. Point clouds are numpy arrays of shape (n_points, dim)."""

from ._lotnet import (
    ConfigError,
    DataError,
    DimensionError,
    DualPair,
    FormatError,
    NumericError,
    __version__,
    baseline,
    default_config,
    distances,
    estimate_w2,
    evaluate,
    exact_ot,
    gaussian_w2,
    gen,
    gen_synthetic,
    lot_distance,
    theorem_bound,
    train,
    train_map,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "DualPair",
    "FormatError",
    "NumericError",
    "__version__",
    "baseline",
    "default_config",
    "distances",
    "estimate_w2",
    "evaluate",
    "exact_ot",
    "gaussian_w2",
    "gen",
    "gen_synthetic",
    "lot_distance",
    "theorem_bound",
    "train",
    "train_map",
]
