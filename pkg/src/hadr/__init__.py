"""Imbalanced binary classification by near-balanced data blocks, per-block
metric-learned dimensionality reduction and a voting MLP ensemble."""

from .data import DataError, Dataset, load, stratified_split
from .ensemble import HadrConfig, HadrModel, evaluate, train_hadr
from .mlkr import MlkrConfig
from .mlp import MlpTrainConfig

__version__ = "0.1.0"

__all__ = [
    "DataError", "Dataset", "HadrConfig", "HadrModel", "MlkrConfig", "MlpTrainConfig",
    "evaluate", "load", "stratified_split", "train_hadr",
]
