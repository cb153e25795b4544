"""Data block construction.

The majority class is shuffled and dealt round-robin into ``ir*`` chunks; each
chunk joined with the whole minority class forms one nearly balanced block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset


@dataclass(frozen=True)
class ImbalanceStats:
    n_min: int
    n_maj: int
    ir: float
    ir_star: int
    rounding: str = "nearest"


def compute_stats(train, rounding="nearest"):
    """Imbalance ratio ``n_maj / n_min`` and the block count ``ir*``.

    ``rounding`` is ``'floor'``, ``'ceil'`` or ``'nearest'`` (ties go down).
    """
    labels = train.labels if isinstance(train, Dataset) else np.asarray(train)
    n_min = int(np.sum(labels == 1))
    n_maj = int(np.sum(labels == 0))
    if n_min == 0 or n_maj == 0:
        raise DataError("block construction needs both classes")
    ir = n_maj / n_min
    if rounding == "floor":
        k = math.floor(ir)
    elif rounding == "ceil":
        k = math.ceil(ir)
    elif rounding == "nearest":
        k = math.floor(ir) if ir - math.floor(ir) <= 0.5 else math.ceil(ir)
    else:
        raise ValueError(f"unknown rounding rule {rounding!r}")
    return ImbalanceStats(n_min, n_maj, ir, max(1, int(k)), rounding)


@dataclass(frozen=True, eq=False)
class DataBlock:
    data: Dataset
    majority_chunk_index: int
    source_row_ids: np.ndarray

    @property
    def features(self):
        return self.data.features

    @property
    def labels(self):
        return self.data.labels


def chunk_indices(n_maj, ir_star, rng):
    """Shuffle ``range(n_maj)`` and deal it into ``ir_star`` chunks.

    Dealing round-robin keeps chunk sizes within one of each other.
    """
    perm = rng.permutation(n_maj)
    return [np.sort(perm[i::ir_star]) for i in range(ir_star)]


def construct_blocks(train, stats, rng):
    """Split ``train`` into ``stats.ir_star`` blocks ``C_i + S_min``.

    Row ids in each block refer to ``train`` and are sorted, so the order of
    rows inside a block does not depend on the shuffle.
    """
    maj = np.flatnonzero(train.labels == 0)
    mnr = np.flatnonzero(train.labels == 1)
    if maj.size != stats.n_maj or mnr.size != stats.n_min:
        raise DataError("imbalance stats were computed on a different dataset")
    blocks = []
    for i, chunk in enumerate(chunk_indices(maj.size, stats.ir_star, rng)):
        rows = np.sort(np.concatenate([maj[chunk], mnr]))
        blocks.append(DataBlock(train.subset(rows, f"{train.name}/block{i}"), i, rows))
    return blocks


def block_membership(blocks):
    """JSON-friendly audit record of which training rows went where."""
    return [{"block": b.majority_chunk_index, "rows": b.source_row_ids.tolist(),
             "n_pos": b.data.n_pos, "n_neg": b.data.n_neg} for b in blocks]
