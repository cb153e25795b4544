"""
Near-balanced data blocks
=========================

A heavily imbalanced training set is cut into blocks that each hold every
positive sample plus one slice of the negatives.  This script shows the
imbalance statistics of the bundled Pc1 defect data and the blocks built
from its 70% training split.
"""

import numpy as np

from hadr import datasets
from hadr.data import stratified_split
from hadr.dbc import compute_stats, construct_blocks
from hadr.numerics import make_rng

d = datasets.load_named("pc1")
print(f"{d.name}: n={d.n}, m={d.m}, positives={d.n_pos}, ratio={d.imbalance_ratio:.2f}")

# %%
# Split first; blocks are only ever built from training rows.
sp = stratified_split(d, 0.7, seed=0)
train = sp.train
print(f"train: {train.n} rows ({train.n_pos} positive), test: {sp.test.n} rows")

# %%
# The number of blocks is the imbalance ratio rounded to an integer.  The three
# rounding rules differ only when the ratio sits between two integers.
for rule in ("floor", "nearest", "ceil"):
    s = compute_stats(train, rule)
    print(f"{rule:8s} ir={s.ir:.3f} -> {s.ir_star} blocks")

# %%
# Negatives are shuffled once and dealt round-robin, so chunk sizes differ by
# at most one and every negative lands in exactly one block.
stats = compute_stats(train)
blocks = construct_blocks(train, stats, make_rng(0, "dbc"))
for b in blocks[:3]:
    print(f"block {b.majority_chunk_index}: {b.data.n_neg} negatives + {b.data.n_pos} positives")
sizes = np.array([b.data.n_neg for b in blocks])
print(f"... {len(blocks)} blocks, negative chunk sizes {sizes.min()}..{sizes.max()}")
