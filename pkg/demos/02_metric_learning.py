"""
Learning a projection by kernel regression
==========================================

Each block gets its own linear map A.  A is trained so that a leave-one-out
Gaussian kernel regression of the labels, computed in the projected space,
is as accurate as possible.  Here we train one map on one Pc1 block and look
at what it learned.
"""

import numpy as np

from hadr import datasets
from hadr.data import apply_standardizer, fit_standardizer, stratified_split
from hadr.dbc import compute_stats, construct_blocks
from hadr.mlkr import MlkrConfig, loo_estimates, m_eigen, project_by_m_eigvecs, train_mlkr
from hadr.numerics import make_rng

sp = stratified_split(datasets.load_named("pc1"), 0.7, seed=0)
train = apply_standardizer(fit_standardizer(sp.train), sp.train)
block = construct_blocks(train, compute_stats(train), make_rng(0, "dbc"))[0].data
X, y = block.features, block.labels.astype(float)
print(f"block: {block.n} rows x {block.m} features")

# %%
# Start from a (slightly perturbed) coordinate projection and descend.
t = train_mlkr(X, y, MlkrConfig(seed=0))
print(f"A is {t.l} x {t.m}; loss {t.trace[0]:.2f} -> {t.trace[-1]:.2f} "
      f"after {len(t.trace) - 1} steps")

# %%
# The leave-one-out estimates separate the classes much better after training.
before = loo_estimates(np.eye(t.l, t.m), X, y)
after = loo_estimates(t.A, X, y)
for name, yhat in (("initial", before), ("trained", after)):
    print(f"{name}: mean estimate on positives {yhat[y == 1].mean():.2f}, "
          f"on negatives {yhat[y == 0].mean():.2f}")

# %%
# M = A^T A is a learned metric.  Its spectrum says how many directions matter;
# projecting onto the leading eigenvectors of M is the supervised counterpart
# of PCA.
eig = m_eigen(t.A)
share = eig.eigenvalues / eig.eigenvalues.sum()
print("eigenvalue share of the top 5 directions:", np.round(share[:5], 3))
sq = train_mlkr(X, y, MlkrConfig(out_dim=X.shape[1], max_iters=50, seed=0))
Z = project_by_m_eigvecs(sq, X, 3)
print(f"eigenvector projection to 3 dims: {Z.shape}")
