"""
Scores, thresholds and the ROC curve
====================================

The vote gives hard labels; the mean member probability gives a score that
can be ranked.  AUC is the probability that a random positive outranks a
random negative, with ties counted as half.
"""

import numpy as np

from hadr import HadrConfig, datasets, evaluate, stratified_split, train_hadr
from hadr.metrics import auc_rank, auc_trapezoid, best_threshold_g_mean

sp = stratified_split(datasets.load_named("abalone9vs18"), 0.7, seed=1)
model = train_hadr(sp.train, HadrConfig(seed=1))
pred = model.predict(sp.test)
y = sp.test.labels

# %%
# The rank statistic and the area under the step ROC curve agree.
print(f"AUC (ranks)     {auc_rank(y, pred.mean_scores):.4f}")
print(f"AUC (trapezoid) {auc_trapezoid(y, pred.mean_scores):.4f}")

# %%
# G-mean of the voted labels, and the best G-mean any score cut-off would give.
r = evaluate(model, sp.test)
g, t = best_threshold_g_mean(y, pred.mean_scores)
print(f"vote: {r.summary()}")
print(f"best cut-off on the mean score: {t:.3f} -> g_mean {g:.3f}")

# %%
# A few points of the ROC curve.
for fpr, tpr, thr in r.roc[:: max(1, len(r.roc) // 6)]:
    print(f"fpr={fpr:.3f} tpr={tpr:.3f} threshold={thr:.3f}")
