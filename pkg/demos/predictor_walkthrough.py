"""
Learning the balance response
=============================

Fit the two-stage balance model (class, then amount) on an imbalanced
historical table and compare it with predicting the training mean.
"""

import numpy as np

from creditrl.predictor import (
    CATEGORICAL_FEATURES,
    FEATURE_NAMES,
    TwoStageConfig,
    classes_of,
    evaluate_two_stage,
    fit_two_stage,
    smote_nc,
    split_indices,
    training_arrays,
)
from creditrl.synth import generate_training_table, preset

rows = generate_training_table(preset("imbalance", seed=0), historical_increase_rate=0.3)
X, y = training_arrays(rows)
print("rows", len(rows), "class shares (small/medium, large, inactive)",
      np.round(np.bincount(classes_of(y), minlength=3) / len(y), 3))

# SMOTE-NC tops up the rarer classes with interpolated rows
res = smote_nc(X, classes_of(y), categorical=[FEATURE_NAMES.index(c) for c in CATEGORICAL_FEATURES], k=5, seed=0)
print("after SMOTE-NC", np.bincount(res.y))

tr, te = split_indices(len(y), 0.2, seed=0)
model = fit_two_stage(X[tr], y[tr], TwoStageConfig(seed=0))
for k, v in evaluate_two_stage(model, X[te], y[te], float(y[tr].mean())).items():
    print(f"{k:<12} {v:.4f}")

# prospective balances under both actions for a customer who carries a balance
rec = next(r.record for r in rows if r.target_rbar > 0 and r.ha_p == 0)
for action in (0, 1):
    print("action", action, "predicted balance", model.predict_response([rec], action, beta=0.5)[0].round(2))
