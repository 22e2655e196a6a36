"""Evaluation metrics used for the balance simulator."""

from __future__ import annotations

import numpy as np


def _pair(truth, pred):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("empty input")
    return truth, pred


def weighted_f1(truth, pred) -> float:
    """Per-class F1 averaged with weights proportional to true-class support."""
    truth, pred = _pair(truth, pred)
    classes, support = np.unique(truth, return_counts=True)
    total = 0.0
    for c, n_c in zip(classes, support):
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = n_c - tp
        denom = 2 * tp + fp + fn
        total += n_c * (2 * tp / denom if denom else 0.0)
    return float(total / truth.size)


def rmse(truth, pred) -> float:
    truth, pred = _pair(truth, pred)
    return float(np.sqrt(np.mean((truth.astype(float) - pred) ** 2)))


def wape(truth, pred) -> float:
    """Sum of absolute errors relative to the total absolute truth."""
    truth, pred = _pair(truth, pred)
    scale = np.sum(np.abs(truth))
    if scale == 0:
        raise ValueError("WAPE is undefined on all-zero truth")
    return float(np.sum(np.abs(truth - pred)) / scale)
