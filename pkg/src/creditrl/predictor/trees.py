"""Axis-aligned CART trees (Gini / variance reduction) with optional bootstrap bagging."""

from __future__ import annotations

from typing import Optional

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"

_MIN_GAIN = 1e-12


class NotFittedError(RuntimeError):
    pass


class DecisionTree:
    """Single CART tree stored as flat node arrays.

    Parameters
    ----------
    task : {"classification", "regression"}
    max_depth : int
        Root has depth 0; leaves sit at depth <= max_depth.
    min_samples_leaf : int
        Every leaf keeps at least this many training rows.
    n_classes : int, optional
        Number of class labels (0..n_classes-1). Inferred from ``y`` if omitted.
    """

    def __init__(self, task: str = CLASSIFICATION, max_depth: int = 8, min_samples_leaf: int = 5,
                 n_classes: Optional[int] = None):
        if task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {task!r}")
        if max_depth < 0 or min_samples_leaf < 1:
            raise ValueError("max_depth must be >= 0 and min_samples_leaf >= 1")
        self.task = task
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_classes = n_classes
        self.feature: Optional[np.ndarray] = None

    # node arrays: feature (-1 at leaves), threshold, left, right, value, n_samples, depth
    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
            raise ValueError("X must be 2-D with one row per target")
        if self.task == CLASSIFICATION:
            y = y.astype(int)
            if self.n_classes is None:
                self.n_classes = int(y.max()) + 1
        else:
            y = y.astype(float)
        self._nodes: list[list] = []
        self._grow(X, y, np.arange(len(y)), depth=0)
        nodes = self._nodes
        self.feature = np.array([n[0] for n in nodes], dtype=int)
        self.threshold = np.array([n[1] for n in nodes], dtype=float)
        self.left = np.array([n[2] for n in nodes], dtype=int)
        self.right = np.array([n[3] for n in nodes], dtype=int)
        self.value = np.array([n[4] for n in nodes], dtype=float)
        self.n_samples = np.array([n[5] for n in nodes], dtype=int)
        self.depth = np.array([n[6] for n in nodes], dtype=int)
        del self._nodes
        return self

    def _leaf_value(self, y):
        if self.task == CLASSIFICATION:
            return np.bincount(y, minlength=self.n_classes) / len(y)
        return np.array([y.mean()])

    def _grow(self, X, y, idx, depth) -> int:
        node_id = len(self._nodes)
        self._nodes.append([-1, 0.0, -1, -1, self._leaf_value(y[idx]), len(idx), depth])
        if depth >= self.max_depth or len(idx) < 2 * self.min_samples_leaf:
            return node_id
        split = self._best_split(X[idx], y[idx])
        if split is None:
            return node_id
        feat, thr = split
        go_left = X[idx, feat] <= thr
        left = self._grow(X, y, idx[go_left], depth + 1)
        right = self._grow(X, y, idx[~go_left], depth + 1)
        self._nodes[node_id][:4] = [feat, thr, left, right]
        return node_id

    def _best_split(self, Xn, yn):
        n = len(yn)
        m = self.min_samples_leaf
        # candidate split after sorted position p keeps p+1 rows on the left
        pos = np.arange(m - 1, n - m)
        if len(pos) == 0:
            return None
        n_left = (pos + 1).astype(float)
        n_right = n - n_left
        if self.task == CLASSIFICATION:
            onehot = np.eye(self.n_classes)[yn]
            total = onehot.sum(axis=0)
            parent = n * (1.0 - np.sum((total / n) ** 2))
        else:
            parent = float(np.sum((yn - yn.mean()) ** 2))
        if parent <= _MIN_GAIN:
            return None

        best = (parent - _MIN_GAIN, None, None)
        for f in range(Xn.shape[1]):
            order = np.argsort(Xn[:, f], kind="mergesort")
            xs = Xn[order, f]
            valid = xs[pos] < xs[pos + 1]
            if not valid.any():
                continue
            if self.task == CLASSIFICATION:
                cl = np.cumsum(onehot[order], axis=0)[pos]
                cr = total - cl
                # weighted Gini: n_l * (1 - sum p_l^2) + n_r * (1 - sum p_r^2)
                imp = (n_left - np.sum(cl ** 2, axis=1) / n_left) + (n_right - np.sum(cr ** 2, axis=1) / n_right)
            else:
                ys = yn[order]
                s = np.cumsum(ys)[pos]
                s2 = np.cumsum(ys ** 2)[pos]
                tot, tot2 = ys.sum(), np.sum(ys ** 2)
                imp = (s2 - s ** 2 / n_left) + ((tot2 - s2) - (tot - s) ** 2 / n_right)
            imp = np.where(valid, imp, np.inf)
            j = int(np.argmin(imp))
            if imp[j] < best[0]:
                p = pos[j]
                best = (imp[j], f, 0.5 * (xs[p] + xs[p + 1]))
        if best[1] is None:
            return None
        return best[1], best[2]

    def _check_fitted(self):
        if self.feature is None:
            raise NotFittedError("tree is not fitted")

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            r = rows[internal]
            nd = node[internal]
            go_left = X[r, feat[internal]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def leaves(self) -> np.ndarray:
        self._check_fitted()
        return np.flatnonzero(self.feature < 0)

    @property
    def max_leaf_depth(self) -> int:
        self._check_fitted()
        return int(self.depth.max())

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task, "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
            "n_classes": self.n_classes,
            "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
            "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(), "depth": self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(d["task"], d["max_depth"], d["min_samples_leaf"], d["n_classes"])
        tree.feature = np.array(d["feature"], dtype=int)
        tree.threshold = np.array(d["threshold"], dtype=float)
        tree.left = np.array(d["left"], dtype=int)
        tree.right = np.array(d["right"], dtype=int)
        tree.value = np.array(d["value"], dtype=float).reshape(len(tree.feature), -1)
        tree.n_samples = np.array(d["n_samples"], dtype=int)
        tree.depth = np.array(d["depth"], dtype=int)
        return tree


class TreeModel:
    """A CART tree, or a bag of them fit on bootstrap resamples when n_estimators > 1.

    Classification averages leaf class frequencies across trees and predicts the
    most likely class, lowest label on ties. Regression averages leaf means.
    """

    def __init__(self, task: str = CLASSIFICATION, max_depth: int = 8, min_samples_leaf: int = 5,
                 n_estimators: int = 1, n_classes: Optional[int] = None, seed: int = 0):
        if n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.task = task
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_estimators = n_estimators
        self.n_classes = n_classes
        self.seed = seed
        self.trees: list[DecisionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "TreeModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if self.task == CLASSIFICATION and self.n_classes is None:
            self.n_classes = int(np.max(y)) + 1
        self.trees = []
        if self.n_estimators == 1:
            self.trees.append(self._new_tree().fit(X, y))
            return self
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rows = np.random.default_rng(child).integers(0, len(y), size=len(y))
            self.trees.append(self._new_tree().fit(X[rows], y[rows]))
        return self

    def _new_tree(self) -> DecisionTree:
        return DecisionTree(self.task, self.max_depth, self.min_samples_leaf, self.n_classes)

    @property
    def fitted(self) -> bool:
        return bool(self.trees)

    def _check_fitted(self):
        if not self.trees:
            raise NotFittedError("model is not fitted")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        if self.task != CLASSIFICATION:
            raise TypeError("predict_proba needs a classification model")
        return np.mean([t.predict_value(X) for t in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        if self.task == CLASSIFICATION:
            return np.argmax(self.predict_proba(X), axis=1)
        return np.mean([t.predict_value(X)[:, 0] for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task, "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
            "n_estimators": self.n_estimators, "n_classes": self.n_classes, "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        model = cls(d["task"], d["max_depth"], d["min_samples_leaf"], d["n_estimators"],
                    d["n_classes"], d["seed"])
        model.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return model
