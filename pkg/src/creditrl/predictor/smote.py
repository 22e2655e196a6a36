"""SMOTE-NC oversampling for rows mixing continuous and categorical columns."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree


class SmoteError(ValueError):
    pass


@dataclass
class SmoteResult:
    """Original rows followed by the synthetic ones.

    For synthetic row j (global index n_original + j) ``seed_index[j]`` and
    ``neighbor_index[j]`` are the original rows it was interpolated between,
    at fraction ``t[j]`` from the seed.
    """

    X: np.ndarray
    y: np.ndarray
    n_original: int
    seed_index: np.ndarray
    neighbor_index: np.ndarray
    t: np.ndarray


def _mode_lowest(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    return uniq[np.argmax(counts)]  # np.unique sorts, so ties go to the lowest category


def _embed(Xc: np.ndarray, continuous: np.ndarray, categorical: np.ndarray) -> np.ndarray:
    """Space in which SMOTE-NC distances are Euclidean.

    Continuous columns are standardized within the class. One categorical mismatch
    then costs the median standardized std (= 1), realized by one-hot blocks scaled
    by 1/sqrt(2).
    """
    parts = []
    if continuous.size:
        cont = Xc[:, continuous]
        std = cont.std(axis=0)
        std[std == 0] = 1.0
        parts.append((cont - cont.mean(axis=0)) / std)
    for j in categorical:
        col = Xc[:, j]
        cats = np.unique(col)
        parts.append((col[:, None] == cats[None, :]) / np.sqrt(2.0))
    return np.hstack(parts) if parts else np.zeros((len(Xc), 1))


def smote_nc(X: np.ndarray, y: np.ndarray, categorical: Sequence[int] = (), k: int = 5,
             target_sizes: Optional[Mapping[int, int]] = None, seed=0) -> SmoteResult:
    """Oversample classes up to ``target_sizes`` (default: every class up to the largest).

    Each synthetic row picks a random seed row of its class and one of the seed's
    k nearest same-class neighbours; continuous columns are interpolated at a
    uniform fraction, categorical columns take the most frequent value among the
    k neighbours.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if k < 1:
        raise SmoteError("k must be >= 1")
    categorical = np.array(sorted(set(int(c) for c in categorical)), dtype=int)
    continuous = np.setdiff1d(np.arange(X.shape[1]), categorical)
    classes, counts = np.unique(y, return_counts=True)
    if target_sizes is None:
        target_sizes = {c: int(counts.max()) for c in classes.tolist()}
    rng = np.random.default_rng(seed)

    new_X, new_y, seeds, nbrs, ts = [], [], [], [], []
    for c, n_c in zip(classes.tolist(), counts.tolist()):
        need = int(target_sizes.get(c, n_c)) - n_c
        if need <= 0:
            continue
        if n_c < k + 1:
            raise SmoteError(f"class {c} has {n_c} rows; SMOTE-NC with k={k} needs at least {k + 1}")
        members = np.flatnonzero(y == c)
        Xc = X[members]
        _, nn = cKDTree(_embed(Xc, continuous, categorical)).query(
            _embed(Xc, continuous, categorical), k=k + 1)
        # drop the row itself (exact duplicates may displace it from column 0)
        neighbours = np.empty((n_c, k), dtype=int)
        for i in range(n_c):
            row = nn[i][nn[i] != i]
            neighbours[i] = row[:k]
        cat_modes = np.array([[_mode_lowest(Xc[neighbours[i], j]) for j in categorical]
                              for i in range(n_c)]).reshape(n_c, len(categorical))

        s = rng.integers(0, n_c, size=need)
        pick = neighbours[s, rng.integers(0, k, size=need)]
        t = rng.random(need)
        a, b = Xc[s], Xc[pick]
        synth = a + t[:, None] * (b - a)
        # rounding can overshoot the segment by an ulp
        synth = np.clip(synth, np.minimum(a, b), np.maximum(a, b))
        if len(categorical):
            synth[:, categorical] = cat_modes[s]
        new_X.append(synth)
        new_y.append(np.full(need, c, dtype=y.dtype))
        seeds.append(members[s])
        nbrs.append(members[pick])
        ts.append(t)

    if not new_X:
        empty = np.zeros(0, dtype=int)
        return SmoteResult(X.copy(), y.copy(), len(y), empty, empty, np.zeros(0))
    return SmoteResult(
        X=np.vstack([X, *new_X]),
        y=np.concatenate([y, *new_y]),
        n_original=len(y),
        seed_index=np.concatenate(seeds),
        neighbor_index=np.concatenate(nbrs),
        t=np.concatenate(ts),
    )
