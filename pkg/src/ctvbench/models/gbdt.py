"""Multiclass gradient boosting with regression trees on 0/1 features.

Trees are stored in heap layout (children of node ``k`` are ``2k+1`` and
``2k+2``); a node with feature ``-1`` is a leaf. A split sends rows with
``x[feature] > 0.5`` to the right child.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import EmptyTraining
from .base import N_CLASSES, TrainedRanker, softmax


@njit(cache=True)
def _build_tree(Xb, indptr, indices, samples, r, h, max_depth, leaf_scale, feature, value):
    n_features = Xb.shape[1]
    sums = np.zeros(n_features)
    cnts = np.zeros(n_features, dtype=np.int64)
    # explicit stack of (node, start, end, depth)
    stack = np.empty((2 ** (max_depth + 1), 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = samples.shape[0]
    stack[0, 3] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n_node = end - start
        s_r = 0.0
        s_h = 0.0
        for p in range(start, end):
            s_r += r[samples[p]]
            s_h += h[samples[p]]

        best = -1
        if depth < max_depth and n_node >= 2:
            sums[:] = 0.0
            cnts[:] = 0
            for p in range(start, end):
                i = samples[p]
                for q in range(indptr[i], indptr[i + 1]):
                    j = indices[q]
                    sums[j] += r[i]
                    cnts[j] += 1
            base = s_r * s_r / n_node
            best_gain = 1e-12
            for j in range(n_features):
                c = cnts[j]
                if c == 0 or c == n_node:
                    continue
                sr = sums[j]
                gain = sr * sr / c + (s_r - sr) * (s_r - sr) / (n_node - c) - base
                if gain > best_gain:
                    best_gain = gain
                    best = j

        if best < 0:
            feature[node] = -1
            value[node] = 0.0 if abs(s_h) < 1e-150 else leaf_scale * s_r / s_h
            continue

        feature[node] = best
        lo = start
        hi = end - 1
        while lo <= hi:
            if Xb[samples[lo], best] == 0:
                lo += 1
            else:
                tmp = samples[lo]
                samples[lo] = samples[hi]
                samples[hi] = tmp
                hi -= 1
        stack[top, 0] = 2 * node + 1
        stack[top, 1] = start
        stack[top, 2] = lo
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = 2 * node + 2
        stack[top, 1] = lo
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1


@njit(cache=True)
def _predict_tree(Xb, feature, value, out, scale):
    for i in range(Xb.shape[0]):
        node = 0
        while feature[node] >= 0:
            if Xb[i, feature[node]] != 0:
                node = 2 * node + 2
            else:
                node = 2 * node + 1
        out[i] += scale * value[node]


@njit(cache=True)
def _predict_forest(Xb, features, values, learn_rate, raw):
    stages, k = features.shape[0], features.shape[1]
    for s in range(stages):
        for c in range(k):
            _predict_tree(Xb, features[s, c], values[s, c], raw[:, c], learn_rate)


def _binarize(X) -> np.ndarray:
    X = np.asarray(X)
    return np.ascontiguousarray(X > 0.5, dtype=np.uint8)


class GBDTRanker(TrainedRanker):
    kind = "gbdt"

    def __init__(self, init, features, values, learn_rate, width, max_depth=None, subsample=None, seed=0):
        self.init = np.asarray(init, dtype=np.float64)
        self.features = np.asarray(features, dtype=np.int32)
        self.values = np.asarray(values, dtype=np.float64)
        self.learn_rate = float(learn_rate)
        self.width = int(width)
        self.max_depth = max_depth
        self.subsample = subsample
        self.seed = seed

    @property
    def stages(self) -> int:
        return self.features.shape[0]

    def raw_scores(self, X) -> np.ndarray:
        Xb = _binarize(X)
        raw = np.tile(self.init, (Xb.shape[0], 1))
        if self.stages:
            _predict_forest(Xb, self.features, self.values, self.learn_rate, raw)
        return raw

    def scores(self, X, trial_ids=None):
        return softmax(self.raw_scores(X))

    def params(self):
        return {"init": self.init, "features": self.features, "values": self.values}

    def config(self):
        return {
            "learn_rate": self.learn_rate,
            "max_depth": self.max_depth,
            "subsample": self.subsample,
            "seed": self.seed,
        }


def deviance(raw: np.ndarray, y: np.ndarray) -> float:
    z = raw - raw.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(logsum - z[np.arange(len(y)), y]))


def fit_gbdt(
    X,
    y,
    stages: int = 1000,
    subsample: float = 0.5,
    max_depth: int = 3,
    learn_rate: float = 0.1,
    seed: int = 0,
    return_history: bool = False,
):
    """Gradient boosting on the multinomial deviance.

    Each stage fits one tree per class to ``onehot(y) - p`` on a fresh
    subsample drawn without replacement; leaves take the Newton step
    ``(K-1)/K * sum(r) / sum(|r| (1 - |r|))``.
    """
    if stages < 0 or not 0 < subsample <= 1 or max_depth < 1:
        raise ValueError("need stages >= 0, 0 < subsample <= 1, max_depth >= 1")
    Xb = _binarize(X)
    y = np.asarray(y, dtype=np.int64)
    n, d = Xb.shape
    if n == 0:
        raise EmptyTraining("gbdt needs at least one training row")

    prior = np.bincount(y, minlength=N_CLASSES) / n
    init = np.log(np.maximum(prior, 1e-12))
    raw = np.tile(init, (n, 1))
    onehot = np.eye(N_CLASSES)[y]

    rows, cols = np.nonzero(Xb)
    indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int64)
    indices = cols.astype(np.int64)

    n_nodes = 2 ** (max_depth + 1) - 1
    features = np.full((stages, N_CLASSES, n_nodes), -1, dtype=np.int32)
    values = np.zeros((stages, N_CLASSES, n_nodes))
    n_sub = max(1, int(round(subsample * n)))
    leaf_scale = (N_CLASSES - 1) / N_CLASSES
    rng = np.random.default_rng(seed)
    history = [deviance(raw, y)]

    for s in range(stages):
        if n_sub < n:
            sub = np.sort(rng.permutation(n)[:n_sub]).astype(np.int64)
        else:
            sub = np.arange(n, dtype=np.int64)
        prob = softmax(raw)
        resid_all = onehot - prob
        for c in range(N_CLASSES):
            r = np.ascontiguousarray(resid_all[:, c])
            # 1 - p as the sum of the other classes keeps h exact when p is near 1
            h = prob[:, c] * (prob[:, :c].sum(axis=1) + prob[:, c + 1 :].sum(axis=1))
            _build_tree(Xb, indptr, indices, sub.copy(), r, h, max_depth, leaf_scale, features[s, c], values[s, c])
            col = np.zeros(n)
            _predict_tree(Xb, features[s, c], values[s, c], col, learn_rate)
            raw[:, c] += col
        if return_history:
            history.append(deviance(raw, y))

    model = GBDTRanker(init, features, values, learn_rate, d, max_depth, subsample, seed)
    return (model, history) if return_history else model
