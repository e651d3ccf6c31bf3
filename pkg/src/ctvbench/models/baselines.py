from __future__ import annotations

import numpy as np

from ..errors import EmptyTraining
from .base import N_CLASSES, TrainedRanker

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(x: np.ndarray) -> np.ndarray:
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) draws that depend only on (seed, counter)."""
    key = splitmix64(np.array([seed % 2**64], dtype=np.uint64))[0]
    bits = splitmix64(splitmix64(np.asarray(counters, dtype=np.uint64)) ^ key)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


class RandomRanker(TrainedRanker):
    kind = "random"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def scores(self, X, trial_ids=None):
        n = X.shape[0]
        if trial_ids is None:
            trial_ids = np.arange(n)
        counters = np.asarray(trial_ids, dtype=np.uint64)[:, None] * np.uint64(N_CLASSES) + np.arange(
            N_CLASSES, dtype=np.uint64
        )
        return counter_uniform(self.seed, counters)

    def params(self):
        return {}

    def config(self):
        return {"seed": self.seed}


class TopPopRanker(TrainedRanker):
    kind = "toppop"

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.float64)

    def scores(self, X, trial_ids=None):
        return np.broadcast_to(self.counts, (X.shape[0], N_CLASSES)).copy()

    def params(self):
        return {"counts": self.counts}


def fit_random(seed: int = 0) -> RandomRanker:
    return RandomRanker(seed)


def fit_toppop(targets) -> TopPopRanker:
    y = np.asarray(targets, dtype=np.int64)
    if y.size == 0:
        raise EmptyTraining("toppop needs at least one training target")
    return TopPopRanker(np.bincount(y, minlength=N_CLASSES))
