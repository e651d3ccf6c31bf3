"""Shared ranking contract for every model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import WidthMismatch

N_CLASSES = 10


@dataclass(frozen=True)
class RankedPrediction:
    order: tuple  # class indices, most confident first
    scores: tuple  # parallel, non-increasing


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def order_by_score(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort each row descending; equal scores keep ascending class index."""
    order = np.argsort(-scores, axis=1, kind="stable")
    return order, np.take_along_axis(scores, order, axis=1)


class TrainedRanker:
    kind = "base"
    width: int | None = None

    def scores(self, X: np.ndarray, trial_ids: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.width is not None and X.shape[1] != self.width:
            raise WidthMismatch(f"{self.kind} model expects width {self.width}, got {X.shape[1]}")
        return X

    def rank_batch(self, X, trial_ids=None) -> tuple[np.ndarray, np.ndarray]:
        X = self.check_width(X)
        if trial_ids is None:
            trial_ids = np.arange(X.shape[0])
        return order_by_score(self.scores(X, np.asarray(trial_ids)))

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        params = self.params()
        return {
            "kind": self.kind,
            "width": self.width,
            "config": self.config(),
            "shapes": {k: list(np.shape(v)) for k, v in params.items()},
            "params": {k: np.ravel(v).tolist() for k, v in params.items()},
        }

    def config(self) -> dict:
        return {}


def rank(model: TrainedRanker, x, trial_id: int = 0) -> RankedPrediction:
    order, scores = model.rank_batch(np.atleast_2d(x), np.array([trial_id]))
    return RankedPrediction(tuple(int(i) for i in order[0]), tuple(float(s) for s in scores[0]))
