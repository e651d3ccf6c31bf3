"""Multiclass rankers sharing one contract: fit on a design matrix, rank all 10 genres."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import N_CLASSES, RankedPrediction, TrainedRanker, order_by_score, rank, softmax
from .baselines import RandomRanker, TopPopRanker, fit_random, fit_toppop
from .gbdt import GBDTRanker, fit_gbdt
from .mlp import MLPRanker, fit_mlp, mlp_loss_grad
from .softmax import SoftmaxRanker, fit_softmax, softmax_loss_grad

KINDS = ("random", "toppop", "softmax", "gbdt", "mlp")


@dataclass(frozen=True)
class RankerSpec:
    """What to fit: the model kind, its fixed settings and its tuning grid.

    ``more_regularized`` says which end of the grid regularizes more
    ("high" for L2 strength, "low" for tree depth); it breaks ties in
    model selection.
    """

    kind: str
    fixed: dict = field(default_factory=dict)
    hp_name: str | None = None
    grid: tuple = ()
    more_regularized: str = "high"
    seed: int = 0

    @property
    def tunable(self) -> bool:
        return self.hp_name is not None

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "fixed": self.fixed,
            "hp_name": self.hp_name,
            "grid": list(self.grid),
            "seed": self.seed,
        }


def default_spec(kind: str, seed: int = 0, **fixed) -> RankerSpec:
    if kind == "random":
        return RankerSpec("random", seed=seed)
    if kind == "toppop":
        return RankerSpec("toppop", seed=seed)
    if kind == "softmax":
        base = {"max_epochs": 300, "tol": 1e-6}
        return RankerSpec("softmax", {**base, **fixed}, "l2", (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0), "high", seed)
    if kind == "gbdt":
        base = {"stages": 1000, "subsample": 0.5, "learn_rate": 0.1}
        return RankerSpec("gbdt", {**base, **fixed}, "max_depth", (2, 3, 4, 5, 6), "low", seed)
    if kind == "mlp":
        base = {
            "layers": (200, 200),
            "learn_rate": 1e-3,
            "batch_size": 64,
            "max_epochs": 200,
            "tol": 1e-4,
            "n_iter_no_change": 10,
        }
        return RankerSpec("mlp", {**base, **fixed}, "l2", (1e-5, 1e-4, 1e-3, 1e-2), "high", seed)
    raise ValueError(f"unknown model kind {kind!r}")


def fit_ranker(spec: RankerSpec, X, y, hp=None) -> TrainedRanker:
    kwargs = dict(spec.fixed)
    if spec.hp_name is not None:
        kwargs[spec.hp_name] = hp
    if spec.kind == "random":
        return fit_random(spec.seed)
    if spec.kind == "toppop":
        return fit_toppop(y)
    if spec.kind == "softmax":
        return fit_softmax(X, y, seed=spec.seed, **kwargs)
    if spec.kind == "gbdt":
        return fit_gbdt(X, y, seed=spec.seed, **kwargs)
    if spec.kind == "mlp":
        return fit_mlp(X, y, seed=spec.seed, **kwargs)
    raise ValueError(f"unknown model kind {spec.kind!r}")


def _unflatten(doc, name):
    return np.asarray(doc["params"][name]).reshape(doc["shapes"][name])


def ranker_from_dict(doc: dict) -> TrainedRanker:
    """Inverse of ``TrainedRanker.to_dict``."""
    kind, cfg = doc["kind"], doc.get("config", {})
    if kind == "random":
        return RandomRanker(cfg["seed"])
    if kind == "toppop":
        return TopPopRanker(_unflatten(doc, "counts"))
    if kind == "softmax":
        return SoftmaxRanker(_unflatten(doc, "W"), _unflatten(doc, "b"), cfg.get("l2", 0.0), cfg.get("epochs", 0))
    if kind == "gbdt":
        return GBDTRanker(
            _unflatten(doc, "init"),
            _unflatten(doc, "features"),
            _unflatten(doc, "values"),
            cfg["learn_rate"],
            doc["width"],
            cfg.get("max_depth"),
            cfg.get("subsample"),
            cfg.get("seed", 0),
        )
    if kind == "mlp":
        n = len(doc["params"])
        return MLPRanker([_unflatten(doc, f"p{i}") for i in range(n)], cfg.get("l2", 0.0), cfg.get("epochs", 0), cfg.get("seed", 0))
    raise ValueError(f"unknown model kind {kind!r}")


__all__ = [
    "KINDS",
    "N_CLASSES",
    "GBDTRanker",
    "MLPRanker",
    "RandomRanker",
    "RankedPrediction",
    "RankerSpec",
    "SoftmaxRanker",
    "TopPopRanker",
    "TrainedRanker",
    "default_spec",
    "fit_gbdt",
    "fit_mlp",
    "fit_random",
    "fit_ranker",
    "fit_softmax",
    "fit_toppop",
    "mlp_loss_grad",
    "order_by_score",
    "rank",
    "ranker_from_dict",
    "softmax",
    "softmax_loss_grad",
]
