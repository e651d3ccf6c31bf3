"""Nested cross-validation, ranking metrics and confusion analysis."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import EmptyGrid, IdMismatch, TooFewEvents
from .features import DesignMatrix, FeatureConfig, UserIndex, build_matrix
from .ingest import GENRE_INDEX, GENRES, ViewingEvent
from .models import N_CLASSES, RankerSpec, fit_ranker

METRICS = ("a1", "a3", "f1_macro", "mrr")


@dataclass(frozen=True)
class FoldPlan:
    outer: np.ndarray  # fold id per event
    inner: tuple  # per outer fold: inner fold id per training event (ascending index order)
    seed: int
    n_outer: int
    n_inner: int
    grouped: bool = False

    def split(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return np.flatnonzero(self.outer != k), np.flatnonzero(self.outer == k)

    def inner_split(self, k: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        train, _ = self.split(k)
        mask = self.inner[k] == j
        return train[~mask], train[mask]


def _round_robin(n_units: int, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    folds = np.empty(n_units, dtype=np.int64)
    folds[rng.permutation(n_units)] = np.arange(n_units) % n_folds
    return folds


def plan_folds(
    event_count: int,
    outer: int = 5,
    inner: int = 3,
    seed: int = 0,
    groups: Sequence | None = None,
) -> FoldPlan:
    """Seeded shuffle then round-robin assignment to folds.

    With ``groups`` (e.g. source answer ids), whole groups are assigned so
    sibling events never straddle folds.
    """
    if event_count < outer:
        raise TooFewEvents(f"{event_count} events cannot fill {outer} outer folds")
    if groups is None:
        unit = np.arange(event_count)
    else:
        _, unit = np.unique(np.asarray(groups), return_inverse=True)
        if unit.max() + 1 < outer:
            raise TooFewEvents(f"{unit.max() + 1} groups cannot fill {outer} outer folds")
    n_units = int(unit.max()) + 1

    outer_fold = _round_robin(n_units, outer, np.random.default_rng([seed, 0]))[unit]
    inner_folds = []
    for k in range(outer):
        train = np.flatnonzero(outer_fold != k)
        train_units, local = np.unique(unit[train], return_inverse=True)
        if train_units.size < inner:
            raise TooFewEvents(f"outer fold {k} leaves too few events for {inner} inner folds")
        rng = np.random.default_rng([seed, k + 1])
        inner_folds.append(_round_robin(train_units.size, inner, rng)[local])
    return FoldPlan(outer_fold, tuple(inner_folds), seed, outer, inner, groups is not None)


@dataclass
class OofPredictions:
    event_ids: tuple
    y_true: np.ndarray
    order: np.ndarray  # (n, 10) class indices, best first
    fold: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.event_ids)

    def subset(self, idx) -> "OofPredictions":
        idx = np.asarray(idx)
        return OofPredictions(
            tuple(self.event_ids[i] for i in idx),
            self.y_true[idx],
            self.order[idx],
            None if self.fold is None else self.fold[idx],
        )

    def true_ranks(self) -> np.ndarray:
        return np.argmax(self.order == self.y_true[:, None], axis=1) + 1

    def top1_correct(self) -> np.ndarray:
        return self.order[:, 0] == self.y_true

    def write_csv(self, sink: IO[str]) -> None:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["event_id", "true_genre"] + [f"rank{i}" for i in range(1, N_CLASSES + 1)])
        for eid, yt, row in zip(self.event_ids, self.y_true, self.order):
            writer.writerow([eid, GENRES[yt]] + [GENRES[c] for c in row])

    @classmethod
    def read_csv(cls, source: IO[str]) -> "OofPredictions":
        reader = csv.reader(source)
        header = next(reader)
        if header[:2] != ["event_id", "true_genre"] or len(header) != N_CLASSES + 2:
            raise ValueError("not an out-of-fold prediction file")
        ids, ys, orders = [], [], []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            ys.append(GENRE_INDEX[row[1]])
            orders.append([GENRE_INDEX[g] for g in row[2:]])
        return cls(tuple(ids), np.array(ys, dtype=np.int64), np.array(orders, dtype=np.int64).reshape(-1, N_CLASSES))

    def aligned_with(self, other: "OofPredictions") -> "OofPredictions":
        """Reorder ``other`` to this file's event order; ids must match exactly."""
        if len(set(self.event_ids)) != len(self.event_ids) or set(self.event_ids) != set(other.event_ids):
            raise IdMismatch("prediction files cover different event ids")
        pos = {e: i for i, e in enumerate(other.event_ids)}
        return other.subset([pos[e] for e in self.event_ids])


def accuracy_at_k(oof: OofPredictions, k: int) -> float:
    if not 1 <= k <= N_CLASSES:
        raise ValueError("k must be in 1..10")
    hits = np.any(oof.order[:, :k] == oof.y_true[:, None], axis=1)
    return np.count_nonzero(hits) / len(oof)


def mrr(oof: OofPredictions) -> float:
    return float(np.mean(1.0 / oof.true_ranks()))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true genre, columns = predicted top-1
    labels: tuple = GENRES

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def predicted(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @staticmethod
    def _ratio(num, den):
        num = np.asarray(num, dtype=np.float64)
        den = np.asarray(den, dtype=np.float64)
        return np.divide(num, den, out=np.zeros_like(num), where=den > 0)

    @property
    def recall(self) -> np.ndarray:
        return self._ratio(self.tp, self.support)

    @property
    def precision(self) -> np.ndarray:
        return self._ratio(self.tp, self.predicted)

    @property
    def f1(self) -> np.ndarray:
        return self._ratio(2 * self.tp, self.support + self.predicted)

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "predicted": self.predicted.tolist(),
        }


def confusion(oof: OofPredictions) -> ConfusionMatrix:
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (oof.y_true, oof.order[:, 0]), 1)
    return ConfusionMatrix(counts)


def f1_macro(oof: OofPredictions) -> float:
    return float(np.mean(confusion(oof).f1))


def micro_f1_equals_a1(oof: OofPredictions) -> float:
    """Micro-averaged F1 from pooled counts (equals A@1 for single-label data)."""
    cm = confusion(oof)
    tp = int(cm.tp.sum())
    fp = int(cm.predicted.sum()) - tp
    fn = int(cm.support.sum()) - tp
    return 2 * tp / (2 * tp + fp + fn)


def fold_metrics(oof: OofPredictions) -> dict:
    return {
        "a1": accuracy_at_k(oof, 1),
        "a3": accuracy_at_k(oof, 3),
        "f1_macro": f1_macro(oof),
        "mrr": mrr(oof),
    }


@dataclass
class EvaluationReport:
    config: str
    model: str
    folds: list
    confusion: ConfusionMatrix
    seeds: dict
    spec: dict
    fold_policy: str
    runtime: float = 0.0
    n_events: int = 0
    width: int = 0
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in METRICS:
            vals = np.array([f[m] for f in self.folds])
            self.mean.setdefault(m, float(vals.mean()))
            self.std.setdefault(m, float(vals.std()))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "model": self.model,
            "folds": self.folds,
            "mean": self.mean,
            "std": self.std,
            "confusion": self.confusion.as_dict(),
            "seeds": self.seeds,
            "spec": self.spec,
            "fold_policy": self.fold_policy,
            "n_events": self.n_events,
            "width": self.width,
            "runtime": self.runtime,
            "version": __version__,
        }


def _selection_key(spec: RankerSpec, hp, a1: float, mrr_: float):
    reg = hp if spec.more_regularized == "high" else -hp
    return (a1, mrr_, reg)


def _outer_fold(task):
    X, y, plan, k, spec = task
    with threadpool_limits(1):
        train, test = plan.split(k)
        chosen, grid_scores = None, []
        if spec.tunable:
            if not spec.grid:
                raise EmptyGrid(f"{spec.kind} has no hyperparameter grid")
            best = None
            for hp in spec.grid:
                a1s, mrrs = [], []
                for j in range(plan.n_inner):
                    tr, va = plan.inner_split(k, j)
                    model = fit_ranker(spec, X[tr], y[tr], hp)
                    order, _ = model.rank_batch(X[va], va)
                    val = OofPredictions(tuple(va), y[va], order)
                    a1s.append(accuracy_at_k(val, 1))
                    mrrs.append(mrr(val))
                a1, m = float(np.mean(a1s)), float(np.mean(mrrs))
                grid_scores.append({"hp": hp, "a1": a1, "mrr": m})
                key = _selection_key(spec, hp, a1, m)
                if best is None or key > best:
                    best, chosen = key, hp
        model = fit_ranker(spec, X[train], y[train], chosen)
        order, _ = model.rank_batch(X[test], test)
    return k, test, order, chosen, grid_scores


def nested_cv(
    events: Sequence[ViewingEvent] | DesignMatrix,
    config: FeatureConfig | None,
    spec: RankerSpec,
    plan: FoldPlan,
    users: UserIndex | None = None,
    workers: int = 1,
) -> tuple[EvaluationReport, OofPredictions]:
    """Outer folds estimate performance; inner folds pick the hyperparameter by
    mean validation A@1 (ties: higher MRR, then the more regularized value)."""
    started = time.perf_counter()
    m = events if isinstance(events, DesignMatrix) else build_matrix(events, config, users)
    X, y = np.asarray(m.X), np.asarray(m.y)
    if len(plan.outer) != len(y):
        raise ValueError("fold plan does not match the number of events")

    tasks = [(X, y, plan, k, spec) for k in range(plan.n_outer)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_outer_fold, tasks))
    else:
        results = [_outer_fold(t) for t in tasks]

    order = np.zeros((len(y), N_CLASSES), dtype=np.int64)
    fold_of = np.asarray(plan.outer)
    folds = []
    for k, test, fold_order, chosen, grid_scores in results:
        order[test] = fold_order
        part = OofPredictions(tuple(m.ids[i] for i in test), y[test], fold_order)
        folds.append({"fold": k, **fold_metrics(part), "chosen_hp": chosen, "n_test": int(test.size), "grid": grid_scores})

    oof = OofPredictions(m.ids, y, order, fold_of)
    policy = (
        "events split into folds (not users); "
        + ("sibling events of one answer kept together" if plan.grouped else "sibling events of one answer may straddle folds")
        + f"; {plan.n_outer} outer x {plan.n_inner} inner folds; no stratification"
    )
    report = EvaluationReport(
        config=m.config.label,
        model=spec.kind,
        folds=folds,
        confusion=confusion(oof),
        seeds={"plan": plan.seed, "model": spec.seed},
        spec=spec.describe(),
        fold_policy=policy,
        runtime=time.perf_counter() - started,
        n_events=len(y),
        width=X.shape[1],
    )
    return report, oof
