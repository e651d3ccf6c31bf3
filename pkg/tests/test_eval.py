import io
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_event
from ctvbench.errors import IdMismatch, TooFewEvents
from ctvbench.eval import (
    OofPredictions,
    accuracy_at_k,
    confusion,
    f1_macro,
    micro_f1_equals_a1,
    mrr,
    nested_cv,
    plan_folds,
    _selection_key,
)
from ctvbench.features import DesignMatrix, FeatureConfig, UserIndex, preset
from ctvbench.ingest import GENRES, TIMES_OF_DAY
from ctvbench.models import N_CLASSES, RankerSpec, default_spec


def oof_with_ranks(y, ranks):
    """Prediction set where class ``y[i]`` sits at position ``ranks[i]`` (1-based)."""
    orders = []
    for yt, r in zip(y, ranks):
        rest = [c for c in range(N_CLASSES) if c != yt]
        orders.append(rest[: r - 1] + [yt] + rest[r - 1 :])
    return OofPredictions(tuple(f"e{i}" for i in range(len(y))), np.array(y), np.array(orders))


@st.composite
def prediction_sets(draw):
    n = draw(st.integers(1, 60))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    y = rng.integers(0, N_CLASSES, n)
    order = np.argsort(rng.random((n, N_CLASSES)), axis=1)
    return OofPredictions(tuple(f"e{i}" for i in range(n)), y, order)


def test_rank_examples():
    oof = oof_with_ranks([3, 5, 0], [1, 2, 4])
    assert accuracy_at_k(oof, 1) == 1 / 3
    assert accuracy_at_k(oof, 3) == 2 / 3
    assert mrr(oof) == pytest.approx((1 + 0.5 + 0.25) / 3)
    assert micro_f1_equals_a1(oof) == 1 / 3


def test_perfect_predictions():
    oof = oof_with_ranks(list(range(10)), [1] * 10)
    assert accuracy_at_k(oof, 1) == 1.0
    assert mrr(oof) == 1.0
    assert f1_macro(oof) == 1.0
    assert micro_f1_equals_a1(oof) == 1.0
    cm = confusion(oof)
    assert np.all(cm.precision == 1) and np.all(cm.recall == 1)


def test_never_predicted_class_scores_zero():
    oof = oof_with_ranks([0, 0, 1], [1, 1, 1])
    cm = confusion(oof)
    assert cm.f1[2] == 0.0 and cm.precision[2] == 0.0
    assert f1_macro(oof) == pytest.approx(0.2)


def test_k_out_of_range():
    with pytest.raises(ValueError):
        accuracy_at_k(oof_with_ranks([1], [1]), 11)


@settings(max_examples=200, deadline=None)
@given(prediction_sets())
def test_metric_properties(oof):
    accs = [accuracy_at_k(oof, k) for k in range(1, 11)]
    assert all(a <= b for a, b in zip(accs, accs[1:]))
    assert accs[-1] == 1.0
    m = mrr(oof)
    assert 0.1 <= m <= 1.0
    assert m >= accs[0] + (1 - accs[0]) / 10 - 1e-12
    assert micro_f1_equals_a1(oof) == accs[0]
    cm = confusion(oof)
    n = len(oof)
    assert cm.support.sum() == cm.predicted.sum() == cm.counts.sum() == n
    assert np.allclose(cm.recall * cm.support, cm.tp)
    assert np.allclose(cm.precision * cm.predicted, cm.tp)


def test_oof_csv_round_trip():
    oof = oof_with_ranks([3, 5, 0], [1, 2, 4])
    buf = io.StringIO()
    oof.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "event_id,true_genre," + ",".join(f"rank{i}" for i in range(1, 11))
    buf.seek(0)
    back = OofPredictions.read_csv(buf)
    assert back.event_ids == oof.event_ids
    assert np.array_equal(back.order, oof.order) and np.array_equal(back.y_true, oof.y_true)


def test_alignment():
    a = oof_with_ranks([3, 5, 0], [1, 2, 4])
    b = a.subset([2, 0, 1])
    assert a.aligned_with(b).event_ids == a.event_ids
    with pytest.raises(IdMismatch):
        a.aligned_with(a.subset([0, 1]))


def test_plan_sizes():
    plan = plan_folds(10)
    assert np.bincount(plan.outer).tolist() == [2] * 5
    assert np.bincount(plan_folds(3090).outer).tolist() == [618] * 5


def test_plan_needs_events():
    with pytest.raises(TooFewEvents):
        plan_folds(4)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 400), st.integers(0, 10**6))
def test_plan_invariants(n, seed):
    plan = plan_folds(n, seed=seed)
    sizes = np.bincount(plan.outer, minlength=5)
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    for k in range(5):
        train, test = plan.split(k)
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == n
        seen = np.concatenate([plan.inner_split(k, j)[1] for j in range(3)])
        assert np.array_equal(np.sort(seen), train)
    again = plan_folds(n, seed=seed)
    assert np.array_equal(again.outer, plan.outer)
    assert all(np.array_equal(a, b) for a, b in zip(again.inner, plan.inner))


def test_grouped_plan_keeps_siblings_together():
    groups = [i // 3 for i in range(60)]
    plan = plan_folds(60, groups=groups)
    for g in range(20):
        assert len(set(plan.outer[3 * g : 3 * g + 3])) == 1


def separable_matrix(per_class=6):
    """Each genre owns one indicator column; labels follow it exactly."""
    y = np.repeat(np.arange(N_CLASSES), per_class)
    X = np.eye(N_CLASSES)[y]
    for arr in (X, y):
        arr.setflags(write=False)
    return DesignMatrix(X, y, tuple(f"e{i}" for i in range(len(y))), FeatureConfig("T", "onehot"))


def test_nested_cv_on_separable_data():
    m = separable_matrix()
    report, oof = nested_cv(m, None, default_spec("softmax"), plan_folds(len(m.y), seed=1))
    assert accuracy_at_k(oof, 1) >= 0.95
    assert len(report.folds) == 5
    assert all(f["chosen_hp"] in default_spec("softmax").grid for f in report.folds)


def test_oof_covers_every_event_once():
    m = separable_matrix()
    plan = plan_folds(len(m.y), seed=2)
    _, oof = nested_cv(m, None, default_spec("toppop"), plan)
    assert oof.event_ids == m.ids
    assert np.array_equal(oof.fold, plan.outer)
    assert np.all(np.sort(oof.order, axis=1) == np.arange(N_CLASSES))


def test_test_fold_is_held_out():
    # a class that only appears in one fold can never be top-ranked by toppop there
    m = separable_matrix()
    plan = plan_folds(len(m.y), seed=3)
    _, oof = nested_cv(m, None, default_spec("toppop"), plan)
    for k in range(5):
        train, test = plan.split(k)
        counts = np.bincount(m.y[train], minlength=N_CLASSES)
        expected = np.argsort(-counts, kind="stable")
        assert all(np.array_equal(oof.order[i], expected) for i in test)


def test_report_mean_and_std_over_folds():
    m = separable_matrix()
    report, _ = nested_cv(m, None, default_spec("random", seed=4), plan_folds(len(m.y)))
    a1 = np.array([f["a1"] for f in report.folds])
    assert report.mean["a1"] == a1.mean() and report.std["a1"] == a1.std()
    doc = report.to_dict()
    assert set(doc["mean"]) == {"a1", "a3", "f1_macro", "mrr"}
    assert doc["confusion"]["labels"] == list(GENRES)


def test_nested_cv_is_identical_across_worker_counts():
    m = separable_matrix(per_class=4)
    spec = default_spec("gbdt", stages=20)
    plan = plan_folds(len(m.y), seed=5)
    r1, o1 = nested_cv(m, None, spec, plan, workers=1)
    r2, o2 = nested_cv(m, None, spec, plan, workers=2)
    strip = lambda d: {k: v for k, v in d.items() if k != "runtime"}  # noqa: E731
    assert strip(r1.to_dict()) == strip(r2.to_dict())
    assert np.array_equal(o1.order, o2.order)


def test_tie_break_prefers_more_regularization():
    # zero boosting stages: every depth predicts the prior, so all grid points tie
    m = separable_matrix()
    spec = RankerSpec("gbdt", {"stages": 0}, "max_depth", (4, 2, 6), "low")
    report, _ = nested_cv(m, None, spec, plan_folds(len(m.y)))
    assert all(f["chosen_hp"] == 2 for f in report.folds)


def test_selection_key_order():
    high = RankerSpec("softmax", {}, "l2", (0.1, 1.0), "high")
    low = RankerSpec("gbdt", {}, "max_depth", (2, 3), "low")
    assert _selection_key(high, 1.0, 0.5, 0.6) > _selection_key(high, 0.1, 0.5, 0.6)
    assert _selection_key(high, 0.1, 0.5, 0.7) > _selection_key(high, 1.0, 0.5, 0.6)
    assert _selection_key(high, 0.1, 0.6, 0.1) > _selection_key(high, 1.0, 0.5, 0.9)
    assert _selection_key(low, 2, 0.5, 0.6) > _selection_key(low, 3, 0.5, 0.6)


def test_nested_cv_builds_matrix_from_events():
    evs = [
        make_event(user=f"u{i % 3}", genre=GENRES[i % 5], when=datetime(2017, 3, 6 + i % 7, [7, 11, 15, 19, 23][i % 5]), answer_id=f"a{i}")
        for i in range(40)
    ]
    users = UserIndex.build(e.user_id for e in evs)
    report, oof = nested_cv(evs, preset("TD"), default_spec("softmax"), plan_folds(40), users)
    assert report.config == "TD" and report.width == 7
    assert accuracy_at_k(oof, 1) == 1.0
    assert oof.event_ids[0] == "a0#news"
    assert set(TIMES_OF_DAY)
