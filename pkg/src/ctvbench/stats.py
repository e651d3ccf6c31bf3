"""Association statistics between genre and context, plus descriptive summaries."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from .errors import DegenerateTable, EmptyInput, NoDisagreement
from .ingest import (
    ATTENTION_LEVELS,
    COMPANIONS,
    DAY_TYPES,
    GENRES,
    SERVICES,
    TIMES_OF_DAY,
    VIEWER_COUNTS,
    ViewingEvent,
)

ANALYSIS_GENRES = tuple(g for g in GENRES if g != "other")

# column levels and how each event contributes to them
DIMENSION_LEVELS = {
    "time_of_day": TIMES_OF_DAY,
    "day_type": DAY_TYPES,
    "companions": COMPANIONS,
    "viewer_count": VIEWER_COUNTS,
    "attention": ATTENTION_LEVELS,
    "service": SERVICES,
}
ANALYSIS_DIMENSIONS = tuple(DIMENSION_LEVELS)


def _levels_of(event: ViewingEvent, dimension: str):
    if dimension == "time_of_day":
        return (event.time_of_day,)
    if dimension == "day_type":
        return (event.day_type,)
    if dimension == "companions":
        return tuple(event.companions)
    if dimension == "viewer_count":
        return (event.viewer_count,)
    if dimension == "attention":
        return (event.attention,)
    if dimension == "service":
        return tuple(event.services)
    raise ValueError(f"unknown dimension {dimension!r}")


@dataclass(frozen=True)
class ContingencyTable:
    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray
    dimension: str = ""

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def drop_empty(self) -> "ContingencyTable":
        rows = self.counts.sum(axis=1) > 0
        cols = self.counts.sum(axis=0) > 0
        return ContingencyTable(
            tuple(l for l, keep in zip(self.row_labels, rows) if keep),
            tuple(l for l, keep in zip(self.col_labels, cols) if keep),
            self.counts[np.ix_(rows, cols)],
            self.dimension,
        )


@dataclass(frozen=True)
class AssociationResult:
    chi2: float
    df: int
    p: float
    v: float
    valid: bool
    n: int
    dimension: str = ""

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "chi2": self.chi2,
            "df": self.df,
            "p": self.p,
            "v": self.v,
            "valid": self.valid,
            "n": self.n,
        }


@dataclass(frozen=True)
class McNemarResult:
    table: np.ndarray  # [[both correct, only A], [only B, both wrong]]
    chi2: float
    p: float
    v: float

    def as_dict(self) -> dict:
        return {
            "table": self.table.tolist(),
            "chi2": self.chi2,
            "df": 1,
            "p": self.p,
            "v": self.v,
        }


@dataclass(frozen=True)
class GroupSummary:
    key: tuple
    count: int
    mean: float | None = None
    std: float | None = None
    share: float | None = None


def contingency(events: Sequence[ViewingEvent], dimension: str) -> ContingencyTable:
    """Genre-by-context counts; events tagged ``other`` for genre are left out.

    Multi-select dimensions (companions, service) add one count per
    selected option, so ``n`` can exceed the number of events.
    """
    if dimension not in DIMENSION_LEVELS:
        raise ValueError(f"unknown dimension {dimension!r}")
    levels = DIMENSION_LEVELS[dimension]
    col_of = {lvl: j for j, lvl in enumerate(levels)}
    row_of = {g: i for i, g in enumerate(ANALYSIS_GENRES)}
    counts = np.zeros((len(ANALYSIS_GENRES), len(levels)), dtype=np.int64)
    for e in events:
        i = row_of.get(e.genre)
        if i is None:
            continue
        for lvl in _levels_of(e, dimension):
            counts[i, col_of[lvl]] += 1
    if counts.sum() == 0:
        raise EmptyInput(f"no events for genre x {dimension} table")
    return ContingencyTable(ANALYSIS_GENRES, tuple(levels), counts, dimension)


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def cramers_v(chi2: float, n: int, r: int, c: int) -> float:
    k = min(r - 1, c - 1)
    return math.sqrt(chi2 / (n * k))


def expected_counts(t: ContingencyTable) -> np.ndarray:
    counts = np.asarray(t.counts, dtype=np.float64)
    return np.outer(counts.sum(axis=1), counts.sum(axis=0)) / counts.sum()


def validity(t: ContingencyTable) -> bool:
    """At least 80% of expected frequencies above five and none zero."""
    if t.n == 0:
        return False
    exp = expected_counts(t)
    if np.any(exp == 0):
        return False
    return float(np.mean(exp > 5)) >= 0.8


def chi_square_test(t: ContingencyTable) -> AssociationResult:
    counts = np.asarray(t.counts, dtype=np.float64)
    if counts.sum() <= 0:
        raise DegenerateTable("empty table")
    if np.any(counts.sum(axis=1) == 0) or np.any(counts.sum(axis=0) == 0):
        raise DegenerateTable(f"zero marginal in {t.dimension or 'table'}; use drop_empty()")
    r, c = counts.shape
    if r < 2 or c < 2:
        raise DegenerateTable(f"{t.dimension or 'table'} has a single row or column")
    n = counts.sum()
    exp = expected_counts(t)
    chi2 = float(np.sum((counts - exp) ** 2 / exp))
    df = (r - 1) * (c - 1)
    return AssociationResult(
        chi2=chi2,
        df=df,
        p=chi_square_sf(chi2, df),
        v=min(1.0, cramers_v(chi2, n, r, c)),
        valid=validity(t),
        n=int(n),
        dimension=t.dimension,
    )


def mcnemar(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> McNemarResult:
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("correctness vectors must be 1-d, nonempty and of equal length")
    table = np.array(
        [
            [np.sum(a & b), np.sum(a & ~b)],
            [np.sum(~a & b), np.sum(~a & ~b)],
        ],
        dtype=np.int64,
    )
    a12, a21 = int(table[0, 1]), int(table[1, 0])
    if a12 + a21 == 0:
        raise NoDisagreement("the two methods agree on every trial")
    chi2 = (a12 - a21) ** 2 / (a12 + a21)
    return McNemarResult(table, chi2, chi_square_sf(chi2, 1), math.sqrt(chi2 / table.sum()))


def _context_key(e: ViewingEvent) -> tuple:
    return ("social" if e.social else "alone", e.day_type)


def _value(e: ViewingEvent, value: str) -> float:
    if value == "attention":
        return e.attention
    if value == "viewer_count":
        return e.viewer_count
    raise ValueError(f"unknown value {value!r}")


def group_mean(events: Sequence[ViewingEvent], group_by: str = "genre", value: str = "attention") -> list[GroupSummary]:
    """Count, mean and population standard deviation of ``value`` per group.

    ``group_by="genre"`` groups by genre; ``"context"`` by
    (alone/social, day type, time of day).
    """
    if not events:
        raise EmptyInput("no events")
    groups = defaultdict(list)
    for e in events:
        key = (e.genre,) if group_by == "genre" else _context_key(e) + (e.time_of_day,)
        groups[key].append(_value(e, value))

    if group_by == "genre":
        order = [(g,) for g in GENRES]
    elif group_by == "context":
        order = [
            (s, d, t) for s in ("alone", "social") for d in DAY_TYPES for t in TIMES_OF_DAY
        ]
    else:
        raise ValueError(f"unknown grouping {group_by!r}")

    out = []
    for key in order:
        vals = groups.get(key)
        if not vals:
            continue
        arr = np.asarray(vals, dtype=np.float64)
        out.append(GroupSummary(key, arr.size, float(arr.mean()), float(arr.std())))
    return out


def genre_share(events: Sequence[ViewingEvent], partition: str = "context") -> list[GroupSummary]:
    """Shares within each alone/social x weekday/weekend cell.

    ``partition="context"`` gives the genre mix of each cell;
    ``partition="time"`` gives the time-of-day mix of each cell.
    """
    if not events:
        raise EmptyInput("no events")
    if partition == "context":
        levels, pick = GENRES, (lambda e: e.genre)
    elif partition == "time":
        levels, pick = TIMES_OF_DAY, (lambda e: e.time_of_day)
    else:
        raise ValueError(f"unknown partition {partition!r}")

    cells = defaultdict(lambda: defaultdict(int))
    for e in events:
        cells[_context_key(e)][pick(e)] += 1

    out = []
    for cell in [(s, d) for s in ("alone", "social") for d in DAY_TYPES]:
        counts = cells.get(cell)
        if not counts:
            continue
        total = sum(counts.values())
        for lvl in levels:
            out.append(GroupSummary(cell + (lvl,), counts[lvl], share=counts[lvl] / total))
    return out


def analyze_all(events: Sequence[ViewingEvent]) -> tuple[list, list]:
    """Run every genre-by-context test; returns (tables, results).

    Empty rows and columns are dropped before testing so that planted or
    sparse data still yields a statistic; ``df`` reflects the reduced shape.
    A table that collapses to one row or column is reported with df 0,
    p 1 and ``valid=False``.
    """
    tables, results = [], []
    for dim in ANALYSIS_DIMENSIONS:
        t = contingency(events, dim)
        tables.append(t)
        try:
            results.append(chi_square_test(t.drop_empty()))
        except DegenerateTable:
            results.append(AssociationResult(0.0, 0, 1.0, 0.0, False, t.n, dim))
    return tables, results
