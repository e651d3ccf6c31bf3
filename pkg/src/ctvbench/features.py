"""One-hot / multi-hot encoding of viewing events under feature configurations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import UnknownDimensionLetter, UnknownPreset, UnknownUser
from .ingest import (
    COMPANION_INDEX,
    COMPANIONS,
    DAY_INDEX,
    DAY_TYPES,
    GENRE_INDEX,
    SERVICE_INDEX,
    SERVICES,
    TIME_INDEX,
    TIMES_OF_DAY,
    ViewingEvent,
)

DIMENSIONS = "UTDWMSA"
FIXED_WIDTHS = {
    "T": len(TIMES_OF_DAY),
    "D": len(DAY_TYPES),
    "W": len(COMPANIONS),
    "M": 5,
    "S": len(SERVICES),
    "A": 5,
}
PRESETS = {
    "all": "UTDWMA",
    "all+S": "UTDWMSA",
    "all-U": "TDWMA",
    "U": "U",
    "TD": "TD",
    "TDW": "TDW",
    "WA": "WA",
    "UTD": "UTD",
    "UWA": "UWA",
}


@dataclass(frozen=True)
class FeatureConfig:
    dims: str
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.dims


def preset(name: str) -> FeatureConfig:
    """Resolve a preset name, or parse a literal dimension string like ``"UTD"``."""
    if name in PRESETS:
        return FeatureConfig(PRESETS[name], name)
    if not name or not name.isalpha() or not name.isupper():
        raise UnknownPreset(f"unknown feature configuration {name!r}")
    bad = [c for c in name if c not in DIMENSIONS]
    if bad:
        raise UnknownDimensionLetter(f"unknown dimension letter(s) {''.join(bad)!r} in {name!r}")
    if len(set(name)) != len(name):
        raise UnknownDimensionLetter(f"duplicate dimension in {name!r}")
    dims = "".join(c for c in DIMENSIONS if c in name)
    return FeatureConfig(dims, name)


@dataclass(frozen=True)
class UserIndex:
    users: tuple

    @classmethod
    def build(cls, user_ids: Iterable[str]) -> "UserIndex":
        return cls(tuple(sorted(set(user_ids))))

    def __len__(self) -> int:
        return len(self.users)

    def offset(self, user_id: str) -> int:
        try:
            return self._lookup[user_id]
        except KeyError:
            raise UnknownUser(f"user {user_id!r} not in index") from None

    @cached_property
    def _lookup(self) -> dict:
        return {u: i for i, u in enumerate(self.users)}


def block_widths(config: FeatureConfig, users: UserIndex) -> list[tuple[str, int]]:
    return [(d, len(users) if d == "U" else FIXED_WIDTHS[d]) for d in config.dims]


def dimension(config: FeatureConfig, users: UserIndex) -> int:
    return sum(w for _, w in block_widths(config, users))


def _fill(row: np.ndarray, event: ViewingEvent, config: FeatureConfig, users: UserIndex) -> None:
    pos = 0
    for dim, width in block_widths(config, users):
        if dim == "U":
            row[pos + users.offset(event.user_id)] = 1
        elif dim == "T":
            row[pos + TIME_INDEX[event.time_of_day]] = 1
        elif dim == "D":
            row[pos + DAY_INDEX[event.day_type]] = 1
        elif dim == "W":
            for c in event.companions:
                row[pos + COMPANION_INDEX[c]] = 1
        elif dim == "M":
            row[pos + event.viewer_count - 1] = 1
        elif dim == "S":
            for s in event.services:
                row[pos + SERVICE_INDEX[s]] = 1
        elif dim == "A":
            row[pos + event.attention - 1] = 1
        pos += width


def encode(event: ViewingEvent, config: FeatureConfig, users: UserIndex) -> np.ndarray:
    row = np.zeros(dimension(config, users), dtype=np.float64)
    _fill(row, event, config, users)
    return row


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    ids: tuple
    config: FeatureConfig

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def column_names(self, users: UserIndex) -> list[str]:
        labels = {
            "U": list(users.users),
            "T": list(TIMES_OF_DAY),
            "D": list(DAY_TYPES),
            "W": list(COMPANIONS),
            "M": ["1", "2", "3", "4", "5plus"],
            "S": list(SERVICES),
            "A": ["1", "2", "3", "4", "5"],
        }
        return [f"{d}:{v}" for d in self.config.dims for v in labels[d]]


def build_matrix(events: Sequence[ViewingEvent], config: FeatureConfig, users: UserIndex) -> DesignMatrix:
    X = np.zeros((len(events), dimension(config, users)), dtype=np.float64)
    for i, event in enumerate(events):
        _fill(X[i], event, config, users)
    y = np.fromiter((GENRE_INDEX[e.genre] for e in events), dtype=np.int64, count=len(events))
    X.setflags(write=False)
    y.setflags(write=False)
    return DesignMatrix(X, y, tuple(e.event_id for e in events), config)
