"""Synthetic answer logs with plantable context-to-genre dependencies."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date, datetime, timedelta

import numpy as np

from .errors import InvalidSpec
from .ingest import COMPANIONS, GENRE_INDEX, GENRES, SERVICES, TIMES_OF_DAY, AnswerRecord, UserProfile

# minute-of-day windows per slot, matching derive_time_of_day
_SLOT_MINUTES = {
    "morning": [(360, 600)],
    "noon": [(600, 840)],
    "afternoon": [(840, 1080)],
    "evening": [(1080, 1320)],
    "night": [(1320, 1440), (0, 360)],
}
_SOCIAL_COMPANIONS = COMPANIONS[1:]


@dataclass
class SynthSpec:
    users: int = 118
    answers_per_user: float = 55.0
    answers_dist: str = "poisson"  # or "fixed"
    start_date: str = "2017-03-06"
    days: int = 36
    holidays: list = field(default_factory=list)
    watched_prob: float = 0.36
    multi_genre_prob: float = 0.3
    time_of_day_marginal: list = field(default_factory=lambda: [0.167, 0.197, 0.184, 0.248, 0.204])
    genre_marginal: list = field(
        default_factory=lambda: [0.13, 0.07, 0.07, 0.25, 0.03, 0.074, 0.14, 0.07, 0.08, 0.086]
    )
    genre_given_time: list | None = None  # 5 rows x 10 genres
    genre_given_social: list | None = None  # 2 rows (alone, social) x 10 genres
    social_prob: float = 0.57
    companion_marginal: list = field(default_factory=lambda: [0.55, 0.1, 0.08, 0.05, 0.07, 0.12, 0.03])
    extra_companion_prob: float = 0.2
    viewer_marginal: list = field(default_factory=lambda: [0.6, 0.2, 0.12, 0.08])  # 2, 3, 4, 5+
    service_marginal: list = field(default_factory=lambda: [0.35, 0.15, 0.1, 0.05, 0.2, 0.05, 0.08, 0.02])
    extra_service_prob: float = 0.1
    attention_marginal: list = field(default_factory=lambda: [0.05, 0.12, 0.25, 0.33, 0.25])
    seed: int = 0

    def validate(self) -> "SynthSpec":
        if self.users < 1 or self.days < 1 or self.answers_per_user < 1:
            raise InvalidSpec("users, days and answers_per_user must be >= 1")
        if self.answers_dist not in ("poisson", "fixed"):
            raise InvalidSpec(f"unknown answers_dist {self.answers_dist!r}")
        for name in ("watched_prob", "multi_genre_prob", "social_prob", "extra_companion_prob", "extra_service_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidSpec(f"{name}={p} outside [0, 1]")
        sizes = {
            "time_of_day_marginal": len(TIMES_OF_DAY),
            "genre_marginal": len(GENRES),
            "companion_marginal": len(_SOCIAL_COMPANIONS),
            "viewer_marginal": 4,
            "service_marginal": len(SERVICES),
            "attention_marginal": 5,
        }
        for name, size in sizes.items():
            _check_dist(name, getattr(self, name), size)
        if self.genre_given_time is not None:
            if len(self.genre_given_time) != len(TIMES_OF_DAY):
                raise InvalidSpec("genre_given_time needs one row per time-of-day slot")
            for i, row in enumerate(self.genre_given_time):
                _check_dist(f"genre_given_time[{i}]", row, len(GENRES))
        if self.genre_given_social is not None:
            if len(self.genre_given_social) != 2:
                raise InvalidSpec("genre_given_social needs rows for alone and social")
            for i, row in enumerate(self.genre_given_social):
                _check_dist(f"genre_given_social[{i}]", row, len(GENRES))
        try:
            date.fromisoformat(self.start_date)
            for h in self.holidays:
                date.fromisoformat(h)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidSpec(f"unknown spec keys {sorted(unknown)}")
        return cls(**doc).validate()


def _check_dist(name, values, size):
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (size,):
        raise InvalidSpec(f"{name} must have {size} entries")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise InvalidSpec(f"{name} is not a normalized distribution (sum={arr.sum():.12g})")


def plant_series_share(spec: SynthSpec, share: float = 0.25) -> SynthSpec:
    """Rescale the genre marginal so ``series`` has mass ``share``."""
    if not 0.0 < share < 1.0:
        raise InvalidSpec("series share must lie strictly between 0 and 1")
    m = np.asarray(spec.genre_marginal, dtype=np.float64).copy()
    s = GENRE_INDEX["series"]
    rest = np.delete(np.arange(len(GENRES)), s)
    if m[rest].sum() > 0:
        m[rest] *= (1.0 - share) / m[rest].sum()
    else:
        m[rest] = (1.0 - share) / rest.size
    m[s] = share
    return replace(spec, genre_marginal=m.tolist())


def planted_time_spec(strength: float = 1.0, **overrides) -> SynthSpec:
    """Genre follows time of day: slot i favours genre i with weight ``strength``.

    ``strength=1`` makes genre a deterministic function of the slot.
    """
    base = SynthSpec(**overrides)
    marginal = np.asarray(base.genre_marginal)
    table = []
    for i in range(len(TIMES_OF_DAY)):
        row = (1.0 - strength) * marginal
        row[i] += strength
        table.append((row / row.sum()).tolist())
    return replace(base, genre_given_time=table).validate()


# multiplicative genre tilts per slot and per alone/social, applied to the marginal;
# genre order: news sport movie series music documentary entertainment childrens user_generated other
_TIME_TILT = [
    [2.0, 1.0, 0.4, 0.8, 1.3, 1.0, 0.8, 1.8, 1.0, 1.0],  # morning
    [1.3, 1.0, 0.6, 1.0, 1.0, 1.2, 1.0, 1.0, 1.4, 1.0],  # noon
    [1.0, 1.2, 0.7, 1.0, 1.0, 1.0, 1.0, 1.6, 1.3, 1.0],  # afternoon
    [1.0, 1.0, 1.3, 1.1, 0.9, 1.0, 1.3, 0.6, 0.8, 1.0],  # evening
    [0.6, 1.0, 1.5, 1.3, 0.9, 1.0, 0.9, 0.3, 1.0, 1.0],  # night
]
_SOCIAL_TILT = [
    [1.2, 1.0, 0.7, 1.0, 1.0, 1.1, 1.0, 0.3, 1.8, 1.0],  # alone
    [0.9, 1.0, 1.3, 1.0, 1.0, 0.9, 1.0, 1.6, 0.4, 1.0],  # social
]


def _tilted(marginal, tilts) -> list:
    rows = np.asarray(marginal)[None, :] * np.asarray(tilts)
    return (rows / rows.sum(axis=1, keepdims=True)).tolist()


def calibrated_spec(**overrides) -> SynthSpec:
    """Default shape plus the qualitative genre patterns of the public logs.

    News and children's lean to mornings, movie and series to late hours;
    movie and children's are social genres and user-generated content is
    mostly watched alone.
    """
    base = SynthSpec(**overrides)
    return replace(
        base,
        genre_given_time=_tilted(base.genre_marginal, _TIME_TILT),
        genre_given_social=_tilted([1.0] * len(GENRES), _SOCIAL_TILT),
    ).validate()


def _choice(rng, probs) -> int:
    return int(rng.choice(len(probs), p=probs))


def _multi(rng, first_probs, extra_prob) -> set:
    picked = {_choice(rng, first_probs)}
    while rng.random() < extra_prob and len(picked) < len(first_probs):
        picked.add(_choice(rng, first_probs))
    return picked


def _genre_probs(spec: SynthSpec, slot: int, social: bool) -> np.ndarray:
    p = np.asarray(spec.genre_marginal, dtype=np.float64)
    if spec.genre_given_time is not None:
        p = np.asarray(spec.genre_given_time[slot], dtype=np.float64)
    if spec.genre_given_social is not None:
        q = np.asarray(spec.genre_given_social[int(social)], dtype=np.float64)
        p = p * q if spec.genre_given_time is not None else q
    return p / p.sum()


def _answer(spec: SynthSpec, rng, user_id: str, answer_id: str, start: date) -> AnswerRecord:
    day = start + timedelta(days=int(rng.integers(spec.days)))
    slot = _choice(rng, spec.time_of_day_marginal)
    offset = int(rng.integers(sum(hi - lo for lo, hi in _SLOT_MINUTES[TIMES_OF_DAY[slot]])))
    for lo, hi in _SLOT_MINUTES[TIMES_OF_DAY[slot]]:
        if offset < hi - lo:
            minute = lo + offset
            break
        offset -= hi - lo
    ts = datetime(day.year, day.month, day.day, minute // 60, minute % 60)

    if rng.random() >= spec.watched_prob:
        return AnswerRecord(answer_id, user_id, ts, False)

    social = rng.random() < spec.social_prob
    if social:
        companions = frozenset(_SOCIAL_COMPANIONS[i] for i in _multi(rng, spec.companion_marginal, spec.extra_companion_prob))
        viewers = 2 + _choice(rng, spec.viewer_marginal)
        viewers = max(viewers, min(5, 1 + len(companions)))
    else:
        companions = frozenset({"alone"})
        viewers = 1

    probs = _genre_probs(spec, slot, social)
    genres = {_choice(rng, probs)}
    if rng.random() < spec.multi_genre_prob and np.count_nonzero(probs) > 1:
        rest = probs.copy()
        rest[list(genres)] = 0.0
        genres.add(_choice(rng, rest / rest.sum()))
    services = _multi(rng, spec.service_marginal, spec.extra_service_prob)
    attention = 1 + _choice(rng, spec.attention_marginal)
    return AnswerRecord(
        answer_id,
        user_id,
        ts,
        True,
        companions=companions,
        viewer_count=viewers,
        genres=frozenset(GENRES[g] for g in genres),
        services=frozenset(SERVICES[s] for s in services),
        attention=attention,
    )


def user_id(u: int) -> str:
    return f"u{u:04d}"


def generate(spec: SynthSpec) -> list[AnswerRecord]:
    """Answer records in user order; each answer draws from its own
    stream keyed by (seed, user, answer index)."""
    spec.validate()
    start = date.fromisoformat(spec.start_date)
    records = []
    for u in range(spec.users):
        if spec.answers_dist == "fixed":
            n_answers = int(round(spec.answers_per_user))
        else:
            n_answers = 1 + int(np.random.default_rng([spec.seed, u, 2**31]).poisson(spec.answers_per_user - 1))
        for j in range(n_answers):
            rng = np.random.default_rng([spec.seed, u, j])
            records.append(_answer(spec, rng, user_id(u), f"a{u:04d}-{j:04d}", start))
    return records


def generate_profiles(spec: SynthSpec) -> list[UserProfile]:
    profiles = []
    for u in range(spec.users):
        rng = np.random.default_rng([spec.seed, u, 2**31 + 1])
        n_fav = 1 + int(rng.integers(4))
        favorites = rng.choice(len(GENRES) - 1, size=n_fav, replace=False)
        profiles.append(
            UserProfile(
                user_id=user_id(u),
                gender=str(rng.choice(["male", "female"])),
                age_group=str(rng.choice(["13-20", "21-30", "31-40", "41-50", "51-70"], p=[0.1, 0.57, 0.15, 0.1, 0.08])),
                language=str(rng.choice(["danish", "english"], p=[0.8, 0.2])),
                device_type=str(rng.choice(["mobile", "desktop", "tablet"], p=[0.7, 0.2, 0.1])),
                household_size=str(1 + int(rng.integers(5))),
                household_members="",
                watch_frequency=str(rng.choice(["daily", "weekly", "rarely"], p=[0.81, 0.16, 0.03])),
                favorite_genres=frozenset(GENRES[int(g)] for g in favorites),
            )
        )
    return profiles
