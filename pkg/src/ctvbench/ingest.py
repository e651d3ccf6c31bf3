"""Parsing of answer logs and enrollment profiles into viewing events.

Answers CSV (canonical form)::

    answer_id,user_id,timestamp,q1,q2,q3,q4,q5,q6
    a1,u7,2017-03-08T20:15:00,yes,partner|friend,3,series,netflix,4

Multi-option answers are pipe-separated lowercase tokens, an empty field
means "absent", and ``q3`` uses ``5plus`` for five or more viewers. Free
text attached to an ``other`` option (``other:some text``) is dropped.
Row numbers in errors are physical line numbers (the header is line 1).
"""

from __future__ import annotations

import configparser
import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time
from typing import IO, Iterable

from .errors import (
    BadTimestamp,
    DuplicateUser,
    IngestError,
    InvariantViolation,
    MalformedRow,
    UnknownToken,
)

GENRES = (
    "news",
    "sport",
    "movie",
    "series",
    "music",
    "documentary",
    "entertainment",
    "childrens",
    "user_generated",
    "other",
)
COMPANIONS = (
    "alone",
    "partner",
    "child_young",
    "child_old",
    "sibling",
    "parent",
    "friend",
    "other",
)
SERVICES = (
    "traditional",
    "drtv",
    "tv2play",
    "viaplay",
    "netflix",
    "hbo",
    "youtube",
    "other",
)
TIMES_OF_DAY = ("morning", "noon", "afternoon", "evening", "night")
DAY_TYPES = ("weekday", "weekend_holiday")
VIEWER_COUNTS = (1, 2, 3, 4, 5)
ATTENTION_LEVELS = (1, 2, 3, 4, 5)

GENRE_INDEX = {g: i for i, g in enumerate(GENRES)}
COMPANION_INDEX = {c: i for i, c in enumerate(COMPANIONS)}
SERVICE_INDEX = {s: i for i, s in enumerate(SERVICES)}
TIME_INDEX = {t: i for i, t in enumerate(TIMES_OF_DAY)}
DAY_INDEX = {d: i for i, d in enumerate(DAY_TYPES)}

ANSWER_COLUMNS = ("answer_id", "user_id", "timestamp", "q1", "q2", "q3", "q4", "q5", "q6")
PROFILE_COLUMNS = (
    "user_id",
    "gender",
    "age_group",
    "language",
    "device_type",
    "household_size",
    "household_members",
    "watch_frequency",
    "favorite_genres",
)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

# spellings seen in the questionnaire itself, accepted without a remap file
_ALIASES = {
    "q2": {
        "child (0-12)": "child_young",
        "child_0_12": "child_young",
        "child (12+)": "child_old",
        "child_12plus": "child_old",
    },
    "q4": {
        "children's": "childrens",
        "children": "childrens",
        "user-generated": "user_generated",
        "usergenerated": "user_generated",
    },
    "q5": {
        "traditional tv": "traditional",
        "tv2 play": "tv2play",
        "hbo nordic": "hbo",
    },
}
_VOCAB = {"q2": COMPANION_INDEX, "q4": GENRE_INDEX, "q5": SERVICE_INDEX}


@dataclass(frozen=True)
class AnswerRecord:
    answer_id: str
    user_id: str
    timestamp: datetime
    watched: bool
    companions: frozenset = frozenset()
    viewer_count: int | None = None
    genres: frozenset = frozenset()
    services: frozenset = frozenset()
    attention: int | None = None


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    gender: str = ""
    age_group: str = ""
    language: str = ""
    device_type: str = ""
    household_size: str = ""
    household_members: str = ""
    watch_frequency: str = ""
    favorite_genres: frozenset = frozenset()


@dataclass(frozen=True)
class ViewingEvent:
    source_answer_id: str
    user_id: str
    timestamp: datetime
    genre: str
    companions: frozenset
    viewer_count: int
    services: frozenset
    attention: int
    time_of_day: str
    day_type: str

    @property
    def event_id(self) -> str:
        return f"{self.source_answer_id}#{self.genre}"

    @property
    def social(self) -> bool:
        return self.companions != frozenset({"alone"})


@dataclass
class Remap:
    """Adapter from a foreign answers file to the canonical schema.

    Loaded from an INI-style file::

        [columns]
        AnswerID = answer_id
        [tokens]
        q1.Ja = yes
        q4.Children's = childrens
        [options]
        timestamp_format = %Y-%m-%d %H:%M:%S
        separator = ;
    """

    columns: dict = field(default_factory=dict)
    tokens: dict = field(default_factory=dict)
    timestamp_format: str = TIMESTAMP_FORMAT
    separator: str = "|"

    @classmethod
    def load(cls, source: IO[str] | str) -> "Remap":
        parser = configparser.ConfigParser(delimiters=("=",), interpolation=None)
        parser.optionxform = str
        text = source if isinstance(source, str) else source.read()
        parser.read_string(text)
        remap = cls()
        if parser.has_section("columns"):
            remap.columns = {k.strip(): v.strip() for k, v in parser.items("columns")}
        if parser.has_section("tokens"):
            for key, value in parser.items("tokens"):
                column, _, token = key.partition(".")
                remap.tokens[(column.strip(), token.strip().lower())] = value.strip()
        if parser.has_section("options"):
            opts = dict(parser.items("options"))
            remap.timestamp_format = opts.get("timestamp_format", remap.timestamp_format)
            remap.separator = opts.get("separator", remap.separator) or "|"
        return remap

    def token(self, column: str, raw: str) -> str:
        key = raw.strip().lower()
        return self.tokens.get((column, key), key)


def _split_tokens(raw: str, sep: str) -> list[str]:
    return [t.strip() for t in raw.split(sep) if t.strip()]


def _resolve_option(column: str, token: str, row: int, remap: Remap) -> str:
    token = remap.token(column, token)
    if token.startswith("other"):
        return "other"
    token = _ALIASES[column].get(token, token)
    if token not in _VOCAB[column]:
        raise UnknownToken(row, f"unknown {column} option {token!r}")
    return token


def _parse_multi(column, raw, row, remap):
    return frozenset(_resolve_option(column, t, row, remap) for t in _split_tokens(raw, remap.separator))


def _parse_level(column, raw, row, remap, upper):
    raw = remap.token(column, raw)
    if raw == "":
        return None
    if column == "q3" and raw in ("5plus", "5+"):
        return 5
    try:
        value = int(raw)
    except ValueError:
        raise UnknownToken(row, f"unknown {column} value {raw!r}") from None
    if not 1 <= value <= upper:
        raise UnknownToken(row, f"{column} value {value} outside 1..{upper}")
    return value


def _record_from_fields(fields: dict, row: int, remap: Remap) -> AnswerRecord:
    try:
        ts = datetime.strptime(fields["timestamp"].strip(), remap.timestamp_format)
    except ValueError:
        raise BadTimestamp(row, f"cannot parse timestamp {fields['timestamp']!r}") from None

    q1 = remap.token("q1", fields["q1"])
    if q1 not in ("yes", "no"):
        raise UnknownToken(row, f"unknown q1 value {q1!r}")
    watched = q1 == "yes"

    companions = _parse_multi("q2", fields["q2"], row, remap)
    viewers = _parse_level("q3", fields["q3"], row, remap, 5)
    genres = _parse_multi("q4", fields["q4"], row, remap)
    services = _parse_multi("q5", fields["q5"], row, remap)
    attention = _parse_level("q6", fields["q6"], row, remap, 5)

    if not watched:
        if companions or genres or services or viewers is not None or attention is not None:
            raise InvariantViolation(row, "q1=no but q2-q6 answered")
    else:
        if not genres:
            raise InvariantViolation(row, "q1=yes with empty q4")
        if attention is None:
            raise InvariantViolation(row, "q1=yes with empty q6")
        if not companions:
            raise InvariantViolation(row, "q1=yes with empty q2")
        if not services:
            raise InvariantViolation(row, "q1=yes with empty q5")
        if "alone" in companions:
            # q3 is never shown to viewers who picked alone
            viewers = 1
        elif viewers is None:
            raise InvariantViolation(row, "q1=yes with empty q3 and no 'alone' in q2")

    return AnswerRecord(
        answer_id=fields["answer_id"].strip(),
        user_id=fields["user_id"].strip(),
        timestamp=ts,
        watched=watched,
        companions=companions,
        viewer_count=viewers,
        genres=genres,
        services=services,
        attention=attention,
    )


def parse_answers(
    source: IO[str],
    remap: Remap | None = None,
    errors: list | None = None,
) -> list[AnswerRecord]:
    """Parse an answers CSV into records, in file order.

    When ``errors`` is a list, bad rows are appended to it and skipped
    instead of raising.
    """
    remap = remap or Remap()
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [remap.columns.get(h.strip(), h.strip()) for h in header]
    missing = [c for c in ANSWER_COLUMNS if c not in header]
    if missing:
        raise MalformedRow(1, f"missing columns {missing}")
    positions = {c: header.index(c) for c in ANSWER_COLUMNS}

    records = []
    for line_no, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        try:
            if len(cells) != len(header):
                raise MalformedRow(line_no, f"expected {len(header)} fields, got {len(cells)}")
            fields = {c: cells[i] for c, i in positions.items()}
            records.append(_record_from_fields(fields, line_no, remap))
        except IngestError as exc:
            if errors is None:
                raise
            errors.append(exc)
    return records


def _join(tokens: Iterable[str], index: dict) -> str:
    return "|".join(sorted(tokens, key=index.__getitem__))


def write_answers(records: Iterable[AnswerRecord], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(ANSWER_COLUMNS)
    for r in records:
        q3 = "" if r.viewer_count is None else ("5plus" if r.viewer_count == 5 else str(r.viewer_count))
        if r.watched and "alone" in r.companions:
            q3 = ""
        writer.writerow(
            [
                r.answer_id,
                r.user_id,
                r.timestamp.strftime(TIMESTAMP_FORMAT),
                "yes" if r.watched else "no",
                _join(r.companions, COMPANION_INDEX),
                q3,
                _join(r.genres, GENRE_INDEX),
                _join(r.services, SERVICE_INDEX),
                "" if r.attention is None else str(r.attention),
            ]
        )


def answers_to_csv(records: Iterable[AnswerRecord]) -> str:
    buf = io.StringIO()
    write_answers(records, buf)
    return buf.getvalue()


def parse_profiles(source: IO[str]) -> list[UserProfile]:
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        return []
    missing = [c for c in PROFILE_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise MalformedRow(1, f"missing columns {missing}")
    profiles, seen = [], set()
    for line_no, row in enumerate(reader, start=2):
        uid = row["user_id"].strip()
        if uid in seen:
            raise DuplicateUser(f"row {line_no}: duplicate user_id {uid!r}")
        seen.add(uid)
        favorites = _parse_multi("q4", row["favorite_genres"] or "", line_no, Remap())
        profiles.append(
            UserProfile(
                user_id=uid,
                favorite_genres=favorites,
                **{c: (row[c] or "").strip() for c in PROFILE_COLUMNS[1:-1]},
            )
        )
    return profiles


def write_profiles(profiles: Iterable[UserProfile], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    for p in profiles:
        writer.writerow(
            [getattr(p, c) for c in PROFILE_COLUMNS[:-1]] + [_join(p.favorite_genres, GENRE_INDEX)]
        )


def load_holidays(source: IO[str]) -> frozenset:
    """Read one ISO date per line; ``#`` starts a comment."""
    dates = set()
    for line_no, line in enumerate(source, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            dates.add(date.fromisoformat(text))
        except ValueError:
            raise BadTimestamp(line_no, f"bad holiday date {text!r}") from None
    return frozenset(dates)


def derive_time_of_day(clock: time) -> str:
    hour = clock.hour
    if 6 <= hour < 10:
        return "morning"
    if 10 <= hour < 14:
        return "noon"
    if 14 <= hour < 18:
        return "afternoon"
    if 18 <= hour < 22:
        return "evening"
    return "night"


def derive_day_type(day: date, calendar: frozenset = frozenset()) -> str:
    if day.weekday() >= 5 or day in calendar:
        return "weekend_holiday"
    return "weekday"


def split_events(records: Iterable[AnswerRecord], calendar: frozenset = frozenset()) -> list[ViewingEvent]:
    events = []
    for r in records:
        if not r.watched:
            continue
        tod = derive_time_of_day(r.timestamp.time())
        dt = derive_day_type(r.timestamp.date(), calendar)
        for genre in sorted(r.genres, key=GENRE_INDEX.__getitem__):
            events.append(
                ViewingEvent(
                    source_answer_id=r.answer_id,
                    user_id=r.user_id,
                    timestamp=r.timestamp,
                    genre=genre,
                    companions=r.companions,
                    viewer_count=r.viewer_count,
                    services=r.services,
                    attention=r.attention,
                    time_of_day=tod,
                    day_type=dt,
                )
            )
    return events


def filter_min_answers(
    events: Iterable[ViewingEvent], records: Iterable[AnswerRecord], min_answers: int = 5
) -> list[ViewingEvent]:
    if min_answers < 1:
        raise ValueError("min_answers must be >= 1")
    counts = Counter(r.user_id for r in records)
    return [e for e in events if counts[e.user_id] >= min_answers]


@dataclass
class DatasetSummary:
    n_answers: int
    n_watched_answers: int
    n_unwatched_answers: int
    n_events: int
    n_post_split_rows: int
    n_users: int
    n_social_events: int
    n_workday_events: int
    per_day: list  # (date, enrolled, active, answers)
    q1_counts: dict
    genre_counts: dict
    time_of_day_counts: dict
    weekday_counts: dict

    def totals(self) -> dict:
        return {
            "answers": self.n_answers,
            "watched_answers": self.n_watched_answers,
            "unwatched_answers": self.n_unwatched_answers,
            "watched_events": self.n_events,
            # two readings of "total after splitting"
            "post_split_rows_incl_unwatched": self.n_post_split_rows,
            "post_split_watched_only": self.n_events,
            "users": self.n_users,
            "social_events": self.n_social_events,
            "workday_events": self.n_workday_events,
            "mean_active_per_day": (
                sum(d[2] for d in self.per_day) / len(self.per_day) if self.per_day else 0.0
            ),
        }


def dataset_summary(
    records: list[AnswerRecord], events: list[ViewingEvent], calendar: frozenset = frozenset()
) -> DatasetSummary:
    """Counts behind the activity and consumption overviews.

    Time-of-day and weekday counts are taken over post-split rows: each
    watched event plus each unwatched answer.
    """
    first_day = {}
    active = defaultdict(set)
    answers_per_day = Counter()
    for r in records:
        d = r.timestamp.date()
        first_day[r.user_id] = min(first_day.get(r.user_id, d), d)
        active[d].add(r.user_id)
        answers_per_day[d] += 1

    per_day = []
    if records:
        start = min(active)
        end = max(active)
        enrolled_by = Counter(first_day.values())
        enrolled = 0
        for offset in range((end - start).days + 1):
            d = date.fromordinal(start.toordinal() + offset)
            enrolled += enrolled_by[d]
            per_day.append((d, enrolled, len(active[d]), answers_per_day[d]))

    rows = [e.timestamp for e in events] + [r.timestamp for r in records if not r.watched]
    tod = Counter(derive_time_of_day(ts.time()) for ts in rows)
    wday = Counter(ts.strftime("%A").lower() for ts in rows)
    n_watched = sum(r.watched for r in records)
    return DatasetSummary(
        n_answers=len(records),
        n_watched_answers=n_watched,
        n_unwatched_answers=len(records) - n_watched,
        n_events=len(events),
        n_post_split_rows=len(rows),
        n_users=len(first_day),
        n_social_events=sum(e.social for e in events),
        n_workday_events=sum(e.day_type == "weekday" for e in events),
        per_day=per_day,
        q1_counts={"yes": n_watched, "no": len(records) - n_watched},
        genre_counts={g: sum(e.genre == g for e in events) for g in GENRES},
        time_of_day_counts={t: tod[t] for t in TIMES_OF_DAY},
        weekday_counts={
            d: wday[d]
            for d in ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
        },
    )


def user_ids(records: Iterable[AnswerRecord], profiles: Iterable[UserProfile] = ()) -> list[str]:
    """Sorted ids of enrolled users (profiles first, then anyone who answered)."""
    ids = {p.user_id for p in profiles} | {r.user_id for r in records}
    return sorted(ids)
