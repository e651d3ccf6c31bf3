import io
from datetime import datetime

import pytest
from hypothesis import strategies as st

from ctvbench.ingest import (
    ANSWER_COLUMNS,
    COMPANIONS,
    GENRES,
    SERVICES,
    AnswerRecord,
    derive_day_type,
    derive_time_of_day,
    ViewingEvent,
)


def answers_csv(*rows: str) -> io.StringIO:
    return io.StringIO(",".join(ANSWER_COLUMNS) + "\n" + "\n".join(rows) + "\n")


def make_event(
    user="u1",
    genre="series",
    companions=("alone",),
    viewers=1,
    services=("netflix",),
    attention=3,
    when=datetime(2017, 3, 8, 20, 15),
    answer_id="a1",
):
    return ViewingEvent(
        source_answer_id=answer_id,
        user_id=user,
        timestamp=when,
        genre=genre,
        companions=frozenset(companions),
        viewer_count=viewers,
        services=frozenset(services),
        attention=attention,
        time_of_day=derive_time_of_day(when.time()),
        day_type=derive_day_type(when.date()),
    )


timestamps = st.datetimes(min_value=datetime(2017, 1, 1), max_value=datetime(2018, 12, 31)).map(
    lambda d: d.replace(microsecond=0)
)


@st.composite
def answer_records(draw, answer_id=None, user_id=None):
    aid = answer_id or draw(st.from_regex(r"a[0-9]{1,4}", fullmatch=True))
    uid = user_id or draw(st.sampled_from(["u1", "u2", "u3", "u4"]))
    ts = draw(timestamps)
    if not draw(st.booleans()):
        return AnswerRecord(aid, uid, ts, False)
    alone = draw(st.booleans())
    if alone:
        companions, viewers = frozenset({"alone"}), 1
    else:
        companions = frozenset(draw(st.sets(st.sampled_from(COMPANIONS[1:]), min_size=1)))
        viewers = draw(st.integers(2, 5))
    return AnswerRecord(
        aid,
        uid,
        ts,
        True,
        companions=companions,
        viewer_count=viewers,
        genres=frozenset(draw(st.sets(st.sampled_from(GENRES), min_size=1))),
        services=frozenset(draw(st.sets(st.sampled_from(SERVICES), min_size=1))),
        attention=draw(st.integers(1, 5)),
    )


@st.composite
def record_lists(draw, max_size=30):
    n = draw(st.integers(0, max_size))
    return [draw(answer_records(answer_id=f"a{i}")) for i in range(n)]


@pytest.fixture
def small_records():
    from ctvbench.ingest import parse_answers

    return parse_answers(
        answers_csv(
            "a1,u7,2017-03-08T20:15:00,yes,partner|friend,3,series,netflix,4",
            "a2,u7,2017-03-08T08:01:00,no,,,,,",
            "a3,u7,2017-03-11T12:00:00,yes,alone,,series|news,drtv,2",
        )
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(module.RESULTS):
        terminalreporter.write_line(f"[{number:>2}] {status:<4} {title}: {detail}")
