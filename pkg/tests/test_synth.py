import io
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctvbench.errors import InvalidSpec
from ctvbench.eval import accuracy_at_k, OofPredictions
from ctvbench.ingest import GENRE_INDEX, GENRES, answers_to_csv, parse_answers, split_events
from ctvbench.models import fit_toppop
from ctvbench.stats import chi_square_test, contingency
from ctvbench.synth import SynthSpec, generate, generate_profiles, plant_series_share, planted_time_spec


def test_defaults_are_valid():
    spec = SynthSpec().validate()
    assert spec.users == 118
    assert spec.genre_marginal[GENRE_INDEX["series"]] == 0.25
    assert spec.social_prob == 0.57


def test_nothing_watched():
    records = generate(SynthSpec(users=5, answers_per_user=10, watched_prob=0.0))
    assert records and not any(r.watched for r in records)


@pytest.mark.parametrize(
    "change",
    [
        {"genre_marginal": [0.5] * 10},
        {"watched_prob": 1.5},
        {"time_of_day_marginal": [0.2] * 4},
        {"answers_dist": "uniform"},
        {"start_date": "March 6"},
        {"genre_given_time": [[0.1] * 10] * 4},
    ],
)
def test_invalid_specs(change):
    with pytest.raises(InvalidSpec):
        replace(SynthSpec(), **change).validate()


def test_unknown_keys_rejected():
    with pytest.raises(InvalidSpec):
        SynthSpec.from_dict({"userz": 3})


def test_json_round_trip():
    spec = planted_time_spec(0.5, users=7)
    assert SynthSpec.from_dict(json.loads(spec.to_json())) == spec


def test_series_share_on_uniform_base():
    spec = plant_series_share(replace(SynthSpec(), genre_marginal=[0.1] * 10))
    m = np.array(spec.genre_marginal)
    assert m[GENRE_INDEX["series"]] == 0.25
    others = np.delete(m, GENRE_INDEX["series"])
    assert np.allclose(others, 0.75 / 9)
    spec.validate()


@pytest.mark.parametrize("share", [0.0, 1.0, 1.2])
def test_series_share_open_interval(share):
    with pytest.raises(InvalidSpec):
        plant_series_share(SynthSpec(), share)


def test_series_share_makes_series_top():
    spec = plant_series_share(replace(SynthSpec(), users=60, multi_genre_prob=0.0, watched_prob=1.0, seed=3))
    events = split_events(generate(spec))
    y = np.array([GENRE_INDEX[e.genre] for e in events])
    model = fit_toppop(y)
    order, _ = model.rank_batch(np.zeros((len(y), 1)))
    assert order[0, 0] == GENRE_INDEX["series"]
    a1 = accuracy_at_k(OofPredictions(tuple(range(len(y))), y, order), 1)
    assert a1 == pytest.approx(0.25, abs=0.02)


def test_same_seed_same_bytes():
    spec = SynthSpec(users=10, seed=11)
    assert answers_to_csv(generate(spec)) == answers_to_csv(generate(spec))
    assert answers_to_csv(generate(spec)) != answers_to_csv(generate(replace(spec, seed=12)))


def test_answers_are_keyed_by_user_and_index():
    # dropping users must not change the answers of the remaining ones
    small = generate(SynthSpec(users=3, seed=4))
    big = generate(SynthSpec(users=6, seed=4))
    assert big[: len(small)] == small


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.floats(0, 1))
def test_output_round_trips_through_ingest(seed, watched, multi):
    spec = SynthSpec(users=4, answers_per_user=12, seed=seed, watched_prob=watched, multi_genre_prob=multi)
    records = generate(spec)
    errors = []
    assert parse_answers(io.StringIO(answers_to_csv(records)), errors=errors) == records
    assert errors == []
    for r in records:
        if r.watched and "alone" in r.companions:
            assert r.viewer_count == 1


def test_genre_frequencies_match_marginal():
    spec = SynthSpec(users=500, answers_per_user=100, answers_dist="fixed", watched_prob=1.0, multi_genre_prob=0.0, seed=1)
    events = split_events(generate(spec))
    n = len(events)
    assert n == 50_000
    counts = np.bincount([GENRE_INDEX[e.genre] for e in events], minlength=len(GENRES))
    p = np.array(spec.genre_marginal)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)


def test_deterministic_time_plant():
    spec = planted_time_spec(1.0, users=40, watched_prob=1.0, multi_genre_prob=0.0)
    events = split_events(generate(spec))
    for e in events:
        assert GENRES.index(e.genre) == ["morning", "noon", "afternoon", "evening", "night"].index(e.time_of_day)
    res = chi_square_test(contingency(events, "time_of_day").drop_empty())
    assert res.v == pytest.approx(1.0) and res.p < 1e-9


def test_profiles():
    profiles = generate_profiles(SynthSpec(users=9))
    assert [p.user_id for p in profiles] == [f"u{i:04d}" for i in range(9)]
    assert all(p.favorite_genres for p in profiles)
