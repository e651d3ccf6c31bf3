import json

import pytest

from ctvbench.cli import main
from ctvbench.synth import planted_time_spec


@pytest.fixture
def synth_dir(tmp_path):
    spec = planted_time_spec(0.8, users=12, answers_per_user=30, seed=2)
    path = tmp_path / "spec.json"
    path.write_text(spec.to_json())
    out = tmp_path / "data"
    assert main(["synth", "--spec", str(path), "--out", str(out)]) == 0
    return out


def test_synth_writes_manifest(synth_dir):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert manifest["seed"] == 2 and "version" in manifest
    assert (synth_dir / "profiles.csv").exists()


def test_synth_is_byte_stable(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--seed", "5", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "answers.csv").read_bytes() == (tmp_path / "b" / "answers.csv").read_bytes()


def test_ingest_valid(synth_dir, tmp_path):
    out = tmp_path / "ingest"
    code = main(["ingest", "--answers", str(synth_dir / "answers.csv"), "--profiles", str(synth_dir / "profiles.csv"), "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["profiles"] == 12 and summary["answers"] > 0
    assert json.loads((out / "validation.json").read_text())["status"] == "pass"
    for name in ("per_day.csv", "genre_counts.csv", "time_of_day_counts.csv"):
        assert (out / name).exists()


def bad_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "answer_id,user_id,timestamp,q1,q2,q3,q4,q5,q6\n"
        "a1,u1,2017-03-08T20:00:00,yes,alone,,movie,netflix,3\n"
        "a2,u1,2017-03-08T21:00:00,yes,alone,,opera,netflix,3\n"
    )
    return path


def test_ingest_strict_fails_with_row(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["ingest", "--answers", str(bad_file(tmp_path)), "--out", str(out)]) == 2
    assert "row 3" in capsys.readouterr().err
    validation = json.loads((out / "validation.json").read_text())
    assert validation["status"] == "fail" and validation["errors"][0]["row"] == 3


def test_ingest_lenient_skips(tmp_path):
    out = tmp_path / "out"
    assert main(["ingest", "--answers", str(bad_file(tmp_path)), "--out", str(out), "--lenient"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["answers"] == 1 and summary["skipped_rows"] == 1


def test_missing_file_is_user_error(tmp_path):
    assert main(["ingest", "--answers", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_analyze(synth_dir, tmp_path):
    out = tmp_path / "an"
    assert main(["analyze", "--answers", str(synth_dir / "answers.csv"), "--out", str(out)]) == 0
    docs = json.loads((out / "associations.json").read_text())
    assert len(docs) == 6
    tod = next(d for d in docs if d["dimension"] == "time_of_day")
    assert tod["p"] < 1e-3
    assert (out / "contingency_companions.csv").exists()
    assert (out / "genre_share.csv").exists()


def test_analyze_without_watched_events(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("answer_id,user_id,timestamp,q1,q2,q3,q4,q5,q6\na1,u1,2017-03-08T08:00:00,no,,,,,\n")
    assert main(["analyze", "--answers", str(path), "--out", str(tmp_path / "o")]) == 2


def test_unknown_config(synth_dir, tmp_path):
    args = ["evaluate", "--answers", str(synth_dir / "answers.csv"), "--config", "XYZ", "--out", str(tmp_path)]
    assert main(args) == 2


def test_evaluate_compare_report(synth_dir, tmp_path):
    out = tmp_path / "run"
    args = ["evaluate", "--answers", str(synth_dir / "answers.csv"), "--profiles", str(synth_dir / "profiles.csv")]
    args += ["--config", "TD", "--model", "toppop", "--model", "softmax", "--out", str(out)]
    assert main(args) == 0
    report = json.loads((out / "report_TD_softmax.json").read_text())
    assert len(report["folds"]) == 5 and report["version"]
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert header == "config,model,metric,mean,std,fold1,fold2,fold3,fold4,fold5"

    cmp = tmp_path / "cmp.json"
    assert main(["compare", str(out / "oof_TD_toppop.csv"), str(out / "oof_TD_softmax.csv"), "--out", str(cmp)]) == 0
    doc = json.loads(cmp.read_text())
    assert doc["status"] == "ok" and doc["df"] == 1

    assert main(["compare", str(out / "oof_TD_toppop.csv"), str(out / "oof_TD_toppop.csv")]) == 0

    assert main(["analyze", "--answers", str(synth_dir / "answers.csv"), "--out", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    text = (out / "report.md").read_text()
    assert "Genre-context associations" in text and "| TD | softmax |" in text


def test_compare_self_reports_no_disagreement(synth_dir, tmp_path, capsys):
    out = tmp_path / "run"
    main(["evaluate", "--answers", str(synth_dir / "answers.csv"), "--config", "TD", "--model", "toppop", "--out", str(out)])
    capsys.readouterr()
    oof = str(out / "oof_TD_toppop.csv")
    assert main(["compare", oof, oof]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "no_disagreement"


def test_compare_mismatched_ids(tmp_path):
    header = "event_id,true_genre," + ",".join(f"rank{i}" for i in range(1, 11)) + "\n"
    ranks = ",".join(["news", "sport", "movie", "series", "music", "documentary", "entertainment", "childrens", "user_generated", "other"])
    (tmp_path / "a.csv").write_text(header + f"x#news,news,{ranks}\n")
    (tmp_path / "b.csv").write_text(header + f"y#news,news,{ranks}\n")
    assert main(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 2


def test_report_partial_and_empty(synth_dir, tmp_path):
    out = tmp_path / "an"
    main(["analyze", "--answers", str(synth_dir / "answers.csv"), "--out", str(out)])
    assert main(["report", str(out)]) == 0
    text = (out / "report.md").read_text()
    assert "associations" in text and "Prediction results" not in text
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == 2


def test_invalid_synth_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"watched_prob": 2}))
    assert main(["synth", "--spec", str(path), "--out", str(tmp_path / "o")]) == 2


def test_reruns_are_identical(synth_dir, tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        main(["analyze", "--answers", str(synth_dir / "answers.csv"), "--out", str(out)])
        outs.append(sorted((p.name, p.read_bytes()) for p in out.iterdir()))
    assert outs[0] == outs[1]
