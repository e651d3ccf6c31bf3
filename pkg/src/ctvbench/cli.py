"""Command-line entry point: ``ctvbench {ingest,analyze,evaluate,compare,synth,report}``.

Exit codes: 0 success, 1 internal error, 2 user or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import CTVError, EmptyInput, MissingArtifacts, NoDisagreement
from .eval import METRICS, OofPredictions, nested_cv, plan_folds
from .features import UserIndex, dimension, preset
from .ingest import (
    Remap,
    dataset_summary,
    filter_min_answers,
    load_holidays,
    parse_answers,
    parse_profiles,
    split_events,
    user_ids,
    write_answers,
    write_profiles,
)
from .models import KINDS, default_spec
from .stats import analyze_all, genre_share, group_mean, mcnemar
from .synth import SynthSpec, calibrated_spec, generate, generate_profiles, planted_time_spec

log = logging.getLogger("ctvbench")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _load_records(args, errors=None):
    remap = None
    if getattr(args, "remap", None):
        remap = Remap.load(Path(args.remap).read_text())
    with open(args.answers, newline="") as fh:
        records = parse_answers(fh, remap, errors)
    calendar = frozenset()
    if getattr(args, "holidays", None):
        with open(args.holidays) as fh:
            calendar = load_holidays(fh)
    return records, calendar


def _load_profiles(args):
    if not getattr(args, "profiles", None):
        return []
    with open(args.profiles, newline="") as fh:
        return parse_profiles(fh)


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    errors = []
    records, calendar = _load_records(args, errors)
    profiles = _load_profiles(args)
    validation = {
        "status": "pass" if not errors else ("skipped" if args.lenient else "fail"),
        "errors": [{"row": e.row, "type": type(e).__name__, "message": str(e)} for e in errors],
    }
    _write_json(out / "validation.json", validation)
    if errors and not args.lenient:
        for e in errors[:20]:
            print(f"error: {e}", file=sys.stderr)
        return 2

    events = split_events(records, calendar)
    summary = dataset_summary(records, events, calendar)
    totals = summary.totals()
    totals["profiles"] = len(profiles)
    totals["skipped_rows"] = len(errors)
    totals["version"] = __version__
    _write_json(out / "summary.json", totals)
    _write_csv(out / "per_day.csv", ["date", "enrolled", "active", "answers"], summary.per_day)
    _write_csv(out / "q1_counts.csv", ["q1", "count"], summary.q1_counts.items())
    _write_csv(out / "genre_counts.csv", ["genre", "count"], summary.genre_counts.items())
    _write_csv(out / "time_of_day_counts.csv", ["time_of_day", "count"], summary.time_of_day_counts.items())
    _write_csv(out / "weekday_counts.csv", ["weekday", "count"], summary.weekday_counts.items())
    print(json.dumps(totals, indent=2))
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, calendar = _load_records(args)
    events = split_events(records, calendar)
    if not events:
        raise EmptyInput("no watched events to analyze")

    tables, results = analyze_all(events)
    for t in tables:
        _write_csv(
            out / f"contingency_{t.dimension}.csv",
            ["genre", *map(str, t.col_labels)],
            [[g, *row] for g, row in zip(t.row_labels, t.counts.tolist())],
        )
    docs = []
    for r in results:
        d = r.as_dict()
        d["multi_select"] = r.dimension in ("companions", "service")
        docs.append(d)
    _write_json(out / "associations.json", docs)

    def summary_rows(groups):
        return [["/".join(map(str, g.key)), g.count, g.mean, g.std] for g in groups]

    _write_csv(out / "attention_by_genre.csv", ["genre", "count", "mean", "std"], summary_rows(group_mean(events, "genre", "attention")))
    _write_csv(out / "viewers_by_genre.csv", ["genre", "count", "mean", "std"], summary_rows(group_mean(events, "genre", "viewer_count")))
    _write_csv(
        out / "attention_by_context.csv",
        ["context", "count", "mean", "std"],
        summary_rows(group_mean(events, "context", "attention")),
    )
    for name, partition in (("time_share.csv", "time"), ("genre_share.csv", "context")):
        _write_csv(
            out / name,
            ["social", "day_type", "level", "count", "share"],
            [[*g.key, g.count, g.share] for g in genre_share(events, partition)],
        )
    for d in docs:
        print(f"{d['dimension']:>13}: chi2({d['df']})={d['chi2']:.2f} p={d['p']:.3g} V={d['v']:.3f} valid={d['valid']}")
    return 0


def cmd_evaluate(args) -> int:
    configs = [preset(c) for c in (args.config or ["all"])]
    kinds = args.model or list(KINDS)
    for k in kinds:
        if k not in KINDS:
            raise CTVError(f"unknown model kind {k!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    records, calendar = _load_records(args)
    users = UserIndex.build(user_ids(records, _load_profiles(args)))
    events = filter_min_answers(split_events(records, calendar), records, args.min_answers)
    groups = [e.source_answer_id for e in events] if args.group_splits else None
    plan = plan_folds(len(events), 5, 3, args.seed, groups)

    rows = []
    for cfg in configs:
        for kind in kinds:
            fixed = {"stages": args.gbdt_stages} if kind == "gbdt" and args.gbdt_stages is not None else {}
            spec = default_spec(kind, args.seed, **fixed)
            log.info("evaluating %s / %s (width %d, %d events)", cfg.label, kind, dimension(cfg, users), len(events))
            report, oof = nested_cv(events, cfg, spec, plan, users, workers=args.workers)
            _write_json(out / f"report_{cfg.label}_{kind}.json", report.to_dict())
            with open(out / f"oof_{cfg.label}_{kind}.csv", "w", newline="") as fh:
                oof.write_csv(fh)
            for m in METRICS:
                rows.append([cfg.label, kind, m, report.mean[m], report.std[m], *[f[m] for f in report.folds]])
            print(
                f"{cfg.label:>6} {kind:>8}: "
                + " ".join(f"{m}={report.mean[m]:.3f}({report.std[m]:.3f})" for m in METRICS)
            )
    _write_csv(out / "metrics.csv", ["config", "model", "metric", "mean", "std", *[f"fold{i}" for i in range(1, 6)]], rows)
    return 0


def cmd_compare(args) -> int:
    with open(args.oof_a, newline="") as fh:
        a = OofPredictions.read_csv(fh)
    with open(args.oof_b, newline="") as fh:
        b = a.aligned_with(OofPredictions.read_csv(fh))
    try:
        doc = {"status": "ok", **mcnemar(a.top1_correct(), b.top1_correct()).as_dict()}
    except NoDisagreement:
        doc = {"status": "no_disagreement", "chi2": None, "p": None, "v": None}
    doc.update({"a": str(args.oof_a), "b": str(args.oof_b), "n": len(a)})
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text()))
    elif args.preset == "planted-time":
        spec = planted_time_spec(args.strength)
    elif args.preset == "calibrated":
        spec = calibrated_spec()
    else:
        spec = SynthSpec()
    if args.seed is not None:
        spec.seed = args.seed
    spec.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "answers.csv", "w", newline="") as fh:
        write_answers(generate(spec), fh)
    with open(out / "profiles.csv", "w", newline="") as fh:
        write_profiles(generate_profiles(spec), fh)
    (out / "holidays.txt").write_text("".join(f"{h}\n" for h in spec.holidays))
    _write_json(out / "manifest.json", {"seed": spec.seed, "version": __version__, "spec": json.loads(spec.to_json())})
    print(f"wrote synthetic logs to {out} (seed {spec.seed})")
    return 0


def _md_table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def build_report(run: Path) -> str:
    summary = run / "summary.json"
    assoc = run / "associations.json"
    metrics = run / "metrics.csv"
    if not (summary.exists() or assoc.exists() or metrics.exists()):
        raise MissingArtifacts(f"{run} holds no ingest, analyze or evaluate outputs")

    lines = ["# Contextual TV benchmark report", "", f"Run directory: `{run}`", ""]
    if summary.exists():
        totals = json.loads(summary.read_text())
        lines += ["## Dataset", ""]
        lines += _md_table(["quantity", "value"], [[k, v] for k, v in totals.items()])
        lines.append("")
    if assoc.exists():
        lines += ["## Genre-context associations", ""]
        rows = [
            [d["dimension"], d["df"], f"{d['chi2']:.2f}", f"{d['p']:.3g}", f"{d['v']:.3f}", d["n"], d["valid"]]
            for d in json.loads(assoc.read_text())
        ]
        lines += _md_table(["dimension", "df", "chi2", "p", "V", "n", "valid"], rows)
        lines += ["", "Companions and service are multi-select: each selected option counts once, so n exceeds the event count.", ""]
    if metrics.exists():
        with open(metrics, newline="") as fh:
            table = list(csv.DictReader(fh))
        lines += ["## Prediction results (mean (std) over 5 outer folds)", ""]
        cells = {}
        for r in table:
            cells.setdefault((r["config"], r["model"]), {})[r["metric"]] = f"{float(r['mean']):.3f} ({float(r['std']):.3f})"
        lines += _md_table(
            ["config", "model", "A@1", "A@3", "F1 (macro)", "MRR"],
            [[c, m, *[v.get(k, "") for k in METRICS]] for (c, m), v in cells.items()],
        )
        lines.append("")
        reports = sorted(run.glob("report_*.json"))
        if reports:
            lines += ["## Run settings", ""]
            for path in reports:
                doc = json.loads(path.read_text())
                chosen = [f["chosen_hp"] for f in doc["folds"]]
                lines.append(
                    f"- `{doc['config']}` / `{doc['model']}`: seeds {doc['seeds']}, grid {doc['spec']['hp_name']}="
                    f"{doc['spec']['grid']}, chosen per fold {chosen}"
                )
            lines += ["", f"Fold policy: {json.loads(reports[0].read_text())['fold_policy']}.", ""]
    csvs = sorted(p.name for p in run.glob("*.csv"))
    if csvs:
        lines += ["## Plot-ready tables", ""] + [f"- [{name}]({name})" for name in csvs] + [""]
    return "\n".join(lines)


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    if not run.is_dir():
        raise MissingArtifacts(f"{run} is not a directory")
    text = build_report(run)
    target = Path(args.out) if args.out else run / "report.md"
    target.write_text(text)
    print(f"wrote {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctvbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p, profiles=False):
        p.add_argument("--answers", required=True)
        p.add_argument("--holidays")
        p.add_argument("--remap")
        if profiles:
            p.add_argument("--profiles")

    p = sub.add_parser("ingest", help="validate and summarize an answers file")
    inputs(p, profiles=True)
    p.add_argument("--out", default="out")
    p.add_argument("--lenient", action="store_true", help="skip bad rows instead of failing")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="chi-square associations and descriptive summaries")
    inputs(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", help="nested cross-validation over configs and models")
    inputs(p, profiles=True)
    p.add_argument("--config", action="append", help="feature configuration (repeatable)")
    p.add_argument("--model", action="append", help=f"one of {', '.join(KINDS)} (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--min-answers", type=int, default=5)
    p.add_argument("--group-splits", action="store_true", help="keep events of one answer in one fold")
    p.add_argument("--gbdt-stages", type=int, default=None, help="override the 1000 boosting stages")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="McNemar test between two out-of-fold prediction files")
    p.add_argument("oof_a")
    p.add_argument("oof_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate synthetic answer and profile files")
    p.add_argument("--spec", help="SynthSpec JSON file")
    p.add_argument("--preset", choices=["default", "planted-time", "calibrated"], default="default")
    p.add_argument("--strength", type=float, default=1.0, help="planted-time dependency strength")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="collect a run directory into one markdown report")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CTVError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
