"""Command-line frontend: ``scholarrank <subcommand> [options]``.

Exit codes: 0 success, 1 validation/data errors, 2 usage errors.
All outputs are deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import compare as cmp
from .errors import ScholarRankError
from .harvest import FetchPolicy, FixtureStore, HttpPageSource, MonotonicClock, harvest_snapshot
from .metrics import (
    build_national_distribution,
    compute_metric_table,
    cumulative_thresholds,
    parse_metrics,
    percentile_threshold,
    serialize_metrics,
)
from .model import (
    PUBLISHED_MODEL,
    build_ensemble,
    model_from_json,
    model_to_json,
    parse_ensemble_config,
    parse_ranking,
    rank_programs,
    score_programs,
    serialize_ranking,
)
from .roster import (
    ScoreSource,
    load_snapshot,
    match_faculty,
    parse_roster,
    parse_score_table,
    save_snapshot,
)

logger = logging.getLogger("scholarrank")

REPORT_PERCENTILES = (10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 98, 99)


class CliError(Exception):
    """Input problem reported with exit code 1."""


def _path(value: str) -> Path:
    path = Path(value)
    if not path.exists():
        raise CliError(f"{value}: no such file or directory")
    return path


def _load(path: Path, loader, *args):
    try:
        if path.is_dir():
            return loader(path, *args)
        return loader(path.read_bytes(), *args)
    except ScholarRankError as exc:
        raise CliError(f"{path}: {exc}") from exc
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"{path}: {exc}") from exc


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, data: bytes | str) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _scores(path: Path, source: ScoreSource):
    return _load(path, parse_score_table, source)


# --- subcommands ----------------------------------------------------------

def cmd_ingest(args) -> str:
    collected = dt.date.fromisoformat(args.collected_at) if args.collected_at else None
    snap = _load(_path(args.roster), parse_roster, args.label, collected)
    path = save_snapshot(snap, _out(args))
    return f"ingested {len(snap.faculty)} faculty in {len(snap.departments)} departments -> {path}"


def cmd_harvest(args) -> str:
    snap = _load(_path(args.snapshot), load_snapshot)
    if args.live:
        if not args.policy:
            raise CliError("--live requires --policy <json>")
        conf = json.loads(_path(args.policy).read_text(encoding="utf-8"))
        policy = FetchPolicy(
            float(conf.get("min_interval", 3.0)),
            float(conf.get("per_faculty_budget", 300.0)),
            conf.get("user_agent", FetchPolicy().user_agent),
        )
        source = HttpPageSource(conf["profile_url"], conf["search_url"], policy)
        clock = MonotonicClock()
    else:
        if not args.fixtures:
            raise CliError("harvest needs --fixtures <dir> (or --live --policy <json>)")
        policy = FetchPolicy(args.min_interval, args.budget)
        source = FixtureStore(_path(args.fixtures))
        clock = None
    collected_at = dt.date.fromisoformat(args.collected_at) if args.collected_at else snap.collected_at
    try:
        updated, log = harvest_snapshot(snap, source, policy, clock, collected_at,
                                        only_missing=not args.all)
    except ScholarRankError as exc:
        raise CliError(f"{args.snapshot}: {exc}") from exc
    out = _out(args)
    path = save_snapshot(updated, out)
    rows = ["faculty_id,status,t10,detail"]
    for r in log.collected:
        rows.append(f"{r.faculty_id},{r.method.value},{r.t10},{r.profile_id or ''}")
    for a in log.aborted:
        rows.append(f"{a.faculty_id},aborted,,{a.reason}")
    for e in log.ambiguous:
        rows.append(f"{e.faculty_id},ambiguous,,{' '.join(e.candidates)}")
    _write(path / "harvest_log.csv", "\n".join(rows) + "\n")
    return (f"harvested {len(log.collected)} t10 values, {len(log.aborted)} aborted, "
            f"{len(log.ambiguous)} ambiguous -> {path}")


def cmd_metrics(args) -> str:
    snap = _load(_path(args.snapshot), load_snapshot)
    try:
        d = build_national_distribution(snap)
        table = compute_metric_table(snap, d)
    except ScholarRankError as exc:
        raise CliError(f"{args.snapshot}: {exc}") from exc
    out = _out(args)
    _write(out / "metrics.csv", serialize_metrics(table))
    thresholds = cumulative_thresholds(d)
    _write(out / "thresholds.csv",
           "level,t10\n" + "".join(f"{n},{t}\n" for n, t in thresholds.items()))
    degenerate = sum(1 for v in table if v.degenerate)
    return (f"computed metrics for {len(table)} departments from {d.n} senior t10 values"
            f" ({degenerate} degenerate) -> {out / 'metrics.csv'}")


def cmd_fit(args) -> str:
    metrics = _load(_path(args.metrics), parse_metrics)
    usn = _scores(_path(args.usn), ScoreSource.USN)
    try:
        config = parse_ensemble_config(args.ensemble)
        model = build_ensemble(metrics, usn, config)
    except ScholarRankError as exc:
        raise CliError(str(exc)) from exc
    out = _out(args)
    _write(out / "model.json", model_to_json(model))
    coefs = ", ".join(f"{k}={v:.6g}" for k, v in sorted(model.coefficients.items()))
    return f"fitted {len(model.members)}-member ensemble: {coefs} -> {out / 'model.json'}"


def _model(choice: str):
    if choice == "published":
        return PUBLISHED_MODEL
    return _load(_path(choice), lambda data: model_from_json(data.decode("utf-8")))


def cmd_score(args) -> str:
    model = _model(args.model)
    metrics = _load(_path(args.metrics), parse_metrics)
    try:
        ranking = rank_programs(score_programs(model, metrics))
    except ScholarRankError as exc:
        raise CliError(f"{args.metrics}: {exc}") from exc
    out = _out(args)
    _write(out / "scores.csv", serialize_ranking(ranking))
    return f"scored {len(ranking)} programs -> {out / 'scores.csv'}"


def cmd_rank(args) -> str:
    table = _scores(_path(args.scores), ScoreSource(args.source))
    try:
        ranking = rank_programs(table)
    except ScholarRankError as exc:
        raise CliError(f"{args.scores}: {exc}") from exc
    out = _out(args)
    _write(out / "ranking.csv", serialize_ranking(ranking))
    return f"ranked {len(ranking)} programs -> {out / 'ranking.csv'}"


def cmd_compare(args) -> str:
    have_pair = args.a and args.b
    have_csr = args.scholar and args.usn and args.csrankings
    if not (have_pair or have_csr):
        raise CliError("compare needs --a/--b rankings and/or --scholar/--usn/--csrankings")
    out = _out(args)
    report = {}
    correlations = {}
    messages = []
    try:
        if have_pair:
            a = _load(_path(args.a), parse_ranking)
            b = _load(_path(args.b), parse_ranking)
            boxes = cmp.rank_difference_report(a, b, args.group_size)
            hist = cmp.score_delta_histogram(a, b, args.bin_width)
            _, xs, ys = cmp._paired(a.scores(), b.scores())
            correlations["a_vs_b"] = cmp.correlation_triple(xs, ys)
            _write(out / "boxplot.csv", cmp.boxplot_csv(boxes))
            _write(out / "hist.csv", cmp.histogram_csv(hist))
            report["rank_difference"] = [asdict(b) for b in boxes]
            report["score_delta_histogram"] = {repr(k): v for k, v in hist.items()}
            messages.append(f"{len(boxes)} rank-difference groups, {len(hist)} histogram bins")
        if have_csr:
            scholar = _load(_path(args.scholar), parse_ranking)
            usn = _scores(_path(args.usn), ScoreSource.USN)
            csr = _scores(_path(args.csrankings), ScoreSource.CSRANKINGS)
            result = cmp.csrankings_comparison(scholar, csr, usn)
            correlations.update(result.correlations)
            _write(out / "average.csv", serialize_ranking(rank_programs(result.average)))
            messages.append(f"CSRankings comparison over {len(result.average)} programs")
    except ScholarRankError as exc:
        raise CliError(str(exc)) from exc
    _write(out / "correlations.csv", cmp.correlations_csv(correlations))
    report["correlations"] = {k: {**asdict(t), "pearson_squared": t.pearson_squared}
                              for k, t in correlations.items()}
    _write(out / "compare.json", _json(report))
    return "compared: " + "; ".join(messages) + f" -> {out}"


def cmd_cohort(args) -> str:
    a = _load(_path(args.snapshot_a), load_snapshot)
    b = _load(_path(args.snapshot_b), load_snapshot)
    ranks = _load(_path(args.ranks_a), parse_ranking) if args.ranks_a else None
    identity = match_faculty(a, b)
    report = cmp.snapshot_cohort_report(a, b, identity, ranks)
    out = _out(args)
    _write(out / "cohort.csv", cmp.cohort_csv(report, a, b))
    doc = {"stats": report.stats, "ambiguous": [list(x) for x in identity.ambiguous]}
    _write(out / "cohort.json", _json(doc))
    s = report.stats
    return (f"cohorts: {s['continuing']} continuing, {s['movers']} movers, {s['new']} new, "
            f"{s['departed']} departed -> {out / 'cohort.csv'}")


def cmd_bias(args) -> str:
    snap = _load(_path(args.snapshot), load_snapshot)
    try:
        d = build_national_distribution(snap)
        report = cmp.profile_bias_report(snap, d)
    except ScholarRankError as exc:
        raise CliError(f"{args.snapshot}: {exc}") from exc
    out = _out(args)
    _write(out / "bias.csv", cmp.bias_csv(report))
    _write(out / "bias.json", _json({
        "median_with_profile": report.median_with,
        "median_without_profile": report.median_without,
        "deciles": [list(x) for x in report.deciles],
    }))
    return (f"profile bias: median t10 {report.median_with} with profile, "
            f"{report.median_without} without -> {out / 'bias.csv'}")


def cmd_export(args) -> str:
    snap = _load(_path(args.snapshot), load_snapshot)
    usn = _scores(_path(args.usn), ScoreSource.USN) if args.usn else None
    model = _model(args.model)
    try:
        d = build_national_distribution(snap)
        table = compute_metric_table(snap, d)
        ranking = rank_programs(score_programs(model, table))
        sizes = cmp.dept_size_stats(snap, usn)
        bias = cmp.profile_bias_report(snap, d)
        fit = cmp._triple_on(ranking.scores(), dict(usn.entries)) if usn else None
    except ScholarRankError as exc:
        raise CliError(f"{args.snapshot}: {exc}") from exc
    out = _out(args)
    doc = {
        "snapshot": snap.label,
        "collected_at": snap.collected_at.isoformat() if snap.collected_at else None,
        "faculty": len(snap.faculty),
        "departments": len(snap.departments),
        "senior_with_t10": d.n,
        "t10_percentiles": {str(q): percentile_threshold(d, q) for q in REPORT_PERCENTILES},
        "department_size": asdict(sizes),
        "profile_bias": {"median_with": bias.median_with, "median_without": bias.median_without},
        "model": json.loads(model_to_json(model)),
        "ranking": [asdict(r) for r in ranking.rows],
        "usn_correlation": ({**asdict(fit), "pearson_squared": fit.pearson_squared}
                            if fit else None),
    }
    _write(out / "report.json", _json(doc))
    _write(out / "metrics.csv", serialize_metrics(table))
    _write(out / "scores.csv", serialize_ranking(ranking))
    _write(out / "dept_sizes.csv", cmp._csv(
        ((dep.university, dep.size) for dep in sorted(snap.departments, key=lambda x: x.university)),
        ("university", "size"),
    ))
    return f"exported report for snapshot {snap.label} ({len(table)} departments) -> {out}"


def cmd_synth(args) -> str:
    from .synthetic import write_dataset

    paths = write_dataset(_out(args), seed=args.seed)
    return f"wrote synthetic dataset (seed {args.seed}, {len(paths)} entries) -> {args.out}"


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scholarrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", required=True, help="output directory")
        return p

    p = add("ingest", cmd_ingest, "validate a roster CSV into a snapshot directory")
    p.add_argument("--roster", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--collected-at", help="YYYY-MM-DD")

    p = add("harvest", cmd_harvest, "fill missing t10 from a scholar-page fixture store")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--fixtures")
    p.add_argument("--min-interval", type=float, default=3.0)
    p.add_argument("--budget", type=float, default=300.0, help="per-faculty budget in seconds")
    p.add_argument("--collected-at")
    p.add_argument("--all", action="store_true", help="re-harvest faculty that already have t10")
    p.add_argument("--live", action="store_true", help="fetch over HTTP (best effort)")
    p.add_argument("--policy", help="JSON with min_interval, per_faculty_budget, URL templates")

    p = add("metrics", cmd_metrics, "compute department metrics for a snapshot")
    p.add_argument("--snapshot", required=True)

    p = add("fit", cmd_fit, "fit the fixed-intercept regression ensemble")
    p.add_argument("--metrics", required=True)
    p.add_argument("--usn", required=True)
    p.add_argument("--ensemble", default="default",
                   help="pairs like m10:40,g10:60, or 'default' / 'full'")

    p = add("score", cmd_score, "score and rank departments with a model")
    p.add_argument("--model", default="published", help="'published' or a model JSON file")
    p.add_argument("--metrics", required=True)

    p = add("rank", cmd_rank, "competition-rank any university,score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--source", default="scholar", choices=[s.value for s in ScoreSource])

    p = add("compare", cmd_compare, "ranking differences, score deltas, correlations")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--group-size", type=int, default=30)
    p.add_argument("--bin-width", type=float, default=0.1)
    p.add_argument("--scholar")
    p.add_argument("--usn")
    p.add_argument("--csrankings")

    p = add("cohort", cmd_cohort, "classify faculty across two snapshots")
    p.add_argument("--snapshot-a", required=True)
    p.add_argument("--snapshot-b", required=True)
    p.add_argument("--ranks-a")

    p = add("bias", cmd_bias, "scholar-profile bias by t10 decile")
    p.add_argument("--snapshot", required=True)

    p = add("export", cmd_export, "full JSON report for one snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--usn")
    p.add_argument("--model", default="published")

    p = add("synth", cmd_synth, "write the seeded synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ScholarRankError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
