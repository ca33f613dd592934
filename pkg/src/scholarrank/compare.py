"""Ranking-comparison statistics and the reports built from them."""

from __future__ import annotations

import csv
import io
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CoverageError,
    DegenerateInput,
    EmptyDistribution,
    InsufficientData,
    RangeError,
    ShapeError,
)
from .metrics import NationalDistribution, percentile_of
from .model import RankingTable
from .roster import FacultyRecord, MatchResult, ScoreSource, ScoreTable, Snapshot

# --- correlation ----------------------------------------------------------


def _check_pair(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) != len(y):
        raise ShapeError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ShapeError(f"need at least 2 observations, got {len(x)}")


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    _check_pair(x, y)
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def r_squared(pred: Sequence[float], actual: Sequence[float]) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot (not squared Pearson)."""
    _check_pair(pred, actual)
    mean = math.fsum(actual) / len(actual)
    ss_tot = math.fsum((a - mean) ** 2 for a in actual)
    if ss_tot == 0:
        raise DegenerateInput("actual values have zero variance")
    ss_res = math.fsum((a - p) ** 2 for p, a in zip(pred, actual))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class CorrelationTriple:
    r_squared: float
    pearson: float
    spearman: float

    @property
    def pearson_squared(self) -> float:
        return self.pearson ** 2


def correlation_triple(pred: Sequence[float], actual: Sequence[float]) -> CorrelationTriple:
    return CorrelationTriple(r_squared(pred, actual), pearson(pred, actual), spearman(pred, actual))


def _scores(table) -> dict[str, float]:
    if isinstance(table, ScoreTable):
        return dict(table.entries)
    if isinstance(table, RankingTable):
        return table.scores()
    return dict(table)


def _paired(a: Mapping[str, float], b: Mapping[str, float]) -> tuple[list[str], list[float], list[float]]:
    common = sorted(a.keys() & b.keys())
    return common, [a[u] for u in common], [b[u] for u in common]


# --- rank differences and score deltas --------------------------------------


@dataclass(frozen=True)
class BoxplotSummary:
    group_label: str
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    outliers: tuple[float, ...] = ()


def boxplot_summary(label: str, values: Sequence[float], whis: float = 1.5) -> BoxplotSummary:
    """Five-number summary with whiskers at the furthest points within whis*IQR."""
    data = np.asarray(sorted(values), dtype=float)
    if data.size == 0:
        raise InsufficientData(f"group {label!r} is empty")
    q1, median, q3 = np.percentile(data, [25, 50, 75])
    iqr = q3 - q1
    low_fence, high_fence = q1 - whis * iqr, q3 + whis * iqr
    inside = data[(data >= low_fence) & (data <= high_fence)]
    low = min(float(inside.min()), q1) if inside.size else q1
    high = max(float(inside.max()), q3) if inside.size else q3
    outliers = tuple(float(v) for v in data if v < low_fence or v > high_fence)
    return BoxplotSummary(label, int(data.size), float(low), float(q1), float(median),
                          float(q3), float(high), outliers)


def _check_coverage(a: Iterable[str], b: Iterable[str]) -> None:
    a, b = set(a), set(b)
    if a != b:
        raise CoverageError(a - b, b - a)


def rank_differences(a: RankingTable, b: RankingTable) -> dict[str, int]:
    ra, rb = a.ranks(), b.ranks()
    _check_coverage(ra, rb)
    return {u: abs(ra[u] - rb[u]) for u in ra}


def rank_difference_report(a: RankingTable, b: RankingTable,
                           group_size: int = 30) -> list[BoxplotSummary]:
    """Absolute rank differences, bucketed by position in ``a``."""
    if group_size < 1:
        raise RangeError(f"group_size must be positive, got {group_size}")
    diffs = rank_differences(a, b)
    ordered = sorted(a.rows, key=lambda r: (r.rank, r.university))
    report = []
    for start in range(0, len(ordered), group_size):
        chunk = ordered[start:start + group_size]
        label = f"{start + 1}-{start + len(chunk)}"
        report.append(boxplot_summary(label, [diffs[r.university] for r in chunk]))
    return report


def score_deltas(a, b) -> dict[str, float]:
    sa, sb = _scores(a), _scores(b)
    _check_coverage(sa, sb)
    return {u: sb[u] - sa[u] for u in sorted(sa)}


def score_delta_histogram(a, b, bin_width: float = 0.1) -> dict[float, int]:
    """Counts of (score_b - score_a) in half-open bins [k*w, (k+1)*w)."""
    if not bin_width > 0:
        raise RangeError(f"bin_width must be positive, got {bin_width}")
    counts: dict[int, int] = defaultdict(int)
    for delta in score_deltas(a, b).values():
        # round away representation noise (3.9 - 3.1 = 0.79999...) before flooring
        counts[math.floor(round(delta / bin_width, 9))] += 1
    return {round(k * bin_width, 10) + 0.0: counts[k] for k in sorted(counts)}


# --- cohorts across snapshots ---------------------------------------------


@dataclass(frozen=True)
class Mover:
    faculty_id_a: str
    faculty_id_b: str
    from_university: str
    to_university: str
    direction: str  # up | down | level | unknown


@dataclass
class CohortReport:
    continuing: list[tuple[str, str]] = field(default_factory=list)
    movers: list[Mover] = field(default_factory=list)
    new: list[str] = field(default_factory=list)
    departed: list[str] = field(default_factory=list)
    promoted: list[tuple[str, str, str, str]] = field(default_factory=list)
    stats: dict[str, float | int | None] = field(default_factory=dict)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def _department_means(s: Snapshot) -> dict[str, float]:
    sums: dict[str, list[int]] = defaultdict(list)
    for f in s.faculty:
        if f.t10 is not None:
            sums[f.university].append(f.t10)
    return {u: math.fsum(v) / len(v) for u, v in sums.items()}


def snapshot_cohort_report(a: Snapshot, b: Snapshot, identity: MatchResult,
                           ranks_a: RankingTable | None = None) -> CohortReport:
    """Classify faculty into continuing / mover / new / departed cohorts.

    Department means are over all faculty with known t10 in that snapshot,
    the person themselves included. Faculty lacking t10 are tallied in the
    ``*_missing_t10`` counts and left out of every fraction.
    """
    fa = {f.faculty_id: f for f in a.faculty}
    fb = {f.faculty_id: f for f in b.faculty}
    ranks = ranks_a.ranks() if ranks_a is not None else {}
    report = CohortReport()
    matched_b = set()
    for f in a.faculty:
        b_id = identity.pairs.get(f.faculty_id)
        if b_id is None:
            report.departed.append(f.faculty_id)
            continue
        g = fb[b_id]
        matched_b.add(b_id)
        if g.rank.level > f.rank.level:
            report.promoted.append((f.faculty_id, b_id, f.rank.value, g.rank.value))
        if g.university == f.university:
            report.continuing.append((f.faculty_id, b_id))
            continue
        ra, rb = ranks.get(f.university), ranks.get(g.university)
        if ra is None or rb is None:
            direction = "unknown"
        elif rb < ra:
            direction = "up"
        elif rb > ra:
            direction = "down"
        else:
            direction = "level"
        report.movers.append(Mover(f.faculty_id, b_id, f.university, g.university, direction))
    report.new = [f.faculty_id for f in b.faculty if f.faculty_id not in matched_b]

    means_a, means_b = _department_means(a), _department_means(b)
    below = not_below = new_missing = 0
    for fid in report.new:
        g = fb[fid]
        if g.t10 is None:
            new_missing += 1
        elif g.t10 < means_b[g.university]:
            below += 1
        else:
            not_below += 1
    at_or_below = above = mover_missing = 0
    for m in report.movers:
        f = fa[m.faculty_id_a]
        if f.t10 is None:
            mover_missing += 1
        elif f.t10 <= means_a[f.university]:
            at_or_below += 1
        else:
            above += 1
    direction_counts = {d: sum(1 for m in report.movers if m.direction == d)
                        for d in ("up", "down", "level", "unknown")}
    report.stats = {
        "continuing": len(report.continuing),
        "movers": len(report.movers),
        "new": len(report.new),
        "departed": len(report.departed),
        "promoted": len(report.promoted),
        "ambiguous_groups": len(identity.ambiguous),
        "new_below_destination_mean": below,
        "new_not_below_destination_mean": not_below,
        "new_missing_t10": new_missing,
        "new_below_destination_mean_fraction": _ratio(below, below + not_below),
        "movers_up": direction_counts["up"],
        "movers_down": direction_counts["down"],
        "movers_level": direction_counts["level"],
        "movers_unknown_direction": direction_counts["unknown"],
        "movers_up_fraction": _ratio(direction_counts["up"],
                                     direction_counts["up"] + direction_counts["down"]),
        "movers_at_or_below_origin_mean": at_or_below,
        "movers_above_origin_mean": above,
        "movers_missing_t10": mover_missing,
        "movers_at_or_below_origin_mean_fraction": _ratio(at_or_below, at_or_below + above),
    }
    return report


# --- profile bias ---------------------------------------------------------


@dataclass(frozen=True)
class BiasReport:
    deciles: tuple[tuple[int, int, int], ...]  # (decile start %, with profile, without)
    median_with: float | None
    median_without: float | None

    @property
    def total(self) -> int:
        return sum(w + wo for _, w, wo in self.deciles)


def t10_decile(d: NationalDistribution, value: int) -> int:
    return min(9, int(percentile_of(d, value) // 10))


def profile_bias_report(s: Snapshot, d: NationalDistribution) -> BiasReport:
    seniors = [f for f in s.faculty if f.senior and f.t10 is not None]
    if not seniors:
        raise EmptyDistribution("no senior faculty with known t10")
    with_p = [0] * 10
    without_p = [0] * 10
    for f in seniors:
        k = t10_decile(d, f.t10)
        if f.has_scholar_profile:
            with_p[k] += 1
        else:
            without_p[k] += 1
    t_with = [f.t10 for f in seniors if f.has_scholar_profile]
    t_without = [f.t10 for f in seniors if not f.has_scholar_profile]
    return BiasReport(
        tuple((10 * k, with_p[k], without_p[k]) for k in range(10)),
        statistics.median(t_with) if t_with else None,
        statistics.median(t_without) if t_without else None,
    )


# --- CSRankings comparison ------------------------------------------------


@dataclass(frozen=True)
class CSRankingsComparison:
    correlations: dict[str, CorrelationTriple]
    average: ScoreTable
    log_csrankings: dict[str, float]


def align_affine(values: Sequence[float], target: Sequence[float]) -> list[float]:
    """Rescale *values* to the mean and (population) std of *target*."""
    mv, sv = statistics.fmean(values), statistics.pstdev(values)
    mt, st = statistics.fmean(target), statistics.pstdev(target)
    if sv == 0:
        raise DegenerateInput("cannot align a constant series")
    return [mt + st * (v - mv) / sv for v in values]


def _triple_on(pred: Mapping[str, float], actual: Mapping[str, float],
               align: bool = False, min_size: int = 3) -> CorrelationTriple:
    common, p, a = _paired(pred, actual)
    if len(common) < min_size:
        raise InsufficientData(f"only {len(common)} common universities")
    if align:
        p = align_affine(p, a)
    return correlation_triple(p, a)


def csrankings_comparison(scholar, csr: ScoreTable, usn: ScoreTable) -> CSRankingsComparison:
    """Correlations among USN, scholar and log-CSRankings, plus the average model.

    R² against a log-CSRankings series is computed after aligning it to the
    other series' mean and std, since the raw log scale is not a prediction
    of either score. The average model is the mean of the scholar score and
    log-CSRankings aligned to the scholar scores over their intersection.
    """
    scholar_scores = _scores(scholar)
    raw = _scores(csr)
    for univ, v in raw.items():
        if v <= 0:
            raise RangeError(f"{univ}: CSRankings score {v} must be positive")
    log_csr = {u: math.log(v) for u, v in raw.items()}
    usn_scores = _scores(usn)

    common, s_vals, z_vals = _paired(scholar_scores, log_csr)
    if len(common) < 3:
        raise InsufficientData(f"only {len(common)} universities have scholar and CSRankings scores")
    aligned = align_affine(z_vals, s_vals)
    average = {u: (s + z) / 2 for u, s, z in zip(common, s_vals, aligned)}

    correlations = {
        "usn_vs_scholar": _triple_on(scholar_scores, usn_scores),
        "usn_vs_csrankings": _triple_on(log_csr, usn_scores, align=True),
        "scholar_vs_csrankings": _triple_on(log_csr, scholar_scores, align=True),
        "usn_vs_average": _triple_on(average, usn_scores),
    }
    return CSRankingsComparison(correlations, ScoreTable(ScoreSource.AVERAGE, None, average), log_csr)


# --- department size ------------------------------------------------------


@dataclass(frozen=True)
class DeptSizeStats:
    median: float
    mode: int
    min: int
    max: int
    score_correlation: float | None = None


def dept_size_stats(s: Snapshot, scores=None) -> DeptSizeStats:
    """Order statistics of department sizes; mode ties go to the smallest size.

    With *scores*, also the Pearson correlation of size against score over
    the common universities.
    """
    sizes = {d.university: d.size for d in s.departments}
    if not sizes:
        raise InsufficientData("snapshot has no departments")
    values = list(sizes.values())
    corr = None
    if scores is not None:
        _, x, y = _paired(sizes, _scores(scores))
        corr = pearson([float(v) for v in x], y)
    return DeptSizeStats(
        statistics.median(values),
        min(statistics.multimode(values)),
        min(values),
        max(values),
        corr,
    )


# --- CSV exports ----------------------------------------------------------


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def boxplot_csv(report: Sequence[BoxplotSummary]) -> bytes:
    return _csv(
        ([b.group_label, b.n, _num(b.min), _num(b.q1), _num(b.median), _num(b.q3), _num(b.max),
          ";".join(_num(o) for o in b.outliers)] for b in report),
        ("group", "n", "min", "q1", "median", "q3", "max", "outliers"),
    )


def histogram_csv(hist: Mapping[float, int]) -> bytes:
    return _csv(([_num(float(k)), v] for k, v in sorted(hist.items())), ("bin_start", "count"))


def correlations_csv(triples: Mapping[str, CorrelationTriple]) -> bytes:
    return _csv(
        ([name, _num(t.r_squared), _num(t.pearson), _num(t.spearman), _num(t.pearson_squared)]
         for name, t in triples.items()),
        ("pair", "r_squared", "pearson", "spearman", "pearson_squared"),
    )


def bias_csv(report: BiasReport) -> bytes:
    return _csv(([k, w, wo] for k, w, wo in report.deciles),
                ("decile_start", "with_profile", "without_profile"))


def cohort_csv(report: CohortReport, a: Snapshot, b: Snapshot) -> bytes:
    fa: dict[str, FacultyRecord] = {f.faculty_id: f for f in a.faculty}
    fb: dict[str, FacultyRecord] = {f.faculty_id: f for f in b.faculty}
    rows = []
    for ia, ib in report.continuing:
        rows.append([ia, ib, fb[ib].name_canonical, "continuing", fa[ia].university,
                     fb[ib].university, "", _num(fa[ia].t10), _num(fb[ib].t10)])
    for m in report.movers:
        rows.append([m.faculty_id_a, m.faculty_id_b, fb[m.faculty_id_b].name_canonical, "mover",
                     m.from_university, m.to_university, m.direction,
                     _num(fa[m.faculty_id_a].t10), _num(fb[m.faculty_id_b].t10)])
    for ib in report.new:
        rows.append(["", ib, fb[ib].name_canonical, "new", "", fb[ib].university, "",
                     "", _num(fb[ib].t10)])
    for ia in report.departed:
        rows.append([ia, "", fa[ia].name_canonical, "departed", fa[ia].university, "", "",
                     _num(fa[ia].t10), ""])
    return _csv(rows, ("faculty_id_a", "faculty_id_b", "name", "cohort", "from_university",
                       "to_university", "direction", "t10_a", "t10_b"))
