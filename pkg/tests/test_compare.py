import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from scholarrank.compare import (
    align_affine, average_ranks, bias_csv, boxplot_csv, boxplot_summary, cohort_csv,
    correlation_triple, correlations_csv, csrankings_comparison, dept_size_stats,
    histogram_csv, pearson, profile_bias_report, r_squared, rank_difference_report,
    rank_differences, score_delta_histogram, snapshot_cohort_report, spearman, t10_decile,
)
from scholarrank.errors import (
    CoverageError, DegenerateInput, EmptyDistribution, InsufficientData, RangeError, ShapeError,
)
from scholarrank.metrics import NationalDistribution, build_national_distribution
from scholarrank.model import rank_programs
from scholarrank.roster import ScoreTable, match_faculty

from conftest import fac, snap
from oracles import (
    check_cohort_partition, pearson_oracle, r_squared_oracle, random_snapshot_pair,
    random_vector_pair, spearman_oracle,
)


# --- correlation ------------------------------------------------------------

def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_spearman_examples():
    assert spearman([1, 2, 3, 9], [0, 5, 6, 7]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 9], [7, 6, 5, 0]) == pytest.approx(-1.0)
    assert spearman([1, 2, 2, 4], [1, 2, 3, 4]) == pytest.approx(0.9487, abs=1e-4)
    assert average_ranks([10, 20, 20, 5]) == [2.0, 3.5, 3.5, 1.0]


def test_r_squared_examples():
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert r_squared([2, 2, 2], [1, 2, 3]) == 0.0
    assert r_squared([1, 2, 4], [1, 2, 3]) == pytest.approx(0.5, abs=1e-15)
    # can go negative for bad predictions
    assert r_squared([3, 2, 1], [1, 2, 3]) == pytest.approx(-3.0)


def test_correlation_errors():
    with pytest.raises(ShapeError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ShapeError):
        spearman([1], [1])
    with pytest.raises(DegenerateInput):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        spearman([1, 2, 3], [4, 4, 4])
    with pytest.raises(DegenerateInput):
        r_squared([1, 2, 3], [5, 5, 5])


def test_correlations_match_oracles():
    rng = random.Random(11)
    for _ in range(200):
        x, y = random_vector_pair(rng)
        assert pearson(x, y) == pytest.approx(pearson_oracle(x, y), abs=1e-10)
        assert spearman(x, y) == pytest.approx(spearman_oracle(x, y), abs=1e-10)
        assert r_squared(x, y) == pytest.approx(r_squared_oracle(x, y), abs=1e-10)


def test_correlations_match_scipy():
    rng = random.Random(12)
    for _ in range(50):
        x, y = random_vector_pair(rng)
        assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-10)
        assert spearman(x, y) == pytest.approx(stats.spearmanr(x, y)[0], abs=1e-10)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=40),
       st.sampled_from([math.exp, lambda v: v ** 3, lambda v: 7 * v - 2, math.atan]))
def test_spearman_rank_invariance(pairs, f):
    x = [float(a) for a, _ in pairs]
    y = [float(b) for _, b in pairs]
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    assert spearman([f(v) for v in x], y) == pytest.approx(spearman(x, y), abs=1e-12)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=40),
       st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_pearson_affine_invariance(pairs, a, b):
    x = [p for p, _ in pairs]
    y = [q for _, q in pairs]
    if np.std(x) < 1e-3 or np.std(y) < 1e-3:
        return
    assert pearson([a * v + b for v in x], y) == pytest.approx(pearson(x, y), abs=1e-10)


def test_r_squared_equals_pearson_squared_for_least_squares_fit():
    rng = random.Random(13)
    for _ in range(50):
        x, y = random_vector_pair(rng)
        slope, intercept = np.polyfit(x, y, 1)
        fit = [slope * v + intercept for v in x]
        assert r_squared(fit, y) == pytest.approx(pearson(fit, y) ** 2, abs=1e-10)


def test_r_squared_differs_from_pearson_squared_otherwise():
    pred, actual = [1, 2, 4], [1, 2, 3]
    t = correlation_triple(pred, actual)
    assert t.r_squared == pytest.approx(0.5)
    assert t.pearson_squared == pytest.approx(pearson(pred, actual) ** 2)
    assert abs(t.r_squared - t.pearson_squared) > 0.4


# --- boxplots and rank differences -------------------------------------------

def test_boxplot_summary_matches_numpy():
    values = [0, 1, 1, 2, 3, 3, 4, 30]
    b = boxplot_summary("g", values)
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    assert (b.q1, b.median, b.q3) == (q1, med, q3)
    assert b.outliers == (30.0,)
    assert (b.min, b.max) == (0.0, 4.0)
    with pytest.raises(InsufficientData):
        boxplot_summary("g", [])


@given(st.lists(st.integers(0, 200), min_size=1, max_size=50))
def test_boxplot_ordering(values):
    b = boxplot_summary("g", values)
    assert b.min <= b.q1 <= b.median <= b.q3 <= b.max
    assert b.n == len(values)
    for o in b.outliers:
        assert o < b.q1 or o > b.q3


def test_rank_difference_single_jump():
    univs = [f"U{i:02d}" for i in range(45)]
    a = {u: 100.0 - i for i, u in enumerate(univs)}
    b = dict(a)
    # the 40th program overtakes to 21st
    b["U39"] = (a["U19"] + a["U20"]) / 2
    d = rank_differences(rank_programs(a), rank_programs(b))
    assert rank_programs(a).ranks()["U39"] == 40
    assert rank_programs(b).ranks()["U39"] == 21
    assert d["U39"] == 19


def test_rank_difference_identical_and_grouping():
    t = rank_programs({f"U{i}": float(i) for i in range(6)})
    report = rank_difference_report(t, t, group_size=3)
    assert [g.group_label for g in report] == ["1-3", "4-6"]
    for g in report:
        assert (g.min, g.q1, g.median, g.q3, g.max, g.outliers) == (0, 0, 0, 0, 0, ())
    ragged = rank_difference_report(rank_programs({f"U{i}": float(i) for i in range(7)}),
                                    rank_programs({f"U{i}": float(i) for i in range(7)}), 3)
    assert [g.n for g in ragged] == [3, 3, 1]


def test_rank_difference_coverage_and_range():
    a = rank_programs({"A": 1.0, "B": 2.0})
    b = rank_programs({"A": 1.0, "C": 2.0})
    with pytest.raises(CoverageError) as err:
        rank_difference_report(a, b)
    assert err.value.only_a == ("B",) and err.value.only_b == ("C",)
    with pytest.raises(RangeError):
        rank_difference_report(a, a, group_size=0)


@given(st.lists(st.integers(1, 40), min_size=2, max_size=60), st.randoms(), st.integers(1, 10))
def test_rank_difference_symmetry(scores, rnd, group_size):
    univs = [f"U{i}" for i in range(len(scores))]
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    a = rank_programs({u: float(s) for u, s in zip(univs, scores)})
    b = rank_programs({u: float(s) for u, s in zip(univs, shuffled)})
    assert rank_differences(a, b) == rank_differences(b, a)
    ab = rank_difference_report(a, b, group_size)
    ba = rank_difference_report(b, a, group_size)
    assert [g.group_label for g in ab] == [g.group_label for g in ba]
    assert sum(g.n for g in ab) == len(scores)


# --- score deltas ------------------------------------------------------------

def test_histogram_examples():
    a = ScoreTable("usn", 2017, {"NE": 3.1, "UNC": 3.8, "X": 2.0})
    b = ScoreTable("usn", 2022, {"NE": 3.9, "UNC": 3.5, "X": 2.0})
    h = score_delta_histogram(a, b)
    assert h == {-0.3: 1, 0.0: 1, 0.8: 1}
    assert score_delta_histogram(a, a) == {0.0: 3}
    with pytest.raises(RangeError):
        score_delta_histogram(a, b, bin_width=0)
    with pytest.raises(CoverageError):
        score_delta_histogram(a, ScoreTable("usn", 2022, {"NE": 3.0}))


@given(st.dictionaries(st.text("abc", min_size=1, max_size=3),
                       st.tuples(st.integers(10, 50), st.integers(10, 50)), min_size=1),
       st.sampled_from([0.1, 0.25, 0.5]))
def test_histogram_counts_sum(entries, width):
    a = ScoreTable("usn", None, {u: x / 10 for u, (x, _) in entries.items()})
    b = ScoreTable("usn", None, {u: y / 10 for u, (_, y) in entries.items()})
    h = score_delta_histogram(a, b, width)
    assert sum(h.values()) == len(entries)
    for u, (x, y) in entries.items():
        delta = (y - x) / 10
        assert any(k - 1e-9 <= delta < k + width - 1e-9 for k in h)


# --- cohorts -----------------------------------------------------------------

def test_cohort_identity():
    s = snap(fac("Ann Ames", "U1", t10=5), fac("Bob Bell", "U2", t10=7))
    r = snapshot_cohort_report(s, s, match_faculty(s, s))
    assert len(r.continuing) == 2
    assert (r.movers, r.new, r.departed, r.promoted) == ([], [], [], [])
    assert r.stats["new_below_destination_mean_fraction"] is None


def _toy():
    a = snap(fac("Ann Ames", "U1", t10=100, fid="a1"), fac("Bob Bell", "U1", t10=20, fid="a2"),
             fac("Cid Cole", "U2", t10=50, fid="a3"), fac("Dee Dunn", "U2", t10=10, fid="a4"),
             label="a")
    b = snap(fac("Ann Ames", "U1", t10=110, fid="b1"),
             fac("Bob Bell", "U2", t10=25, fid="b2", rank="associate"),
             fac("Cid Cole", "U2", t10=55, fid="b3"), fac("Eve Egan", "U2", t10=5, fid="b4"),
             fac("Fay Ford", "U1", fid="b5"), label="b")
    return a, b


def test_cohort_toy_report():
    a, b = _toy()
    ranks_a = rank_programs({"U1": 2.0, "U2": 3.0})  # U2 ranked 1
    r = snapshot_cohort_report(a, b, match_faculty(a, b), ranks_a)
    assert r.continuing == [("a1", "b1"), ("a3", "b3")]
    assert [(m.faculty_id_a, m.faculty_id_b, m.from_university, m.to_university, m.direction)
            for m in r.movers] == [("a2", "b2", "U1", "U2", "up")]
    assert r.new == ["b4", "b5"]
    assert r.departed == ["a4"]
    assert r.promoted == []
    s = r.stats
    # U2 mean in b is (25 + 55 + 5) / 3; Eve at 5 sits below it, Fay has no t10
    assert (s["new_below_destination_mean"], s["new_not_below_destination_mean"],
            s["new_missing_t10"]) == (1, 0, 1)
    assert s["new_below_destination_mean_fraction"] == 1.0
    # Bob's 20 is at or below U1's mean of 60
    assert (s["movers_at_or_below_origin_mean"], s["movers_above_origin_mean"]) == (1, 0)
    assert (s["movers_up"], s["movers_down"], s["movers_up_fraction"]) == (1, 0, 1.0)
    assert check_cohort_partition(a, b, r) == []


def test_cohort_promotion_and_unknown_direction():
    a = snap(fac("Ann Ames", "U1", rank="assistant", t10=3, fid="a1"))
    b = snap(fac("Ann Ames", "U9", rank="associate", t10=4, fid="b1"))
    r = snapshot_cohort_report(a, b, match_faculty(a, b))
    assert r.promoted == [("a1", "b1", "assistant", "associate")]
    assert r.movers[0].direction == "unknown"
    assert r.stats["movers_up_fraction"] is None


def test_cohort_csv_lists_everyone():
    a, b = _toy()
    r = snapshot_cohort_report(a, b, match_faculty(a, b))
    lines = cohort_csv(r, a, b).decode().splitlines()
    assert len(lines) == 1 + 2 + 1 + 2 + 1


@settings(max_examples=200)
@given(st.randoms(use_true_random=False))
def test_cohort_partition_property(rnd):
    a, b = random_snapshot_pair(rnd)
    r = snapshot_cohort_report(a, b, match_faculty(a, b))
    assert check_cohort_partition(a, b, r) == []


# --- profile bias --------------------------------------------------------------

def test_bias_all_with_profile():
    s = snap(*(fac(f"P{i} Q", t10=i, scholar_id=f"s{i}") for i in range(5)))
    r = profile_bias_report(s, build_national_distribution(s))
    assert all(wo == 0 for _, _, wo in r.deciles)
    assert r.median_without is None and r.median_with == 2


def test_bias_ten_person_enumeration():
    people = [fac(f"Person {i}", t10=10 * (i + 1), scholar_id=f"s{i}" if i >= 5 else None)
              for i in range(10)]
    people.append(fac("Junior Person", rank="assistant", t10=999, scholar_id="j"))
    s = snap(*people)
    d = build_national_distribution(s)
    r = profile_bias_report(s, d)
    # person i has exactly i colleagues strictly below, so lands in decile i
    assert r.deciles == tuple((10 * k, int(k >= 5), int(k < 5)) for k in range(10))
    assert r.total == 10
    assert (r.median_with, r.median_without) == (80, 30)
    assert bias_csv(r).decode().splitlines()[6] == "50,1,0"


def test_bias_decile_edges_and_empty():
    d = NationalDistribution(tuple(range(10)))
    assert t10_decile(d, 0) == 0 and t10_decile(d, 1000) == 9
    with pytest.raises(EmptyDistribution):
        profile_bias_report(snap(fac("A B", rank="assistant", t10=3)), d)


# --- CSRankings ------------------------------------------------------------------

def test_csrankings_log_and_affine_case():
    univs = [f"U{i}" for i in range(8)]
    csr = ScoreTable("csrankings", None, {u: math.exp(i / 4) for i, u in enumerate(univs)})
    scholar = ScoreTable("scholar", None, {u: 1.5 + 0.3 * i / 4 for i, u in enumerate(univs)})
    usn = ScoreTable("usn", None, {u: 2.0 + 0.2 * i for i, u in enumerate(univs)})
    c = csrankings_comparison(scholar, csr, usn)
    assert c.log_csrankings["U0"] == 0.0
    assert c.correlations["scholar_vs_csrankings"].pearson == pytest.approx(1.0)
    assert c.correlations["scholar_vs_csrankings"].r_squared == pytest.approx(1.0)
    # exact affine relation: the average is the scholar score itself
    assert c.average.entries == pytest.approx(dict(scholar.entries))
    order = sorted(univs, key=lambda u: c.average.entries[u])
    assert order == sorted(univs, key=lambda u: scholar.entries[u])


def test_csrankings_errors():
    ok = ScoreTable("scholar", None, {"A": 1.0, "B": 2.0, "C": 3.0})
    with pytest.raises(RangeError):
        csrankings_comparison(ok, ScoreTable("csrankings", None, {"A": 0.0, "B": 1.0, "C": 2.0}), ok)
    with pytest.raises(InsufficientData):
        csrankings_comparison(ok, ScoreTable("csrankings", None, {"A": 1.0, "B": 2.0}), ok)


def test_csrankings_matches_oracles():
    rng = random.Random(14)
    univs = [f"U{i}" for i in range(10)]
    scholar = {u: rng.uniform(1, 5) for u in univs}
    csr = {u: rng.uniform(0.5, 80) for u in univs}
    usn = {u: round(rng.uniform(1, 5), 1) for u in univs}
    c = csrankings_comparison(ScoreTable("scholar", None, scholar),
                              ScoreTable("csrankings", None, csr), ScoreTable("usn", None, usn))
    s = [scholar[u] for u in univs]
    z = np.log([csr[u] for u in univs])
    y = [usn[u] for u in univs]
    z_on_s = (z - z.mean()) / z.std() * np.std(s) + np.mean(s)
    z_on_y = (z - z.mean()) / z.std() * np.std(y) + np.mean(y)
    avg = [(a + b) / 2 for a, b in zip(s, z_on_s)]
    expected = {
        "usn_vs_scholar": (s, y),
        "usn_vs_csrankings": (z_on_y, y),
        "scholar_vs_csrankings": (z_on_s, s),
        "usn_vs_average": (avg, y),
    }
    for name, (p, a) in expected.items():
        t = c.correlations[name]
        assert t.pearson == pytest.approx(pearson_oracle(p, a), abs=1e-10), name
        assert t.spearman == pytest.approx(spearman_oracle(p, a), abs=1e-10), name
        assert t.r_squared == pytest.approx(r_squared_oracle(p, a), abs=1e-10), name
    assert [c.average.entries[u] for u in univs] == pytest.approx(avg, abs=1e-12)
    assert "usn_vs_average" in correlations_csv(c.correlations).decode()


def test_align_affine():
    out = align_affine([1.0, 2.0, 3.0], [10.0, 20.0, 60.0])
    assert np.mean(out) == pytest.approx(30.0)
    assert np.std(out) == pytest.approx(np.std([10.0, 20.0, 60.0]))
    with pytest.raises(DegenerateInput):
        align_affine([1.0, 1.0], [1.0, 2.0])


# --- department size -------------------------------------------------------------

def _sized(sizes):
    return snap(*(fac(f"P{u} N{i}", f"Univ {u}") for u, n in enumerate(sizes) for i in range(n)))


def test_dept_size_stats_examples():
    st_ = dept_size_stats(_sized([3, 20, 20, 23, 170]))
    assert (st_.median, st_.mode, st_.min, st_.max) == (20, 20, 3, 170)
    one = dept_size_stats(_sized([7]))
    assert (one.median, one.mode, one.min, one.max) == (7, 7, 7, 7)
    assert dept_size_stats(_sized([4, 9, 4, 9])).mode == 4


def test_dept_size_correlation():
    s = _sized([3, 5, 8])
    scores = {"Univ 0": 1.0, "Univ 1": 2.0, "Univ 2": 3.5, "Elsewhere": 5.0}
    assert dept_size_stats(s, scores).score_correlation == pytest.approx(
        pearson_oracle([3, 5, 8], [1.0, 2.0, 3.5]), abs=1e-12)


def test_boxplot_csv_layout():
    t = rank_programs({f"U{i}": float(i) for i in range(4)})
    text = boxplot_csv(rank_difference_report(t, t, 2)).decode()
    assert text.splitlines() == ["group,n,min,q1,median,q3,max,outliers",
                                 "1-2,2,0.0,0.0,0.0,0.0,0.0,", "3-4,2,0.0,0.0,0.0,0.0,0.0,"]
    assert histogram_csv({0.0: 2, -0.1: 1}).decode().splitlines()[1] == "-0.1,1"
