"""Fixed-intercept regression on square-rooted department measures.

Every model scores a department as ``intercept + sum(coef[m] * sqrt(v[m]))``
with the intercept pinned at 1: a program with no research output sits at
the bottom of the 1-5 peer-assessment scale.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InsufficientData, MissingMeasure, ScholarRankError, SingularFit
from .metrics import AVERAGED_MEASURES, CUMULATIVE_LEVELS, MetricVector
from .roster import ScoreSource, ScoreTable

INTERCEPT = 1.0
MIN_FIT_PROGRAMS = 3
# relative determinant below which the 2x2 normal matrix counts as singular
SINGULAR_RTOL = 1e-10

DEFAULT_ENSEMBLE = (("m10", 40), ("m10", 60), ("g10", 40), ("g10", 60))
FULL_ENSEMBLE = tuple((a, n) for a in AVERAGED_MEASURES for n in CUMULATIVE_LEVELS)


@dataclass(frozen=True)
class PairModel:
    averaged_measure: str
    cumulative_measure: int
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.averaged_measure not in AVERAGED_MEASURES:
            raise ScholarRankError(f"unknown averaged measure {self.averaged_measure!r}")
        if not (math.isfinite(self.beta1) and math.isfinite(self.beta2)):
            raise ScholarRankError("pair model coefficients must be finite")

    @property
    def coefficients(self) -> dict[str, float]:
        return {self.averaged_measure: self.beta1, f"c{self.cumulative_measure}": self.beta2}

    def predict(self, v: MetricVector) -> float:
        return _linear(INTERCEPT, self.coefficients, v)


@dataclass(frozen=True)
class LinearModel:
    """Intercept plus coefficients on square-rooted measures."""

    coefficients: Mapping[str, float]
    intercept: float = INTERCEPT
    members: tuple[PairModel, ...] = field(default=())

    def predict(self, v: MetricVector) -> float:
        return _linear(self.intercept, self.coefficients, v)


# Published 2017 model, re-applied unchanged to later snapshots.
PUBLISHED_MODEL = LinearModel({"m10": 0.058, "g10": 0.059, "c40": 0.121, "c60": 0.127})


def _linear(intercept: float, coefficients: Mapping[str, float], v: MetricVector) -> float:
    total = intercept
    for name, coef in coefficients.items():
        try:
            value = v.measure(name)
        except KeyError:
            raise MissingMeasure(f"{v.university}: measure {name!r} not available") from None
        total += coef * math.sqrt(value)
    return total


def score_department(model: LinearModel | PairModel, v: MetricVector) -> float:
    return model.predict(v)


def _training_rows(metrics: Iterable[MetricVector], usn: ScoreTable):
    rows = [(v, usn.entries[v.university]) for v in metrics if v.university in usn.entries]
    rows.sort(key=lambda r: r[0].university)
    return rows


def fit_pair_model(metrics: Iterable[MetricVector], usn: ScoreTable,
                   averaged_measure: str, level: int) -> PairModel:
    """Least-squares (beta1, beta2) with the intercept held at 1.

    Fits over universities present in both ``metrics`` and ``usn``; solves
    the 2x2 normal equations directly.
    """
    rows = _training_rows(metrics, usn)
    if len(rows) < MIN_FIT_PROGRAMS:
        raise InsufficientData(
            f"({averaged_measure}, c{level}): {len(rows)} common universities, "
            f"need {MIN_FIT_PROGRAMS}"
        )
    s11 = s12 = s22 = r1 = r2 = 0.0
    for v, score in rows:
        try:
            x1 = math.sqrt(v.measure(averaged_measure))
            x2 = math.sqrt(v.measure(f"c{level}"))
        except KeyError as exc:
            raise MissingMeasure(f"{v.university}: measure {exc.args[0]!r} not available") from None
        y = score - INTERCEPT
        s11 += x1 * x1
        s12 += x1 * x2
        s22 += x2 * x2
        r1 += x1 * y
        r2 += x2 * y
    det = s11 * s22 - s12 * s12
    if s11 == 0 or s22 == 0 or abs(det) <= SINGULAR_RTOL * s11 * s22:
        raise SingularFit(f"({averaged_measure}, c{level}): collinear or constant features")
    beta1 = (s22 * r1 - s12 * r2) / det
    beta2 = (s11 * r2 - s12 * r1) / det
    return PairModel(averaged_measure, level, beta1, beta2)


def build_ensemble(metrics: Sequence[MetricVector], usn: ScoreTable,
                   config: Iterable[tuple[str, int]] = DEFAULT_ENSEMBLE) -> LinearModel:
    """Fit one pair model per configured pair and average their coefficients.

    A measure missing from a member contributes zero to that member, so the
    averaged model predicts exactly the mean of the member predictions.
    """
    config = list(config)
    if not config:
        raise ScholarRankError("ensemble config is empty")
    metrics = list(metrics)
    members = []
    for a, n in config:
        try:
            members.append(fit_pair_model(metrics, usn, a, n))
        except ScholarRankError as exc:
            raise type(exc)(f"ensemble member ({a}, c{n}): {exc}") from exc
    return average_members(members)


def average_members(members: Sequence[PairModel]) -> LinearModel:
    sums: dict[str, float] = {}
    for m in members:
        for name, coef in m.coefficients.items():
            sums[name] = sums.get(name, 0.0) + coef
    coefficients = {name: total / len(members) for name, total in sums.items()}
    return LinearModel(coefficients, INTERCEPT, tuple(members))


def parse_ensemble_config(text: str) -> list[tuple[str, int]]:
    """Parse ``m10:40,g10:60`` or the shorthands ``default`` / ``full``."""
    text = text.strip()
    if text == "default":
        return list(DEFAULT_ENSEMBLE)
    if text == "full":
        return list(FULL_ENSEMBLE)
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        measure, sep, level = item.partition(":")
        level = level.strip().lstrip("c")
        if not sep or measure.strip() not in AVERAGED_MEASURES or not level.isdigit() \
                or int(level) not in CUMULATIVE_LEVELS:
            raise ScholarRankError(f"bad ensemble pair {item!r}; expected e.g. m10:40")
        pairs.append((measure.strip(), int(level)))
    if not pairs:
        raise ScholarRankError("ensemble config is empty")
    return pairs


# --- serialization --------------------------------------------------------

def _sig9(x: float) -> float:
    return float(f"{x:.9g}")


def model_to_json(model: LinearModel) -> str:
    doc = {
        "intercept": _sig9(model.intercept),
        "coefficients": {k: _sig9(v) for k, v in sorted(model.coefficients.items())},
        "members": [
            {
                "averaged_measure": m.averaged_measure,
                "cumulative_measure": m.cumulative_measure,
                "beta1": _sig9(m.beta1),
                "beta2": _sig9(m.beta2),
            }
            for m in model.members
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str) -> LinearModel:
    doc = json.loads(text)
    try:
        members = tuple(
            PairModel(m["averaged_measure"], int(m["cumulative_measure"]),
                      float(m["beta1"]), float(m["beta2"]))
            for m in doc.get("members", [])
        )
        coefficients = {str(k): float(v) for k, v in doc["coefficients"].items()}
        intercept = float(doc.get("intercept", INTERCEPT))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScholarRankError(f"malformed model JSON: {exc}") from None
    return LinearModel(coefficients, intercept, members)


# --- ranking --------------------------------------------------------------

@dataclass(frozen=True)
class RankedRow:
    university: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankingTable:
    rows: tuple[RankedRow, ...]

    def ranks(self) -> dict[str, int]:
        return {r.university: r.rank for r in self.rows}

    def scores(self) -> dict[str, float]:
        return {r.university: r.score for r in self.rows}

    def __len__(self):
        return len(self.rows)


def rank_programs(scores: ScoreTable | Mapping[str, float]) -> RankingTable:
    """Competition ranking, best score first (1, 1, 3 for a tie at the top)."""
    entries = scores.entries if isinstance(scores, ScoreTable) else scores
    if not entries:
        raise ScholarRankError("cannot rank an empty score table")
    ordered = sorted(entries.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = []
    rank = 0
    previous = None
    for position, (univ, score) in enumerate(ordered, start=1):
        if score != previous:
            rank = position
            previous = score
        rows.append(RankedRow(univ, score, rank))
    return RankingTable(tuple(rows))


def score_programs(model: LinearModel, metrics: Iterable[MetricVector],
                   year: int | None = None) -> ScoreTable:
    return ScoreTable(ScoreSource.SCHOLAR, year, {v.university: model.predict(v) for v in metrics})


def serialize_ranking(table: RankingTable) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("university", "score", "rank"))
    for r in table.rows:
        writer.writerow((r.university, repr(float(r.score)), r.rank))
    return buf.getvalue().encode("utf-8")


def parse_ranking(data: bytes | str) -> RankingTable:
    """Read a ranking CSV; ranks are recomputed from scores if absent."""
    from .roster import parse_score_table

    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    table = parse_score_table(text, ScoreSource.SCHOLAR)
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if "rank" not in [h.strip() for h in reader.fieldnames or []]:
        return rank_programs(table)
    rows = []
    for raw in reader:
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        univ = row["university"]
        rows.append(RankedRow(univ, table.entries[univ], int(row["rank"])))
    rows.sort(key=lambda r: (r.rank, r.university))
    return RankingTable(tuple(rows))
