"""Department strength measures derived from faculty t10 values.

Averaged measures (m10, g10, p10) use senior faculty only; cumulative
measures (c10 .. c90) count all faculty with known t10 whose t10 strictly
exceeds the national senior-faculty percentile threshold.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import EmptyDistribution, EmptyInput, RangeError, RowError, SchemaError
from .roster import Snapshot

CUMULATIVE_LEVELS = (10, 20, 30, 40, 50, 60, 70, 80, 90)
AVERAGED_MEASURES = ("m10", "g10", "p10")
METRIC_COLUMNS = (
    ("university",) + AVERAGED_MEASURES
    + tuple(f"c{n}" for n in CUMULATIVE_LEVELS)
    + ("senior_count", "total_count")
)


@dataclass(frozen=True)
class NationalDistribution:
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(sorted(self.values)))
        if not self.values:
            raise EmptyDistribution("national distribution has no values")

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class MetricVector:
    university: str
    m10: float
    g10: float
    p10: float
    c: Mapping[int, int]
    senior_count: int
    total_count: int
    degenerate: bool = field(default=False, compare=False)

    def measure(self, name: str) -> float:
        """Look up a measure by name: ``m10``, ``g10``, ``p10`` or ``c<N>``."""
        if name in AVERAGED_MEASURES:
            return getattr(self, name)
        if name.startswith("c") and name[1:].isdigit() and int(name[1:]) in self.c:
            return self.c[int(name[1:])]
        raise KeyError(name)


def build_national_distribution(snapshot: Snapshot) -> NationalDistribution:
    values = [f.t10 for f in snapshot.faculty if f.senior and f.t10 is not None]
    if not values:
        raise EmptyDistribution(f"snapshot {snapshot.label!r} has no senior faculty with known t10")
    return NationalDistribution(tuple(values))


def percentile_threshold(d: NationalDistribution, q: float) -> int:
    """Nearest-rank percentile: the value at 1-based index ceil(q/100 * n)."""
    if not 0 < q < 100:
        raise RangeError(f"percentile must be in (0, 100), got {q}")
    # exact rational arithmetic; 0.7 * 10 in floats would round up to index 8
    index = math.ceil(Fraction(str(q)) * d.n / 100)
    return d.values[index - 1]


def percentile_of(d: NationalDistribution, value: float) -> float:
    """Percent of the distribution strictly below *value*."""
    return 100.0 * bisect.bisect_left(d.values, value) / d.n


def compute_m10(senior_t10s: Sequence[int]) -> float:
    values = sorted(senior_t10s)
    if not values:
        raise EmptyInput("m10 needs at least one value")
    mid = len(values) // 2
    if len(values) % 2:
        return float(values[mid])
    return (values[mid - 1] + values[mid]) / 2


def compute_g10(senior_t10s: Sequence[int]) -> float:
    if not senior_t10s:
        raise EmptyInput("g10 needs at least one value")
    return math.exp(math.fsum(math.log1p(v) for v in senior_t10s) / len(senior_t10s))


def compute_p10(senior_t10s: Sequence[int], d: NationalDistribution) -> float:
    if not senior_t10s:
        raise EmptyInput("p10 needs at least one value")
    return math.fsum(percentile_of(d, v) for v in senior_t10s) / len(senior_t10s)


def compute_cN(all_faculty_t10s: Iterable[int], threshold: float) -> int:
    return sum(1 for v in all_faculty_t10s if v > threshold)


def cumulative_thresholds(d: NationalDistribution,
                          levels: Iterable[int] = CUMULATIVE_LEVELS) -> dict[int, int]:
    return {n: percentile_threshold(d, n) for n in levels}


def metric_vector(university: str, senior_t10s: Sequence[int], all_t10s: Sequence[int],
                  d: NationalDistribution, thresholds: Mapping[int, int]) -> MetricVector:
    c = {n: compute_cN(all_t10s, t) for n, t in sorted(thresholds.items())}
    if not senior_t10s:
        return MetricVector(university, 0.0, 1.0, 0.0, c, 0, len(all_t10s), degenerate=True)
    return MetricVector(
        university,
        compute_m10(senior_t10s),
        compute_g10(senior_t10s),
        compute_p10(senior_t10s, d),
        c,
        len(senior_t10s),
        len(all_t10s),
    )


def compute_metric_table(snapshot: Snapshot,
                         d: NationalDistribution | None = None) -> list[MetricVector]:
    """One metric vector per department, ordered by university name.

    ``senior_count``/``total_count`` count faculty with known t10 only.
    Departments without a senior t10 get m10=0, g10=1, p10=0 and
    ``degenerate=True``.
    """
    if d is None:
        d = build_national_distribution(snapshot)
    thresholds = cumulative_thresholds(d)
    table = []
    groups = snapshot.faculty_by_university()
    for univ in sorted(groups):
        known = [f for f in groups[univ] if f.t10 is not None]
        senior = [f.t10 for f in known if f.senior]
        table.append(metric_vector(univ, senior, [f.t10 for f in known], d, thresholds))
    return table


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_metrics(table: Iterable[MetricVector]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for v in table:
        writer.writerow(
            [v.university, _fmt(v.m10), _fmt(v.g10), _fmt(v.p10)]
            + [str(v.c[n]) for n in CUMULATIVE_LEVELS]
            + [str(v.senior_count), str(v.total_count)]
        )
    return buf.getvalue().encode("utf-8")


def parse_metrics(data: bytes | str) -> list[MetricVector]:
    """Read ``metrics.csv``; cumulative columns that are absent are skipped."""
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text, newline=""))
    header = [h.strip() for h in reader.fieldnames or []]
    for col in ("university",) + AVERAGED_MEASURES:
        if col not in header:
            raise SchemaError(col)
    levels = [n for n in CUMULATIVE_LEVELS if f"c{n}" in header]
    table = []
    for i, raw in enumerate(reader, start=1):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        try:
            senior = int(row.get("senior_count") or 0)
            total = int(row.get("total_count") or 0)
            table.append(MetricVector(
                row["university"],
                float(row["m10"]), float(row["g10"]), float(row["p10"]),
                {n: int(row[f"c{n}"]) for n in levels},
                senior, total,
                degenerate=senior == 0,
            ))
        except ValueError as exc:
            raise RowError(i, str(exc)) from None
    return table
