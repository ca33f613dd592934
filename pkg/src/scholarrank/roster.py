"""Faculty rosters, score tables, and cross-snapshot identity matching."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import (
    DuplicateError,
    InvalidName,
    RangeError,
    RowError,
    SchemaError,
    ScholarRankError,
)

ROSTER_COLUMNS = (
    "faculty_id",
    "name",
    "university",
    "department",
    "rank",
    "scholar_id",
    "t10",
    "h_index",
    "i10",
    "collection_method",
)
SCORE_COLUMNS = ("university", "score")


class Rank(str, Enum):
    ASSISTANT = "assistant"
    ASSOCIATE = "associate"
    FULL = "full"

    @property
    def senior(self) -> bool:
        return self is not Rank.ASSISTANT

    @property
    def level(self) -> int:
        return _RANK_LEVEL[self]


_RANK_LEVEL = {Rank.ASSISTANT: 0, Rank.ASSOCIATE: 1, Rank.FULL: 2}


class CollectionMethod(str, Enum):
    AUTO = "auto"
    MANUAL = "manual"
    CARRIED_FORWARD = "carried_forward"


class ScoreSource(str, Enum):
    USN = "usn"
    CSRANKINGS = "csrankings"
    SCHOLAR = "scholar"
    AVERAGE = "average"


# Letters that NFKD does not decompose into base + combining mark.
_TRANSLIT = str.maketrans(
    {"ø": "o", "Ø": "O", "ß": "ss", "æ": "ae", "Æ": "AE", "œ": "oe", "Œ": "OE",
     "ł": "l", "Ł": "L", "đ": "d", "Đ": "D", "þ": "th", "Þ": "Th", "ı": "i"}
)
_NON_NAME = re.compile(r"[^a-z0-9\s-]")
_SPACES = re.compile(r"\s+")


def normalize_name(raw: str) -> str:
    """Canonical form of a person's name used for matching.

    >>> normalize_name("SMITH, John")
    'john smith'
    >>> normalize_name("José A. Smith ")
    'jose a smith'
    """
    if raw is None or not raw.strip():
        raise InvalidName(f"empty name: {raw!r}")
    text = unicodedata.normalize("NFKD", raw.translate(_TRANSLIT))
    text = text.encode("ascii", "ignore").decode("ascii")
    if "," in text:
        last, first = text.split(",", 1)
        text = f"{first} {last}"
    text = _NON_NAME.sub("", text.lower())
    text = _SPACES.sub(" ", text).strip()
    if not text:
        raise InvalidName(f"name has no usable characters: {raw!r}")
    return text


@dataclass(frozen=True)
class FacultyRecord:
    faculty_id: str
    name_raw: str
    university: str
    department: str
    rank: Rank
    scholar_profile_id: str | None = None
    t10: int | None = None
    h_index: int | None = None
    i10: int | None = None
    collection_method: CollectionMethod = CollectionMethod.AUTO
    name_canonical: str = field(default="", compare=True)

    def __post_init__(self):
        object.__setattr__(self, "rank", Rank(self.rank))
        object.__setattr__(self, "collection_method", CollectionMethod(self.collection_method))
        if self.scholar_profile_id == "":
            object.__setattr__(self, "scholar_profile_id", None)
        object.__setattr__(self, "name_canonical", normalize_name(self.name_raw))
        for attr in ("t10", "h_index", "i10"):
            value = getattr(self, attr)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 0):
                raise RangeError(f"{self.faculty_id}: {attr} must be a non-negative integer, got {value!r}")

    @property
    def has_scholar_profile(self) -> bool:
        return self.scholar_profile_id is not None

    @property
    def senior(self) -> bool:
        return self.rank.senior


@dataclass(frozen=True)
class DepartmentRecord:
    university: str
    department_name: str
    size: int


@dataclass(frozen=True)
class Snapshot:
    label: str
    departments: tuple[DepartmentRecord, ...]
    faculty: tuple[FacultyRecord, ...]
    collected_at: dt.date | None = None

    def __post_init__(self):
        object.__setattr__(self, "departments", tuple(self.departments))
        object.__setattr__(self, "faculty", tuple(self.faculty))
        self.validate()

    def validate(self) -> None:
        seen = set()
        for f in self.faculty:
            if f.faculty_id in seen:
                raise DuplicateError(f"duplicate faculty_id: {f.faculty_id}")
            seen.add(f.faculty_id)

        counts = defaultdict(int)
        for f in self.faculty:
            counts[(f.university, f.department)] += 1
        declared = {}
        for d in self.departments:
            key = (d.university, d.department_name)
            if key in declared:
                raise DuplicateError(f"duplicate department: {key}")
            declared[key] = d
        by_university = defaultdict(list)
        for d in self.departments:
            by_university[d.university].append(d.department_name)
        for univ, names in by_university.items():
            if len(names) > 1:
                raise DuplicateError(f"{univ}: more than one department ({names})")

        for key in counts:
            if key not in declared:
                raise ScholarRankError(f"faculty reference undeclared department {key}")
        for key, d in declared.items():
            if d.size < 1 or d.size != counts.get(key, 0):
                raise ScholarRankError(
                    f"department {key}: size {d.size} != {counts.get(key, 0)} faculty records"
                )

    @property
    def universities(self) -> list[str]:
        return [d.university for d in self.departments]

    def faculty_by_university(self) -> dict[str, list[FacultyRecord]]:
        groups: dict[str, list[FacultyRecord]] = {d.university: [] for d in self.departments}
        for f in self.faculty:
            groups[f.university].append(f)
        return groups

    def with_faculty(self, faculty: Iterable[FacultyRecord]) -> "Snapshot":
        """Copy with faculty records replaced (same ids); departments unchanged."""
        return replace(self, faculty=tuple(faculty))


def build_snapshot(faculty: Iterable[FacultyRecord], label: str = "",
                   collected_at: dt.date | None = None) -> Snapshot:
    """Assemble a snapshot, deriving department records from the faculty list."""
    faculty = tuple(faculty)
    sizes: dict[tuple[str, str], int] = defaultdict(int)
    for f in faculty:
        sizes[(f.university, f.department)] += 1
    departments = tuple(DepartmentRecord(u, d, n) for (u, d), n in sorted(sizes.items()))
    return Snapshot(label, departments, faculty, collected_at)


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data


def _opt_int(value: str, column: str, row: int) -> int | None:
    value = value.strip()
    if not value:
        return None
    try:
        parsed = int(value)
    except ValueError:
        raise RowError(row, f"{column} is not an integer: {value!r}") from None
    if parsed < 0:
        raise RowError(row, f"{column} must be non-negative: {parsed}")
    return parsed


def _check_header(fieldnames, required) -> None:
    present = [c.strip() for c in (fieldnames or [])]
    for column in required:
        if column not in present:
            raise SchemaError(column)


def parse_roster(data: bytes | str, label: str = "",
                 collected_at: dt.date | None = None) -> Snapshot:
    """Load a roster CSV into a validated snapshot."""
    reader = csv.DictReader(io.StringIO(_decode(data), newline=""))
    _check_header(reader.fieldnames, ROSTER_COLUMNS)
    faculty = []
    seen: set[str] = set()
    for i, raw in enumerate(reader, start=1):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        fid = row["faculty_id"]
        if not fid:
            raise RowError(i, "faculty_id is empty")
        if fid in seen:
            raise DuplicateError(f"row {i}: duplicate faculty_id {fid!r}")
        seen.add(fid)
        try:
            rank = Rank(row["rank"].lower())
        except ValueError:
            raise RowError(
                i, f"rank must be one of assistant/associate/full, got {row['rank']!r}"
            ) from None
        method_token = row["collection_method"].lower() or CollectionMethod.AUTO.value
        try:
            method = CollectionMethod(method_token)
        except ValueError:
            raise RowError(i, f"unknown collection_method {row['collection_method']!r}") from None
        if not row["university"] or not row["department"]:
            raise RowError(i, "university and department are required")
        try:
            record = FacultyRecord(
                faculty_id=fid,
                name_raw=row["name"],
                university=row["university"],
                department=row["department"],
                rank=rank,
                scholar_profile_id=row["scholar_id"] or None,
                t10=_opt_int(row["t10"], "t10", i),
                h_index=_opt_int(row["h_index"], "h_index", i),
                i10=_opt_int(row["i10"], "i10", i),
                collection_method=method,
            )
        except InvalidName as exc:
            raise RowError(i, str(exc)) from None
        faculty.append(record)
    return build_snapshot(faculty, label, collected_at)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return value.value
    return str(value)


def serialize_roster(snapshot: Snapshot) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROSTER_COLUMNS)
    for f in snapshot.faculty:
        writer.writerow([_cell(v) for v in (
            f.faculty_id, f.name_raw, f.university, f.department, f.rank,
            f.scholar_profile_id, f.t10, f.h_index, f.i10, f.collection_method,
        )])
    return buf.getvalue().encode("utf-8")


def save_snapshot(snapshot: Snapshot, parent: str | Path) -> Path:
    """Write ``snapshot-<label>/roster.csv`` and ``meta.json`` under *parent*."""
    path = Path(parent) / f"snapshot-{snapshot.label}"
    path.mkdir(parents=True, exist_ok=True)
    (path / "roster.csv").write_bytes(serialize_roster(snapshot))
    meta = {
        "label": snapshot.label,
        "collected_at": snapshot.collected_at.isoformat() if snapshot.collected_at else None,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
    collected = meta.get("collected_at")
    return parse_roster(
        (path / "roster.csv").read_bytes(),
        label=meta.get("label", ""),
        collected_at=dt.date.fromisoformat(collected) if collected else None,
    )


# --- score tables ---------------------------------------------------------

@dataclass(frozen=True)
class ScoreTable:
    source: ScoreSource
    year: int | None
    entries: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "source", ScoreSource(self.source))
        entries = dict(self.entries)
        for univ, score in entries.items():
            _check_score(self.source, univ, score)
        object.__setattr__(self, "entries", MappingProxyType(entries))

    def __eq__(self, other):
        if not isinstance(other, ScoreTable):
            return NotImplemented
        return (self.source, self.year, dict(self.entries)) == (other.source, other.year, dict(other.entries))

    def __hash__(self):
        return hash((self.source, self.year, tuple(sorted(self.entries.items()))))

    def __len__(self):
        return len(self.entries)


def _check_score(source: ScoreSource, univ: str, score: float) -> None:
    if not math.isfinite(score):
        raise RangeError(f"{univ}: score must be finite, got {score}")
    if source is ScoreSource.USN and not 1.0 <= score <= 5.0:
        raise RangeError(f"{univ}: USN score {score} outside [1, 5]")
    if source is ScoreSource.CSRANKINGS and score <= 0:
        raise RangeError(f"{univ}: CSRankings score {score} must be positive")


def parse_score_table(data: bytes | str, source: ScoreSource | str,
                      year: int | None = None) -> ScoreTable:
    """Read a ``university,score`` CSV. Extra columns (e.g. ``rank``) are ignored."""
    source = ScoreSource(source)
    reader = csv.DictReader(io.StringIO(_decode(data), newline=""))
    _check_header(reader.fieldnames, SCORE_COLUMNS)
    entries: dict[str, float] = {}
    for i, raw in enumerate(reader, start=1):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        univ = row["university"]
        if not univ:
            raise RowError(i, "university is empty")
        if univ in entries:
            raise DuplicateError(f"row {i}: duplicate university {univ!r}")
        try:
            score = float(row["score"])
        except ValueError:
            raise RowError(i, f"score is not a number: {row['score']!r}") from None
        try:
            _check_score(source, univ, score)
        except RangeError as exc:
            raise RangeError(f"row {i}: {exc}") from None
        entries[univ] = score
    return ScoreTable(source, year, entries)


def serialize_score_table(table: ScoreTable) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for univ in sorted(table.entries):
        writer.writerow([univ, repr(float(table.entries[univ]))])
    return buf.getvalue().encode("utf-8")


# --- identity matching ----------------------------------------------------

@dataclass
class MatchResult:
    """Faculty identity map between two snapshots.

    ``pairs`` maps faculty ids in the first snapshot to ids in the second.
    ``ambiguous`` lists ``(canonical_name, ids_in_a, ids_in_b)`` groups that
    could not be resolved without guessing; none of those ids are matched.
    """

    pairs: dict[str, str]
    ambiguous: list[tuple[str, tuple[str, ...], tuple[str, ...]]]

    def __len__(self):
        return len(self.pairs)


def match_faculty(a: Snapshot, b: Snapshot) -> MatchResult:
    by_name_a: dict[str, list[FacultyRecord]] = defaultdict(list)
    by_name_b: dict[str, list[FacultyRecord]] = defaultdict(list)
    for f in a.faculty:
        by_name_a[f.name_canonical].append(f)
    for f in b.faculty:
        by_name_b[f.name_canonical].append(f)

    pairs: dict[str, str] = {}
    ambiguous = []
    for name in sorted(by_name_a.keys() & by_name_b.keys()):
        group_a, group_b = by_name_a[name], by_name_b[name]
        left_a = list(group_a)
        left_b = list(group_b)
        # same-university pass
        for univ in sorted({f.university for f in group_a} & {f.university for f in group_b}):
            here_a = [f for f in group_a if f.university == univ]
            here_b = [f for f in group_b if f.university == univ]
            if len(here_a) == 1 and len(here_b) == 1:
                pairs[here_a[0].faculty_id] = here_b[0].faculty_id
                left_a.remove(here_a[0])
                left_b.remove(here_b[0])
        # movers: name unique nationally in both snapshots
        if len(group_a) == 1 and len(group_b) == 1 and left_a and left_b:
            pairs[left_a[0].faculty_id] = left_b[0].faculty_id
            left_a, left_b = [], []
        if left_a and left_b:
            ambiguous.append((
                name,
                tuple(f.faculty_id for f in left_a),
                tuple(f.faculty_id for f in left_b),
            ))
    return MatchResult(pairs, ambiguous)
