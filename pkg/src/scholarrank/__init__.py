"""Citation-based ranking of doctoral CS programs from faculty t10 values."""

from .errors import ScholarRankError
from .harvest import FetchPolicy, ScholarProfile, derive_t10, harvest_faculty, parse_profile_page
from .metrics import MetricVector, NationalDistribution, compute_metric_table
from .model import PUBLISHED_MODEL, LinearModel, build_ensemble, rank_programs, score_department
from .roster import FacultyRecord, ScoreTable, Snapshot, normalize_name, parse_roster

__version__ = "0.1.0"

__all__ = [
    "FacultyRecord", "FetchPolicy", "LinearModel", "MetricVector", "NationalDistribution",
    "PUBLISHED_MODEL", "ScholarProfile", "ScholarRankError", "ScoreTable", "Snapshot",
    "build_ensemble", "compute_metric_table", "derive_t10", "harvest_faculty",
    "normalize_name", "parse_profile_page", "parse_roster", "rank_programs", "score_department",
]
