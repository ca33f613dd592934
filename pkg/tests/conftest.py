import itertools
from pathlib import Path

import pytest

from scholarrank.roster import FacultyRecord, build_snapshot

FIXTURES = Path(__file__).parent / "fixtures"
_ids = itertools.count(1)


def fac(name, university="U1", rank="full", t10=None, fid=None, scholar_id=None, **kw):
    return FacultyRecord(
        faculty_id=fid or f"f{next(_ids)}",
        name_raw=name,
        university=university,
        department="CS",
        rank=rank,
        scholar_profile_id=scholar_id,
        t10=t10,
        **kw,
    )


def snap(*faculty, label="t"):
    return build_snapshot(faculty, label)


@pytest.fixture
def scholar_fixtures():
    return FIXTURES / "scholar"


# --- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per numbered criterion; printed in the summary."""
    def record(number, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number:>2}: {status}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
