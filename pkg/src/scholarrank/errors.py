"""Exception hierarchy.

Every validation failure is a ``ValueError`` so callers that only care about
"bad input" can catch that; the CLI maps all of them to exit code 1.
"""


class ScholarRankError(ValueError):
    """Base class for all validation and computation errors."""


class InvalidName(ScholarRankError):
    pass


class SchemaError(ScholarRankError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column: {column!r}")


class RowError(ScholarRankError):
    """A single CSV row failed validation; ``row`` is the 1-based data row."""

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateError(ScholarRankError):
    pass


class RangeError(ScholarRankError):
    pass


class ParseError(ScholarRankError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"publication row {row}: {message}"
        super().__init__(message)


class MergeError(ScholarRankError):
    pass


class AmbiguousProfile(ScholarRankError):
    def __init__(self, faculty_id, candidates):
        self.faculty_id = faculty_id
        self.candidates = tuple(candidates)
        super().__init__(
            f"{faculty_id}: {len(self.candidates)} candidate profiles "
            f"({', '.join(self.candidates)})"
        )


class EmptyDistribution(ScholarRankError):
    pass


class EmptyInput(ScholarRankError):
    pass


class InsufficientData(ScholarRankError):
    pass


class SingularFit(ScholarRankError):
    pass


class MissingMeasure(ScholarRankError):
    pass


class ShapeError(ScholarRankError):
    pass


class DegenerateInput(ScholarRankError):
    pass


class CoverageError(ScholarRankError):
    def __init__(self, only_a, only_b):
        self.only_a = tuple(sorted(only_a))
        self.only_b = tuple(sorted(only_b))
        super().__init__(
            f"university sets differ: only in a={list(self.only_a)}, "
            f"only in b={list(self.only_b)}"
        )
