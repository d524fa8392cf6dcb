"""Exception hierarchy shared by the whole package."""


class TpisError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TpisError):
    """Input dimensions do not match what a fitted object expects."""


class IncompleteFeatures(TpisError):
    """An operation that requires complete features received missing values."""


class EmptyDataset(TpisError):
    """A non-empty matrix or record list was required."""


class InsufficientData(TpisError):
    """Too few observations for the requested statistic."""


class UnimputableColumn(TpisError):
    """A column is missing in every row, so no donor values exist."""


class InsufficientClassSize(TpisError):
    """A class has fewer records than the requested per-class sample size."""


class DegenerateLabels(TpisError):
    """Training labels contain only one class."""


class DegenerateFold(TpisError):
    """A cross-validation fold does not contain both classes."""


class MissingMetaFeatures(TpisError):
    """A feature set that includes meta-features was selected without them."""


class StepTwoUnavailable(TpisError):
    """Laboratory / chest X-ray features are required but absent."""


class EmptyEvaluation(TpisError):
    """Metrics were requested over zero records."""


class InvalidTable(TpisError):
    """Published-fraction tables are inconsistent (column sums exceed 1)."""


class SpecError(TpisError):
    """A cohort specification violates its own constraints."""


class SchemaError(TpisError):
    """A dataset file header does not match the canonical manifest."""


class CellError(TpisError):
    """A dataset cell could not be parsed; carries its row and column."""

    def __init__(self, row: int, col: str, message: str):
        super().__init__(f"row {row}, column {col!r}: {message}")
        self.row = row
        self.col = col


class ArchiveError(TpisError):
    """A model archive is corrupted or structurally invalid."""


class VersionError(TpisError):
    """A model archive was written by an incompatible format version."""


class ConfigError(TpisError):
    """A run configuration failed validation."""
