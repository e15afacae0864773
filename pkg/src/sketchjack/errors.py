"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid argument value (dimension, rank, seed, norm order...)."""


class MatrixFormatError(ValueError):
    """Malformed binary matrix file."""


class IngestionError(ValueError):
    """Tabular data that cannot be turned into a kernel matrix."""


class CsvParseError(IngestionError):
    """Non-numeric cell; carries the 1-based data row and column name."""

    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")


class DegeneracyError(ArithmeticError):
    """A replicate-dependent quantity is ill-defined or numerically singular."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class MemoryCapError(RuntimeError):
    """Dense accumulation would exceed the configured memory cap."""
