from __future__ import annotations


class DaldError(Exception):
    """Base class for every error raised by the library."""


class DimensionError(DaldError, ValueError):
    pass


class ParameterError(DaldError, ValueError):
    pass


class ConfigError(DaldError, ValueError):
    pass


class CapabilityError(DaldError):
    pass


class TopologyError(DaldError):
    pass


class PresetError(DaldError, ValueError):
    pass


class PartitionError(DaldError):
    pass


class DivergenceError(DaldError, ArithmeticError):
    pass


class NonFiniteError(DaldError, FloatingPointError):
    """A NaN or Inf showed up in an iterate; carries where it happened."""

    def __init__(self, message: str, *, k: int | None = None, v: int | None = None, client: int | None = None):
        self.k = k
        self.v = v
        self.client = client
        fields = (("k", k), ("v", v), ("client", client))
        where = ", ".join(f"{name}={value}" for name, value in fields if value is not None)
        super().__init__(f"{message} ({where})" if where else message)


class SweepError(DaldError):
    """A client solve failed inside an inner sweep."""

    def __init__(self, message: str, *, client: int, level: int | None = None):
        self.client = client
        self.level = level
        location = f"client {client}" if level is None else f"client {client}, level {level}"
        super().__init__(f"{message} [{location}]")


class DataFormatError(DaldError, ValueError):
    """Malformed dataset file; row/column are 1-based positions in the file when known."""

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"{message} (row {row}, column {column})"
        elif row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


class ExperimentError(DaldError):
    """A harness run failed; names the algorithm, client count and seed."""

    def __init__(self, message: str, *, algorithm: str, n: int, seed: int):
        self.algorithm = algorithm
        self.n = n
        self.seed = seed
        super().__init__(f"{message} [algorithm={algorithm}, n={n}, seed={seed}]")
