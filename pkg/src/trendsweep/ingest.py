"""Load, validate and dictionary-encode delimited discharge records.

The loader produces an immutable columnar table: every categorical column
is stored as integer codes plus a per-column dictionary, the cost column
as float64 and the year column as int64. After construction the table is
safe to share across threads without locking.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "ColumnKind",
    "ColumnSpec",
    "DatasetSchema",
    "ErrorPolicy",
    "DischargeTable",
    "DatasetSummary",
    "LoadError",
    "load_csv",
    "summarize",
    "load_schema_profile",
    "parse_schema_profile",
    "sparcs_schema",
]


class ColumnKind(str, Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"
    YEAR = "year"


class ErrorPolicy(str, Enum):
    SKIP = "skip"
    STRICT = "strict"


class LoadError(ValueError):
    """Raised when a file cannot be loaded under the active policy."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind
    required: bool = True

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("column name must be non-empty")


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a discharge dataset.

    Exactly one column has kind ``year``; ``measure_column`` names the
    numeric cost column and ``year_column`` the year column.
    """

    columns: tuple[ColumnSpec, ...]
    measure_column: str
    year_column: str

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        years = [c for c in self.columns if c.kind is ColumnKind.YEAR]
        if len(years) != 1:
            raise ValueError("schema must have exactly one year column")
        if years[0].name != self.year_column:
            raise ValueError(f"year_column {self.year_column!r} is not the year column")
        by_name = {c.name: c for c in self.columns}
        measure = by_name.get(self.measure_column)
        if measure is None or measure.kind is not ColumnKind.NUMERIC:
            raise ValueError(f"measure_column {self.measure_column!r} is not a numeric column")

    @property
    def dimensions(self) -> tuple[str, ...]:
        """Names of the categorical columns, in schema order."""
        return tuple(c.name for c in self.columns if c.kind is ColumnKind.CATEGORICAL)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def without(self, names: set[str]) -> "DatasetSchema":
        kept = tuple(c for c in self.columns if c.name not in names)
        return DatasetSchema(kept, self.measure_column, self.year_column)


@dataclass(frozen=True)
class DischargeTable:
    """Immutable columnar record store.

    ``codes[dim]`` holds int32 dictionary codes for each categorical
    dimension, ``dictionaries[dim]`` maps code -> original string. Costs
    are finite and >= 0 by construction.
    """

    schema: DatasetSchema
    codes: dict[str, np.ndarray]
    dictionaries: dict[str, tuple[str, ...]]
    costs: np.ndarray
    years: np.ndarray
    rejected: dict[str, int] = field(default_factory=dict)
    load_warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = self.costs.shape[0]
        if self.years.shape[0] != n:
            raise ValueError("year column length mismatch")
        for dim, arr in self.codes.items():
            if arr.shape[0] != n:
                raise ValueError(f"column {dim!r} length mismatch")
            if n and (arr.min() < 0 or arr.max() >= len(self.dictionaries[dim])):
                raise ValueError(f"column {dim!r} has codes outside its dictionary")
        if n and (not np.all(np.isfinite(self.costs)) or self.costs.min() < 0):
            raise ValueError("costs must be finite and >= 0")
        for arr in (self.costs, self.years, *self.codes.values()):
            arr.setflags(write=False)

    @property
    def row_count(self) -> int:
        return int(self.costs.shape[0])

    def dimension_values(self, dim: str) -> tuple[str, ...]:
        if dim not in self.dictionaries:
            raise KeyError(f"unknown dimension {dim!r}; have {sorted(self.dictionaries)}")
        return self.dictionaries[dim]

    def encode_values(self, dim: str, values: tuple[str, ...] | list[str]) -> np.ndarray:
        """Map value strings to this table's codes, erroring on unknowns."""
        lookup = {v: i for i, v in enumerate(self.dimension_values(dim))}
        out = np.empty(len(values), dtype=np.int32)
        for i, v in enumerate(values):
            if v not in lookup:
                raise KeyError(f"value {v!r} not present in dimension {dim!r}")
            out[i] = lookup[v]
        return out

    @cached_property
    def fingerprint(self) -> str:
        """Order-independent content hash of the accepted rows.

        Each row is canonicalized to a byte string and hashed; the 256-bit
        per-row digests are summed modulo 2**256 so that file re-ordering
        does not change the identity.
        """
        dims = self.schema.dimensions
        dicts = [self.dictionaries[d] for d in dims]
        code_cols = [self.codes[d] for d in dims]
        acc = 0
        mask = (1 << 256) - 1
        for i in range(self.row_count):
            parts = [dicts[j][code_cols[j][i]] for j in range(len(dims))]
            parts.append(repr(float(self.costs[i])))
            parts.append(str(int(self.years[i])))
            digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
            acc = (acc + int.from_bytes(digest, "big")) & mask
        return f"{acc:064x}"


@dataclass(frozen=True)
class DatasetSummary:
    row_count: int
    distinct_values: dict[str, int]
    year_range: tuple[int, int] | None
    total_cost: float


def summarize(table: DischargeTable) -> DatasetSummary:
    if table.row_count == 0:
        year_range = None
        total = 0.0
    else:
        year_range = (int(table.years.min()), int(table.years.max()))
        total = float(np.sum(table.costs))
    return DatasetSummary(
        row_count=table.row_count,
        distinct_values={d: len(table.dictionaries[d]) for d in table.schema.dimensions},
        year_range=year_range,
        total_cost=total,
    )


def _parse_cost(raw: str) -> float:
    cleaned = raw.strip().lstrip("$").replace(",", "")
    value = float(cleaned)
    if value == 0.0:
        return 0.0  # normalize -0.0
    return value


def load_csv(
    path: str | Path,
    schema: DatasetSchema,
    policy: ErrorPolicy = ErrorPolicy.SKIP,
) -> DischargeTable:
    """Load a header-first CSV into a DischargeTable.

    Required columns must appear in the header (extra file columns are
    ignored). Rows that cannot be parsed are dropped and counted per
    reason under ``skip``, or abort the load naming the offending data
    row under ``strict``.
    """
    path = Path(path)
    warnings: list[str] = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: file has no header row") from None
        position = {name.strip(): i for i, name in enumerate(header)}

        missing_required = [
            c.name
            for c in schema.columns
            if c.name not in position
            and (c.required or c.name in (schema.measure_column, schema.year_column))
        ]
        if missing_required:
            raise LoadError(f"{path}: missing required column(s) {missing_required}")
        absent_optional = {c.name for c in schema.columns if c.name not in position}
        if absent_optional:
            warnings.append(f"optional column(s) absent from file: {sorted(absent_optional)}")
            schema = schema.without(absent_optional)

        dims = schema.dimensions
        dim_pos = [position[d] for d in dims]
        cost_pos = position[schema.measure_column]
        year_pos = position[schema.year_column]
        needed = max([cost_pos, year_pos, *dim_pos]) + 1

        encoders: list[dict[str, int]] = [{} for _ in dims]
        code_cols: list[list[int]] = [[] for _ in dims]
        costs: list[float] = []
        years: list[int] = []
        rejected: dict[str, int] = {}

        def reject(row_no: int, reason: str, detail: str) -> None:
            if policy is ErrorPolicy.STRICT:
                raise LoadError(f"{path}: data row {row_no}: {detail}")
            rejected[reason] = rejected.get(reason, 0) + 1

        for row_no, row in enumerate(reader, start=1):
            if not row:
                reject(row_no, "blank_line", "blank line")
                continue
            if len(row) < needed:
                reject(row_no, "short_row", f"expected at least {needed} fields, got {len(row)}")
                continue
            try:
                cost = _parse_cost(row[cost_pos])
            except ValueError:
                reject(row_no, "bad_cost", f"unparsable cost {row[cost_pos]!r}")
                continue
            if not np.isfinite(cost):
                reject(row_no, "bad_cost", f"non-finite cost {row[cost_pos]!r}")
                continue
            if cost < 0:
                reject(row_no, "negative_cost", f"negative cost {row[cost_pos]!r}")
                continue
            try:
                year = int(row[year_pos].strip())
            except ValueError:
                reject(row_no, "bad_year", f"unparsable year {row[year_pos]!r}")
                continue
            values = [row[p].strip() for p in dim_pos]
            if any(v == "" for v in values):
                empty = dims[values.index("")]
                reject(row_no, "missing_value", f"empty value in column {empty!r}")
                continue
            for j, v in enumerate(values):
                enc = encoders[j]
                code = enc.get(v)
                if code is None:
                    code = len(enc)
                    enc[v] = code
                code_cols[j].append(code)
            costs.append(cost)
            years.append(year)

    return DischargeTable(
        schema=schema,
        codes={d: np.asarray(code_cols[j], dtype=np.int32) for j, d in enumerate(dims)},
        dictionaries={d: tuple(encoders[j]) for j, d in enumerate(dims)},
        costs=np.asarray(costs, dtype=np.float64),
        years=np.asarray(years, dtype=np.int64),
        rejected=rejected,
        load_warnings=tuple(warnings),
    )


_KIND_ALIASES = {
    "categorical": ColumnKind.CATEGORICAL,
    "numeric": ColumnKind.NUMERIC,
    "year": ColumnKind.YEAR,
}


def parse_schema_profile(text: str) -> DatasetSchema:
    """Parse a schema profile: one ``Column Name = kind [optional]`` per line.

    Lines starting with ``#`` and blank lines are ignored. Exactly one
    column must be ``year`` and exactly one ``numeric``; the numeric
    column becomes the measure column.
    """
    columns: list[ColumnSpec] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"profile line {line_no}: expected 'Name = kind', got {stripped!r}")
        name, _, rhs = stripped.partition("=")
        tokens = rhs.split()
        if not tokens or tokens[0] not in _KIND_ALIASES:
            raise ValueError(f"profile line {line_no}: unknown kind {rhs.strip()!r}")
        required = "optional" not in tokens[1:]
        columns.append(ColumnSpec(name.strip(), _KIND_ALIASES[tokens[0]], required))
    numeric = [c.name for c in columns if c.kind is ColumnKind.NUMERIC]
    years = [c.name for c in columns if c.kind is ColumnKind.YEAR]
    if len(numeric) != 1:
        raise ValueError(f"profile must declare exactly one numeric column, found {numeric}")
    if len(years) != 1:
        raise ValueError(f"profile must declare exactly one year column, found {years}")
    return DatasetSchema(tuple(columns), measure_column=numeric[0], year_column=years[0])


def load_schema_profile(path: str | Path) -> DatasetSchema:
    return parse_schema_profile(Path(path).read_text(encoding="utf-8"))


def sparcs_schema() -> DatasetSchema:
    """Built-in profile for the New York State inpatient discharge export."""
    cats = [
        "Hospital County",
        "Facility Name",
        "Age Group",
        "Zip Code - 3 digits",
        "Gender",
        "Race",
        "Ethnicity",
        "CCS Diagnosis Description",
        "CCS Procedure Description",
        "Payment Typology 1",
    ]
    columns = [ColumnSpec(name, ColumnKind.CATEGORICAL, required=False) for name in cats]
    columns.append(ColumnSpec("Total Costs", ColumnKind.NUMERIC))
    columns.append(ColumnSpec("Discharge Year", ColumnKind.YEAR))
    return DatasetSchema(tuple(columns), measure_column="Total Costs", year_column="Discharge Year")
