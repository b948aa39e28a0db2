"""Split-apply-combine pivots over the columnar table.

Builds labeled feature matrices (group values x year bins) for a chosen
measure, with optional percent-change rebasing against a base year.
Cost cells hold the correctly rounded sum of their value multiset
(math.fsum), which makes the output exactly invariant under row
permutations of the input table.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .ingest import DischargeTable

__all__ = [
    "Measure",
    "PivotSpec",
    "FeatureMatrix",
    "pivot",
    "rebase_percent_change",
    "pivot_subset",
]


class Measure(str, Enum):
    COUNT = "count"
    TOTAL_COST = "total_cost"
    MEAN_COST = "mean_cost"


class EmptyCellError(ValueError):
    """A mean_cost cell had no rows under the ``error`` policy."""


@dataclass(frozen=True)
class PivotSpec:
    """What to group by, what to measure, and how to rebase.

    ``col_dim`` defaults to the schema's year column; it exists so a
    serialized spec is self-describing.
    """

    row_dims: tuple[str, ...]
    measure: Measure
    col_dim: str | None = None
    rebase: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= len(self.row_dims) <= 2:
            raise ValueError("row_dims must name 1 or 2 dimensions")
        if len(set(self.row_dims)) != len(self.row_dims):
            raise ValueError("row_dims must be distinct")


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense labeled matrix: one row per group label tuple, one column per year."""

    row_labels: tuple[tuple[str, ...], ...]
    col_labels: tuple[int, ...]
    values: np.ndarray
    provenance: PivotSpec | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("values must be 2-dimensional")
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"shape {self.values.shape} does not match "
                f"{len(self.row_labels)} labels x {len(self.col_labels)} years"
            )
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("matrix values must all be finite")
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def take(self, indices: np.ndarray | list[int]) -> "FeatureMatrix":
        """Row subset with labels preserved."""
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureMatrix(
            row_labels=tuple(self.row_labels[i] for i in idx),
            col_labels=self.col_labels,
            values=self.values[idx].copy(),
            provenance=self.provenance,
            warnings=self.warnings,
        )

    def label_index(self) -> dict[tuple[str, ...], int]:
        return {label: i for i, label in enumerate(self.row_labels)}

    def to_dict(self) -> dict:
        prov = None
        if self.provenance is not None:
            prov = {
                "row_dims": list(self.provenance.row_dims),
                "col_dim": self.provenance.col_dim,
                "measure": self.provenance.measure.value,
                "rebase": self.provenance.rebase,
            }
        return {
            "row_labels": [list(t) for t in self.row_labels],
            "col_labels": list(self.col_labels),
            "values": [[float(v) for v in row] for row in self.values],
            "provenance": prov,
            "warnings": list(self.warnings),
        }

    def to_csv_text(self) -> str:
        """Delimited form: label columns first, then one column per year.

        Floats use 17 significant digits so parsing the output recovers
        every value exactly.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        ndims = len(self.row_labels[0]) if self.row_labels else (
            len(self.provenance.row_dims) if self.provenance else 1
        )
        if self.provenance is not None and len(self.provenance.row_dims) == ndims:
            head = list(self.provenance.row_dims)
        else:
            head = [f"dim{i + 1}" for i in range(ndims)]
        writer.writerow(head + [str(y) for y in self.col_labels])
        for label, row in zip(self.row_labels, self.values):
            writer.writerow(list(label) + [format(v, ".17g") for v in row])
        return buf.getvalue()


def _resolve_dims(table: DischargeTable, names: tuple[str, ...]) -> None:
    known = table.schema.dimensions
    for name in names:
        if name not in known:
            raise KeyError(f"unknown dimension {name!r}; available: {list(known)}")


def _aggregate(
    table: DischargeTable,
    row_dims: tuple[str, ...],
    measure: Measure,
    mask: np.ndarray | None,
    empty_cells: str,
) -> tuple[list[tuple[str, ...]], list[int], np.ndarray, list[str]]:
    years = table.years if mask is None else table.years[mask]
    costs = table.costs if mask is None else table.costs[mask]
    dim_codes = [
        table.codes[d] if mask is None else table.codes[d][mask] for d in row_dims
    ]
    warnings: list[str] = []

    if years.size == 0:
        return [], [], np.zeros((0, 0), dtype=np.float64), warnings

    year_labels = np.unique(years)
    t = year_labels.size
    t_idx = np.searchsorted(year_labels, years)

    if len(row_dims) == 1:
        gkey = dim_codes[0].astype(np.int64)
        card = (len(table.dictionaries[row_dims[0]]),)
    else:
        card = (len(table.dictionaries[row_dims[0]]), len(table.dictionaries[row_dims[1]]))
        gkey = dim_codes[0].astype(np.int64) * card[1] + dim_codes[1]

    combined = gkey * t + t_idx
    order = np.argsort(combined, kind="stable")
    comb_sorted = combined[order]
    starts = np.flatnonzero(np.r_[True, comb_sorted[1:] != comb_sorted[:-1]])
    cell_keys = comb_sorted[starts]
    cell_counts = np.diff(np.r_[starts, comb_sorted.size]).astype(np.float64)

    observed_groups = np.unique(cell_keys // t)
    group_row = {int(g): i for i, g in enumerate(observed_groups)}
    n = observed_groups.size

    # decode group ids to label tuples (also used by the empty-cell error)
    if len(row_dims) == 1:
        dictionary = table.dictionaries[row_dims[0]]
        labels = [(dictionary[int(g)],) for g in observed_groups]
    else:
        d0 = table.dictionaries[row_dims[0]]
        d1 = table.dictionaries[row_dims[1]]
        labels = [(d0[int(g) // card[1]], d1[int(g) % card[1]]) for g in observed_groups]

    matrix = np.zeros((n, t), dtype=np.float64)
    rows_for_cells = np.fromiter(
        (group_row[int(k // t)] for k in cell_keys), dtype=np.intp, count=cell_keys.size
    )
    cols_for_cells = (cell_keys % t).astype(np.intp)

    if measure is Measure.COUNT:
        matrix[rows_for_cells, cols_for_cells] = cell_counts
    else:
        # correctly rounded per-cell sums: exact, hence order-independent
        sorted_costs = costs[order]
        bounds = np.r_[starts, comb_sorted.size]
        cell_sums = np.fromiter(
            (math.fsum(sorted_costs[a:b]) for a, b in zip(bounds[:-1], bounds[1:])),
            dtype=np.float64,
            count=cell_keys.size,
        )
        if measure is Measure.TOTAL_COST:
            matrix[rows_for_cells, cols_for_cells] = cell_sums
        else:
            n_empty = n * t - cell_keys.size
            if n_empty and empty_cells == "error":
                flat = np.zeros(n * t, dtype=bool)
                flat[rows_for_cells * t + cols_for_cells] = True
                first = int(np.flatnonzero(~flat)[0])
                raise EmptyCellError(
                    f"mean_cost cell ({'/'.join(labels[first // t])}, year "
                    f"{int(year_labels[first % t])}) has no rows"
                )
            if n_empty:
                warnings.append(f"{n_empty} empty mean_cost cell(s) emitted as 0")
            matrix[rows_for_cells, cols_for_cells] = cell_sums / cell_counts

    label_order = sorted(range(n), key=lambda i: labels[i])
    matrix = matrix[label_order]
    labels = [labels[i] for i in label_order]
    return labels, [int(y) for y in year_labels], matrix, warnings


def pivot(
    table: DischargeTable,
    spec: PivotSpec,
    empty_cells: str = "zero",
) -> FeatureMatrix:
    """Group rows by ``spec.row_dims``, bin by year, apply the measure.

    Groups with no rows in a given year get 0 for count/total_cost; empty
    mean_cost cells follow ``empty_cells`` ("zero" emits 0 with a warning,
    "error" raises). Row labels are sorted lexicographically and year
    columns ascend. If ``spec.rebase`` is set the result is rebased to
    percent change against that year.
    """
    _resolve_dims(table, spec.row_dims)
    if spec.col_dim is not None and spec.col_dim != table.schema.year_column:
        raise ValueError(
            f"col_dim {spec.col_dim!r} is not the year column {table.schema.year_column!r}"
        )
    labels, years, values, warnings = _aggregate(
        table, spec.row_dims, spec.measure, None, empty_cells
    )
    matrix = FeatureMatrix(
        row_labels=tuple(labels),
        col_labels=tuple(years),
        values=values,
        provenance=replace(spec, col_dim=table.schema.year_column, rebase=None),
        warnings=tuple(warnings),
    )
    if spec.rebase is not None:
        matrix = rebase_percent_change(matrix, spec.rebase)
    return matrix


def rebase_percent_change(matrix: FeatureMatrix, base_year: int) -> FeatureMatrix:
    """Convert each row to percent change relative to its base-year value.

    Rows whose base-year value is 0 have no defined baseline; they are
    dropped and recorded in the result's warnings.
    """
    if base_year not in matrix.col_labels:
        raise ValueError(
            f"base year {base_year} not present; available years: {list(matrix.col_labels)}"
        )
    b = matrix.col_labels.index(base_year)
    base = matrix.values[:, b]
    keep = base != 0.0
    warnings = list(matrix.warnings)
    for i in np.flatnonzero(~keep):
        warnings.append(
            f"dropped {'/'.join(matrix.row_labels[int(i)])}: value 0 in base year {base_year}"
        )
    kept_vals = matrix.values[keep]
    kept_base = base[keep][:, None]
    rebased = 100.0 * (kept_vals - kept_base) / kept_base
    provenance = (
        replace(matrix.provenance, rebase=base_year) if matrix.provenance is not None else None
    )
    return FeatureMatrix(
        row_labels=tuple(lbl for lbl, k in zip(matrix.row_labels, keep) if k),
        col_labels=matrix.col_labels,
        values=rebased,
        provenance=provenance,
        warnings=tuple(warnings),
    )


def pivot_subset(
    table: DischargeTable,
    primary_dim: str,
    primary_values: tuple[str, ...] | list[str],
    subset_dim: str,
    measure: Measure,
    rebase: int | None = None,
    empty_cells: str = "zero",
) -> FeatureMatrix:
    """Pivot restricted to chosen primary values, crossed with a second dimension.

    Equivalent to filtering the table to ``primary_values`` and pivoting
    with row_dims (primary_dim, subset_dim): rows are the observed
    (primary value, subset value) pairs, flattening the per-subset trend
    cube into at most ``len(primary_values) * S`` rows of T year columns.
    """
    if not primary_values:
        raise ValueError("primary_values must be non-empty")
    if subset_dim == primary_dim:
        raise ValueError("subset_dim must differ from primary_dim")
    _resolve_dims(table, (primary_dim, subset_dim))
    wanted = table.encode_values(primary_dim, tuple(primary_values))
    mask = np.isin(table.codes[primary_dim], wanted)
    labels, years, values, warnings = _aggregate(
        table, (primary_dim, subset_dim), measure, mask, empty_cells
    )
    matrix = FeatureMatrix(
        row_labels=tuple(labels),
        col_labels=tuple(years),
        values=values,
        provenance=PivotSpec(
            row_dims=(primary_dim, subset_dim),
            measure=measure,
            col_dim=table.schema.year_column,
            rebase=None,
        ),
        warnings=tuple(warnings),
    )
    if rebase is not None:
        matrix = rebase_percent_change(matrix, rebase)
    return matrix
