"""Shared fixtures: tiny hand-built tables and random table factories."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from trendsweep.aggregate import FeatureMatrix
from trendsweep.ingest import (
    ColumnKind,
    ColumnSpec,
    DatasetSchema,
    DischargeTable,
)

ACCEPTANCE_RESULTS: dict[str, str] = {}


def small_schema() -> DatasetSchema:
    return DatasetSchema(
        columns=(
            ColumnSpec("diagnosis", ColumnKind.CATEGORICAL),
            ColumnSpec("county", ColumnKind.CATEGORICAL),
            ColumnSpec("cost", ColumnKind.NUMERIC),
            ColumnSpec("year", ColumnKind.YEAR),
        ),
        measure_column="cost",
        year_column="year",
    )


def table_from_rows(rows: list[tuple[str, str, float, int]]) -> DischargeTable:
    """Build a table from (diagnosis, county, cost, year) tuples."""
    diag_dict: dict[str, int] = {}
    county_dict: dict[str, int] = {}
    diag, county, costs, years = [], [], [], []
    for d, c, v, y in rows:
        diag.append(diag_dict.setdefault(d, len(diag_dict)))
        county.append(county_dict.setdefault(c, len(county_dict)))
        costs.append(v)
        years.append(y)
    return DischargeTable(
        schema=small_schema(),
        codes={
            "diagnosis": np.asarray(diag, dtype=np.int32),
            "county": np.asarray(county, dtype=np.int32),
        },
        dictionaries={"diagnosis": tuple(diag_dict), "county": tuple(county_dict)},
        costs=np.asarray(costs, dtype=np.float64),
        years=np.asarray(years, dtype=np.int64),
    )


def random_table(rng: np.random.Generator, n_rows: int, n_diag: int = 12,
                 n_county: int = 5, years: tuple[int, ...] = (2009, 2010, 2011, 2012)) -> DischargeTable:
    """Random table built directly from arrays (fast path for oracle tests)."""
    return DischargeTable(
        schema=small_schema(),
        codes={
            "diagnosis": rng.integers(n_diag, size=n_rows).astype(np.int32),
            "county": rng.integers(n_county, size=n_rows).astype(np.int32),
        },
        dictionaries={
            "diagnosis": tuple(f"diag_{i:02d}" for i in range(n_diag)),
            "county": tuple(f"county_{i}" for i in range(n_county)),
        },
        costs=np.round(rng.uniform(10.0, 5000.0, size=n_rows), 2),
        years=rng.choice(np.asarray(years, dtype=np.int64), size=n_rows),
    )


def make_matrix(values, labels=None) -> FeatureMatrix:
    vals = np.asarray(values, dtype=np.float64)
    if labels is None:
        labels = tuple((f"row_{i:03d}",) for i in range(vals.shape[0]))
    return FeatureMatrix(
        row_labels=tuple(labels),
        col_labels=tuple(range(vals.shape[1])),
        values=vals.copy(),
    )


def write_csv_file(path: Path, header: list[str], rows: list[list[str]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture
def four_row_table() -> DischargeTable:
    # the canonical 4-row example: counts [[2,1],[0,1]], totals [[30,30],[0,40]]
    return table_from_rows(
        [
            ("DiagA", "c1", 10.0, 2009),
            ("DiagA", "c1", 20.0, 2009),
            ("DiagA", "c1", 30.0, 2010),
            ("DiagB", "c1", 40.0, 2010),
        ]
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.fspath.basename == "test_acceptance.py":
        ACCEPTANCE_RESULTS[item.name] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"{outcome}: {name}")
