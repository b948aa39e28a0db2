"""Brute-force reference implementations used to check the engine paths.

Nothing here shares code with the columnar pivot or the clustering core;
these functions favor obvious correctness over speed and are only meant
for test corpora.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .aggregate import FeatureMatrix, Measure, PivotSpec
from .ingest import DischargeTable

__all__ = [
    "oracle_groupby",
    "oracle_rebase_cell",
    "oracle_best_2partition",
    "rank_by_distance_to_median",
]


def oracle_groupby(table: DischargeTable, spec: PivotSpec) -> FeatureMatrix:
    """Naive nested-loop pivot: decode every row, accumulate per cell.

    Cost cells are correctly rounded sums of the cell's value multiset
    (math.fsum), the unique order-free definition of a float sum.
    """
    dims = spec.row_dims
    dicts = [table.dictionaries[d] for d in dims]
    code_cols = [table.codes[d] for d in dims]

    cells: dict[tuple[tuple[str, ...], int], list[float]] = {}
    for i in range(table.row_count):
        label = tuple(dicts[j][int(code_cols[j][i])] for j in range(len(dims)))
        year = int(table.years[i])
        cells.setdefault((label, year), []).append(float(table.costs[i]))

    labels = sorted({lbl for lbl, _ in cells})
    years = sorted({y for _, y in cells})
    values = np.zeros((len(labels), len(years)), dtype=np.float64)
    for r, lbl in enumerate(labels):
        for c, y in enumerate(years):
            bucket = cells.get((lbl, y))
            if bucket is None:
                continue
            if spec.measure is Measure.COUNT:
                values[r, c] = len(bucket)
            elif spec.measure is Measure.TOTAL_COST:
                values[r, c] = math.fsum(bucket)
            else:
                values[r, c] = math.fsum(bucket) / len(bucket)
    return FeatureMatrix(
        row_labels=tuple(labels),
        col_labels=tuple(years),
        values=values,
        provenance=None,
    )


def oracle_rebase_cell(value: float, base: float) -> float:
    """Scalar percent-change formula, recomputed outside the matrix path."""
    return 100.0 * (value - base) / base


def oracle_best_2partition(points: np.ndarray) -> tuple[float, np.ndarray]:
    """Exhaustive minimum within-cluster sum of squares over 2-partitions.

    Enumerates every split of n points (n <= 12) into two non-empty sets,
    scores each by summed squared distances to the side means, and
    returns (best inertia, membership array). Single points degenerate to
    one point per side when n == 2.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n > 12:
        raise ValueError("exhaustive search is limited to n <= 12")
    if n < 2:
        raise ValueError("need at least 2 points for a 2-partition")

    def side_cost(idx: tuple[int, ...]) -> float:
        sub = pts[list(idx)]
        mean = sub.mean(axis=0)
        return float(((sub - mean) ** 2).sum())

    best = np.inf
    best_members: np.ndarray | None = None
    indices = range(1, n)  # point 0 stays on side A to halve the search
    for size_a in range(0, n - 1):
        for extra in itertools.combinations(indices, size_a):
            side_a = (0, *extra)
            side_b = tuple(i for i in range(n) if i not in side_a)
            cost = side_cost(side_a) + side_cost(side_b)
            if cost < best:
                best = cost
                members = np.ones(n, dtype=np.int64)
                members[list(side_a)] = 0
                best_members = members
    assert best_members is not None
    return best, best_members


def rank_by_distance_to_median(values: np.ndarray) -> np.ndarray:
    """Row indices sorted by descending Euclidean distance to the column medians.

    A robust flag for planted spikes: the planted rows must outrank the
    background under this score regardless of how the detector works.
    """
    vals = np.asarray(values, dtype=np.float64)
    med = np.median(vals, axis=0)
    dist = np.sqrt(((vals - med) ** 2).sum(axis=1))
    return np.argsort(-dist, kind="stable")
