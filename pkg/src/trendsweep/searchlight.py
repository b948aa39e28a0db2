"""Sweep the iterative detector across candidate aggregation dimensions.

Each dimension gets its own pivot -> rebase -> iterative k-means run;
dimensions are then ranked by outlier evidence. Dimensions whose matrix
is too small after zero-base drops are reported as skipped rather than
failing the sweep.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .aggregate import Measure, PivotSpec, pivot
from .ingest import DischargeTable
from .kmeans import KMeansConfig, OutlierRun, iterative_kmeans, nearest_centroid_distance

__all__ = [
    "SearchlightConfig",
    "SweepEntry",
    "SearchlightResult",
    "outlier_score",
    "run_searchlight",
]

PAIR_JOIN = " x "


@dataclass(frozen=True)
class SearchlightConfig:
    dimensions: tuple[str, ...]
    measure: Measure
    base_year: int
    kmeans: KMeansConfig
    small_cluster_threshold: int = 1
    max_outlier_iters: int = 10
    pairs: bool = False

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise ValueError("dimensions must be non-empty")
        if len(set(self.dimensions)) != len(self.dimensions):
            raise ValueError("dimensions must be distinct")


@dataclass(frozen=True)
class SweepEntry:
    dimension: str
    run: OutlierRun
    outlier_count: int
    max_outlier_score: float


@dataclass(frozen=True)
class SearchlightResult:
    entries: tuple[SweepEntry, ...]
    skipped: tuple[tuple[str, str], ...]  # (dimension, reason)

    def entry(self, dimension: str) -> SweepEntry:
        for e in self.entries:
            if e.dimension == dimension:
                return e
        raise KeyError(f"no sweep entry for dimension {dimension!r}")


def outlier_score(
    row: np.ndarray,
    surviving_centroids: np.ndarray,
    rms_scale: float,
) -> float:
    """Distance of a row to its nearest surviving centroid in survivor-RMS units.

    ``rms_scale`` is the root-mean-square distance of the surviving rows
    to their assigned centroids (1.0 when the survivors sit exactly on
    their centroids), which makes the score dimensionless.
    """
    if rms_scale <= 0.0:
        raise ValueError("rms_scale must be positive")
    dist = nearest_centroid_distance(np.atleast_2d(row), surviving_centroids)
    return float(dist[0] / rms_scale)


def _rank(entries: list[SweepEntry]) -> tuple[SweepEntry, ...]:
    return tuple(
        sorted(entries, key=lambda e: (-e.max_outlier_score, -e.outlier_count, e.dimension))
    )


def run_searchlight(table: DischargeTable, config: SearchlightConfig) -> SearchlightResult:
    """One detector run per candidate dimension, ranked by outlier evidence.

    Ordering is descending max outlier score, ties broken by outlier
    count then dimension name, so the result is a total deterministic
    order over the non-skipped candidates.
    """
    candidates: list[tuple[str, tuple[str, ...]]]
    if config.pairs:
        candidates = [
            (a + PAIR_JOIN + b, (a, b))
            for a, b in itertools.combinations(config.dimensions, 2)
        ]
    else:
        candidates = [(d, (d,)) for d in config.dimensions]

    entries: list[SweepEntry] = []
    skipped: list[tuple[str, str]] = []
    for name, row_dims in candidates:
        spec = PivotSpec(row_dims=row_dims, measure=config.measure, rebase=config.base_year)
        matrix = pivot(table, spec)
        if len(matrix.row_labels) < config.kmeans.k + 1:
            skipped.append(
                (name, f"{len(matrix.row_labels)} rows after zero-base drops, need k+1="
                       f"{config.kmeans.k + 1}")
            )
            continue
        run = iterative_kmeans(
            matrix,
            config.kmeans,
            small_cluster_threshold=config.small_cluster_threshold,
            max_outlier_iters=config.max_outlier_iters,
        )
        entries.append(
            SweepEntry(
                dimension=name,
                run=run,
                outlier_count=run.outlier_count,
                max_outlier_score=run.max_outlier_score,
            )
        )
    return SearchlightResult(entries=_rank(entries), skipped=tuple(sorted(skipped)))
