"""Drill into an outlier-bearing dimension one secondary dimension at a time.

The outlier values of a primary dimension are crossed with each candidate
dimension, flattening the per-candidate trend cube into a matrix of
(primary value, subset value) rows, and the same iterative detector is
re-run on each. Entries record whether any removals occurred so the
caller can focus on the candidates that actually produce outliers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .aggregate import Measure, pivot_subset
from .ingest import DischargeTable
from .kmeans import KMeansConfig, OutlierRun, iterative_kmeans

__all__ = ["ScanScope", "SubsetScanRequest", "SubsetEntry", "SubsetScanResult", "subset_scan"]


class ScanScope(str, Enum):
    OUTLIERS_ONLY = "outliers_only"
    ALL_VALUES = "all_values"


@dataclass(frozen=True)
class SubsetScanRequest:
    primary_dim: str
    outlier_values: tuple[str, ...]
    candidate_dims: tuple[str, ...]
    measure: Measure
    base_year: int
    kmeans: KMeansConfig
    small_cluster_threshold: int = 1
    max_outlier_iters: int = 10
    scope: ScanScope = ScanScope.OUTLIERS_ONLY

    def __post_init__(self) -> None:
        if self.primary_dim in self.candidate_dims:
            raise ValueError("candidate_dims must exclude the primary dimension")
        if not self.candidate_dims:
            raise ValueError("candidate_dims must be non-empty")
        if self.scope is ScanScope.OUTLIERS_ONLY and not self.outlier_values:
            raise ValueError("outlier_values must be non-empty under outliers_only scope")


@dataclass(frozen=True)
class SubsetEntry:
    subset_dim: str
    matrix_shape: tuple[int, int]
    run: OutlierRun | None
    produced_outliers: bool
    skipped_reason: str | None = None
    clamped_k: int | None = None


@dataclass(frozen=True)
class SubsetScanResult:
    primary_dim: str
    entries: tuple[SubsetEntry, ...]

    @property
    def flagged(self) -> tuple[SubsetEntry, ...]:
        """The entries surfaced by default: those that produced outliers."""
        return tuple(e for e in self.entries if e.produced_outliers)


def subset_scan(table: DischargeTable, request: SubsetScanRequest) -> SubsetScanResult:
    """Run the detector over each candidate's flattened subset matrix.

    The requested k is clamped to rows - 1 when a candidate's matrix is
    too small for it; candidates that cannot support even k = 1 are
    marked skipped instead of erroring, so a scan always completes.
    """
    if request.scope is ScanScope.ALL_VALUES:
        values = table.dimension_values(request.primary_dim)
    else:
        values = request.outlier_values

    entries: list[SubsetEntry] = []
    for subset_dim in request.candidate_dims:
        matrix = pivot_subset(
            table,
            request.primary_dim,
            values,
            subset_dim,
            request.measure,
            rebase=request.base_year,
        )
        rows = len(matrix.row_labels)
        # flattened-cube shape law: at most one row per (value, subset value)
        # pair, one column per year
        s = len(table.dimension_values(subset_dim))
        if rows > len(values) * s:
            raise AssertionError(
                f"subset matrix has {rows} rows, more than "
                f"{len(values)} values x {s} subset values"
            )
        k = request.kmeans.k
        clamped: int | None = None
        if rows < k + 1:
            clamped = rows - 1
        if clamped is not None and clamped < 1:
            entries.append(
                SubsetEntry(
                    subset_dim=subset_dim,
                    matrix_shape=matrix.shape,
                    run=None,
                    produced_outliers=False,
                    skipped_reason=f"only {rows} row(s) after zero-base drops",
                )
            )
            continue
        config = request.kmeans if clamped is None else replace(request.kmeans, k=clamped)
        run = iterative_kmeans(
            matrix,
            config,
            small_cluster_threshold=request.small_cluster_threshold,
            max_outlier_iters=request.max_outlier_iters,
        )
        entries.append(
            SubsetEntry(
                subset_dim=subset_dim,
                matrix_shape=matrix.shape,
                run=run,
                produced_outliers=run.outlier_count > 0,
                clamped_k=clamped,
            )
        )
    return SubsetScanResult(primary_dim=request.primary_dim, entries=tuple(entries))
