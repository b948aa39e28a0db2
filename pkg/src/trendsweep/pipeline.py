"""End-to-end run helpers shared by the CLI and the HTTP service.

Both entry points funnel through these functions with the same config
echo construction, which is what makes their emitted artifacts
byte-identical for identical inputs.
"""

from __future__ import annotations

from pathlib import Path

from .aggregate import Measure, PivotSpec, pivot
from .ingest import DischargeTable
from .kmeans import KMeansConfig, OutlierRun, iterative_kmeans
from .report import RunManifest, build_manifest, emit_report
from .searchlight import SearchlightConfig, SearchlightResult, run_searchlight
from .subsetscan import SubsetScanRequest, SubsetScanResult, subset_scan

__all__ = [
    "detector_config_echo",
    "execute_run",
    "execute_searchlight",
    "execute_subset_scan",
]


def _kmeans_echo(config: KMeansConfig) -> dict:
    return {
        "k": config.k,
        "seed": config.seed,
        "max_lloyd_iters": config.max_lloyd_iters,
        "convergence_tol": config.convergence_tol,
        "restarts": config.restarts,
    }


def detector_config_echo(
    kind: str,
    *,
    dims: tuple[str, ...],
    measure: Measure,
    base_year: int | None,
    kmeans: KMeansConfig,
    small_cluster_threshold: int,
    max_outlier_iters: int,
    extra: dict | None = None,
) -> dict:
    echo = {
        "kind": kind,
        "dimensions": list(dims),
        "measure": measure.value,
        "base_year": base_year,
        "kmeans": _kmeans_echo(kmeans),
        "small_cluster_threshold": small_cluster_threshold,
        "max_outlier_iters": max_outlier_iters,
    }
    if extra:
        echo.update(extra)
    return echo


def execute_run(
    table: DischargeTable,
    dims: tuple[str, ...],
    measure: Measure,
    base_year: int,
    kmeans: KMeansConfig,
    small_cluster_threshold: int = 1,
    max_outlier_iters: int = 10,
    out_dir: str | Path | None = None,
    fmt: str = "json",
) -> tuple[OutlierRun, RunManifest, dict[str, Path]]:
    """pivot -> rebase -> iterative k-means, optionally emitting artifacts."""
    spec = PivotSpec(row_dims=dims, measure=measure, rebase=base_year)
    matrix = pivot(table, spec)
    run = iterative_kmeans(
        matrix,
        kmeans,
        small_cluster_threshold=small_cluster_threshold,
        max_outlier_iters=max_outlier_iters,
    )
    config = detector_config_echo(
        "run",
        dims=dims,
        measure=measure,
        base_year=base_year,
        kmeans=kmeans,
        small_cluster_threshold=small_cluster_threshold,
        max_outlier_iters=max_outlier_iters,
    )
    manifest = build_manifest(table, config, warnings=matrix.warnings)
    paths: dict[str, Path] = {}
    if out_dir is not None:
        paths = emit_report(run, manifest, out_dir, fmt=fmt)
    return run, manifest, paths


def execute_searchlight(
    table: DischargeTable,
    config: SearchlightConfig,
    out_dir: str | Path | None = None,
) -> tuple[SearchlightResult, RunManifest, dict[str, Path]]:
    result = run_searchlight(table, config)
    echo = detector_config_echo(
        "searchlight",
        dims=config.dimensions,
        measure=config.measure,
        base_year=config.base_year,
        kmeans=config.kmeans,
        small_cluster_threshold=config.small_cluster_threshold,
        max_outlier_iters=config.max_outlier_iters,
        extra={"pairs": config.pairs},
    )
    manifest = build_manifest(table, echo)
    paths: dict[str, Path] = {}
    if out_dir is not None:
        paths = emit_report(result, manifest, out_dir)
    return result, manifest, paths


def execute_subset_scan(
    table: DischargeTable,
    request: SubsetScanRequest,
    out_dir: str | Path | None = None,
) -> tuple[SubsetScanResult, RunManifest, dict[str, Path]]:
    result = subset_scan(table, request)
    echo = detector_config_echo(
        "subset_scan",
        dims=request.candidate_dims,
        measure=request.measure,
        base_year=request.base_year,
        kmeans=request.kmeans,
        small_cluster_threshold=request.small_cluster_threshold,
        max_outlier_iters=request.max_outlier_iters,
        extra={
            "primary_dimension": request.primary_dim,
            "outlier_values": list(request.outlier_values),
            "scope": request.scope.value,
        },
    )
    manifest = build_manifest(table, echo)
    paths: dict[str, Path] = {}
    if out_dir is not None:
        paths = emit_report(result, manifest, out_dir)
    return result, manifest, paths
