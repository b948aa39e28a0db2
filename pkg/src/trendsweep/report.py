"""Reproducible run artifacts: manifests, reports and plot-series files.

All emission is deterministic: JSON keys are sorted, floats serialize via
their shortest exact representation, CSV floats carry 17 significant
digits, and rows are ordered by label. Two runs with the same data,
config and seed therefore produce byte-identical report and series
files; only the manifest carries timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .ingest import DischargeTable
from .kmeans import OutlierRun
from .searchlight import SearchlightResult
from .subsetscan import SubsetScanResult

__all__ = [
    "RunManifest",
    "PlotSeries",
    "SeriesAxis",
    "build_manifest",
    "emit_report",
    "emit_plot_series",
    "outlier_run_to_dict",
    "searchlight_to_dict",
    "subset_scan_to_dict",
    "json_bytes",
]


class SeriesAxis(str, Enum):
    BY_YEAR = "by_year"
    BY_CATEGORY_INDEX = "by_category_index"


@dataclass(frozen=True)
class RunManifest:
    pipeline_version: str
    dataset_fingerprint: str
    config: dict
    created_at: str
    warnings: tuple[str, ...] = ()

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(json_bytes(self.config)).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.dataset_fingerprint[:12]}-{self.config_hash[:12]}"

    def to_dict(self) -> dict:
        return {
            "pipeline_version": self.pipeline_version,
            "dataset_fingerprint": self.dataset_fingerprint,
            "config": self.config,
            "created_at": self.created_at,
            "warnings": list(self.warnings),
            "run_id": self.run_id,
        }


@dataclass(frozen=True)
class PlotSeries:
    """One drawable curve: a matrix row with its role in the run."""

    series_id: tuple[str, ...]
    x: tuple[float, ...]
    y: tuple[float, ...]
    role: str  # "outlier" | "cluster_member"
    cluster_id: int | None = None
    iteration_removed: int | None = None

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have equal length")
        if self.role == "outlier" and (self.iteration_removed or 0) < 1:
            raise ValueError("outlier series must carry iteration_removed >= 1")
        if self.role == "cluster_member" and self.cluster_id is None:
            raise ValueError("member series must carry a cluster id")

    def to_dict(self) -> dict:
        return {
            "id": list(self.series_id),
            "x": list(self.x),
            "y": list(self.y),
            "role": self.role,
            "cluster": self.cluster_id,
            "iteration_removed": self.iteration_removed,
        }


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def build_manifest(
    table: DischargeTable,
    config: dict,
    warnings: tuple[str, ...] = (),
) -> RunManifest:
    return RunManifest(
        pipeline_version=__version__,
        dataset_fingerprint=table.fingerprint,
        config=config,
        created_at=datetime.now(timezone.utc).isoformat(),
        warnings=tuple(warnings) + table.load_warnings,
    )


def _clustering_dict(run: OutlierRun) -> list[dict]:
    final = run.final_clustering
    survivor_set = {int(i) for i in run.survivor_indices}
    # map final clustering positions back to original row labels; the final
    # fit covers the survivors (plus, in degenerate endings, rows already
    # removed, which are excluded here)
    fit_rows = run.iterations[-1].row_indices
    if final is run.iterations[-1].clustering:
        positions = fit_rows
    else:
        positions = run.survivor_indices
    clusters: list[dict] = []
    for j in range(final.k):
        members = [
            list(run.matrix.row_labels[int(orig)])
            for pos, orig in enumerate(positions)
            if final.assignments[pos] == j and int(orig) in survivor_set
        ]
        clusters.append(
            {
                "cluster": j,
                "size": len(members),
                "centroid": [float(v) for v in final.centroids[j]],
                "members": sorted(members),
            }
        )
    return clusters


def outlier_run_to_dict(run: OutlierRun) -> dict:
    iterations = []
    for step_no, step in enumerate(run.iterations, start=1):
        dissolved = {r.row_index for r in step.removed}
        survivor_positions = [
            pos for pos, orig in enumerate(step.row_indices) if int(orig) not in dissolved
        ]
        cl = step.clustering
        surv_assign = cl.assignments[survivor_positions]
        surviving_ids = sorted(set(int(a) for a in surv_assign))
        rows = run.matrix.values[step.row_indices]
        d2 = ((rows[survivor_positions] - cl.centroids[surv_assign]) ** 2).sum(axis=1)
        rms = float(np.sqrt(d2.mean())) if survivor_positions else 1.0
        iterations.append(
            {
                "iteration": step_no,
                "rows": int(step.row_indices.size),
                "inertia": float(cl.inertia),
                "lloyd_iterations": cl.iterations_used,
                "cluster_sizes": [int(s) for s in cl.cluster_sizes()],
                "survivor_rms": rms if rms > 0.0 else 1.0,
                "surviving_centroids": [
                    [float(v) for v in cl.centroids[j]] for j in surviving_ids
                ],
                "removed": [
                    {
                        "label": list(r.label),
                        "score": float(r.score),
                        "vector": [float(v) for v in run.matrix.values[r.row_index]],
                    }
                    for r in sorted(step.removed, key=lambda r: r.label)
                ],
            }
        )
    return {
        "kind": "outlier_run",
        "years": list(run.matrix.col_labels),
        "row_count": len(run.matrix.row_labels),
        "iterations": iterations,
        "final_clusters": _clustering_dict(run),
        "survivors": sorted(list(lbl) for lbl in run.survivor_labels),
        "outlier_count": run.outlier_count,
        "max_outlier_score": float(run.max_outlier_score),
        "termination_reason": run.termination_reason.value,
        "matrix_warnings": list(run.matrix.warnings),
        "config": {
            "k": run.config.k,
            "seed": run.config.seed,
            "max_lloyd_iters": run.config.max_lloyd_iters,
            "convergence_tol": run.config.convergence_tol,
            "restarts": run.config.restarts,
            "small_cluster_threshold": run.small_cluster_threshold,
            "max_outlier_iters": run.max_outlier_iters,
        },
    }


def searchlight_to_dict(result: SearchlightResult) -> dict:
    return {
        "kind": "searchlight",
        "entries": [
            {
                "dimension": e.dimension,
                "outlier_count": e.outlier_count,
                "max_outlier_score": float(e.max_outlier_score),
                "termination_reason": e.run.termination_reason.value,
                "run": outlier_run_to_dict(e.run),
            }
            for e in result.entries
        ],
        "skipped": [{"dimension": d, "reason": r} for d, r in result.skipped],
    }


def subset_scan_to_dict(result: SubsetScanResult) -> dict:
    by_dim = {}
    for e in result.entries:
        by_dim[e.subset_dim] = {
            "matrix_shape": list(e.matrix_shape),
            "produced_outliers": e.produced_outliers,
            "skipped_reason": e.skipped_reason,
            "clamped_k": e.clamped_k,
            "run": None if e.run is None else outlier_run_to_dict(e.run),
        }
    return {"kind": "subset_scan", "primary_dimension": result.primary_dim, "entries": by_dim}


def emit_plot_series(run: OutlierRun, axis: SeriesAxis = SeriesAxis.BY_YEAR) -> tuple[PlotSeries, ...]:
    """One series per matrix row, tagged outlier or cluster member.

    ``by_year`` uses the year labels on the x axis; ``by_category_index``
    uses the 0-based column positions, for matrices whose columns are
    category indices rather than years.
    """
    if axis is SeriesAxis.BY_YEAR:
        x = tuple(float(y) for y in run.matrix.col_labels)
    else:
        x = tuple(float(i) for i in range(len(run.matrix.col_labels)))

    final = run.final_clustering
    positions = (
        run.iterations[-1].row_indices
        if final is run.iterations[-1].clustering
        else run.survivor_indices
    )
    cluster_of = {int(orig): int(final.assignments[pos]) for pos, orig in enumerate(positions)}

    series: list[PlotSeries] = []
    for idx in range(len(run.matrix.row_labels)):
        removed_at = run.iteration_removed(idx)
        y = tuple(float(v) for v in run.matrix.values[idx])
        if removed_at is not None:
            series.append(
                PlotSeries(
                    series_id=run.matrix.row_labels[idx],
                    x=x,
                    y=y,
                    role="outlier",
                    iteration_removed=removed_at,
                )
            )
        else:
            series.append(
                PlotSeries(
                    series_id=run.matrix.row_labels[idx],
                    x=x,
                    y=y,
                    role="cluster_member",
                    cluster_id=cluster_of.get(idx, 0),
                )
            )
    return tuple(sorted(series, key=lambda s: s.series_id))


def _run_report_csv(run: OutlierRun) -> str:
    """Row-per-label CSV: role columns then the matrix values."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    ndims = len(run.matrix.row_labels[0]) if run.matrix.row_labels else 1
    prov = run.matrix.provenance
    dim_names = (
        list(prov.row_dims) if prov and len(prov.row_dims) == ndims
        else [f"dim{i + 1}" for i in range(ndims)]
    )
    writer.writerow(
        dim_names
        + ["role", "iteration_removed", "cluster", "outlier_score"]
        + [str(y) for y in run.matrix.col_labels]
    )
    score_of = {r.row_index: r.score for r in run.removals}
    final = run.final_clustering
    positions = (
        run.iterations[-1].row_indices
        if final is run.iterations[-1].clustering
        else run.survivor_indices
    )
    cluster_of = {int(orig): int(final.assignments[pos]) for pos, orig in enumerate(positions)}
    order = sorted(range(len(run.matrix.row_labels)), key=lambda i: run.matrix.row_labels[i])
    for idx in order:
        removed_at = run.iteration_removed(idx)
        row = list(run.matrix.row_labels[idx])
        if removed_at is not None:
            row += ["outlier", str(removed_at), "", format(score_of[idx], ".17g")]
        else:
            row += ["cluster_member", "", str(cluster_of.get(idx, 0)), ""]
        row += [format(float(v), ".17g") for v in run.matrix.values[idx]]
        writer.writerow(row)
    return buf.getvalue()


def _series_payload(run_or_result) -> dict:
    if isinstance(run_or_result, OutlierRun):
        return {
            "kind": "outlier_run",
            "series": [s.to_dict() for s in emit_plot_series(run_or_result)],
        }
    if isinstance(run_or_result, SearchlightResult):
        return {
            "kind": "searchlight",
            "series": {
                e.dimension: [s.to_dict() for s in emit_plot_series(e.run)]
                for e in run_or_result.entries
            },
        }
    if isinstance(run_or_result, SubsetScanResult):
        return {
            "kind": "subset_scan",
            "series": {
                e.subset_dim: [s.to_dict() for s in emit_plot_series(e.run)]
                for e in run_or_result.entries
                if e.run is not None
            },
        }
    raise TypeError(f"cannot emit series for {type(run_or_result).__name__}")


def _report_payload(run_or_result) -> dict:
    if isinstance(run_or_result, OutlierRun):
        return outlier_run_to_dict(run_or_result)
    if isinstance(run_or_result, SearchlightResult):
        return searchlight_to_dict(run_or_result)
    if isinstance(run_or_result, SubsetScanResult):
        return subset_scan_to_dict(run_or_result)
    raise TypeError(f"cannot emit a report for {type(run_or_result).__name__}")


def emit_report(
    run_or_result: OutlierRun | SearchlightResult | SubsetScanResult,
    manifest: RunManifest,
    out_dir: str | Path,
    fmt: str = "json",
) -> dict[str, Path]:
    """Write ``<run-id>.manifest.json``, ``.report.json|csv`` and ``.series.json``.

    Report and series bytes depend only on the run and the manifest's
    config echo, never on wall-clock time.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unsupported report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id = manifest.run_id

    paths: dict[str, Path] = {}
    manifest_path = out / f"{run_id}.manifest.json"
    manifest_path.write_bytes(json_bytes(manifest.to_dict()))
    paths["manifest"] = manifest_path

    payload = _report_payload(run_or_result)
    payload["run_id"] = run_id
    payload["dataset_fingerprint"] = manifest.dataset_fingerprint
    if fmt == "json":
        report_path = out / f"{run_id}.report.json"
        report_path.write_bytes(json_bytes(payload))
    else:
        if not isinstance(run_or_result, OutlierRun):
            raise ValueError("csv format is only defined for single detector runs")
        report_path = out / f"{run_id}.report.csv"
        report_path.write_bytes(_run_report_csv(run_or_result).encode("utf-8"))
    paths["report"] = report_path

    series_payload = _series_payload(run_or_result)
    series_payload["run_id"] = run_id
    series_path = out / f"{run_id}.series.json"
    series_path.write_bytes(json_bytes(series_payload))
    paths["series"] = series_path
    return paths
