"""HTTP JSON API over loaded tables: pivots, detector runs, sweeps and scans.

Tables are read-only after startup and shared across requests. Run
artifacts are persisted through the report module and indexed in memory;
the run id doubles as the manifest hash, so identical config + data maps
to the same artifact files no matter which entry point produced them.
Desk-scale runs finish synchronously within the request; anything slower
returns a running handle pollable at GET /runs/{id}.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import Future, ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .aggregate import Measure, PivotSpec, pivot
from .ingest import DischargeTable, summarize
from .kmeans import KMeansConfig
from .pipeline import detector_config_echo, execute_run, execute_searchlight, execute_subset_scan
from .report import build_manifest
from .searchlight import SearchlightConfig
from .subsetscan import ScanScope, SubsetScanRequest

__all__ = ["create_app", "KMeansParams", "RunBody", "PivotBody", "SearchlightBody", "SubsetScanBody"]


class KMeansParams(BaseModel):
    k: int = Field(default=8, ge=1)
    seed: int = 0
    max_lloyd_iters: int = Field(default=300, ge=1)
    convergence_tol: float = Field(default=1e-6, ge=0.0)
    restarts: int = Field(default=8, ge=1)

    def to_config(self) -> KMeansConfig:
        return KMeansConfig(
            k=self.k,
            seed=self.seed,
            max_lloyd_iters=self.max_lloyd_iters,
            convergence_tol=self.convergence_tol,
            restarts=self.restarts,
        )


class PivotBody(BaseModel):
    dataset: str
    dimensions: list[str] = Field(min_length=1, max_length=2)
    measure: Measure = Measure.COUNT
    base_year: int | None = None


class RunBody(BaseModel):
    dataset: str
    dimensions: list[str] = Field(min_length=1, max_length=2)
    measure: Measure = Measure.COUNT
    base_year: int
    kmeans: KMeansParams = KMeansParams()
    small_cluster_threshold: int = Field(default=1, ge=1)
    max_outlier_iters: int = Field(default=10, ge=1)


class SearchlightBody(BaseModel):
    dataset: str
    dimensions: list[str] | None = None  # None sweeps every categorical dimension
    measure: Measure = Measure.COUNT
    base_year: int
    kmeans: KMeansParams = KMeansParams()
    small_cluster_threshold: int = Field(default=1, ge=1)
    max_outlier_iters: int = Field(default=10, ge=1)
    pairs: bool = False


class SubsetScanBody(BaseModel):
    dataset: str
    primary_dim: str
    outlier_values: list[str] = []
    candidate_dims: list[str] = Field(min_length=1)
    measure: Measure = Measure.COUNT
    base_year: int
    kmeans: KMeansParams = KMeansParams()
    small_cluster_threshold: int = Field(default=1, ge=1)
    max_outlier_iters: int = Field(default=10, ge=1)
    scope: ScanScope = ScanScope.OUTLIERS_ONLY


@dataclass
class _RunRecord:
    run_id: str
    kind: str
    status: str  # running | done | failed
    future: Future | None = None
    paths: dict[str, Path] = field(default_factory=dict)
    error: str | None = None

    def handle(self) -> dict:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "status": self.status,
            "result_url": f"/runs/{self.run_id}",
            "error": self.error,
        }


def _summary_dict(table: DischargeTable) -> dict:
    s = summarize(table)
    return {
        "row_count": s.row_count,
        "distinct_values": s.distinct_values,
        "year_range": list(s.year_range) if s.year_range else None,
        "total_cost": s.total_cost,
        "dimensions": list(table.schema.dimensions),
        "rejected": table.rejected,
    }


def create_app(
    tables: dict[str, DischargeTable],
    report_dir: str | Path,
    sync_timeout: float = 30.0,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    if not tables:
        raise ValueError("at least one table must be loaded")
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="trendsweep", version="0.1.0")
    runs: dict[str, _RunRecord] = {}
    runs_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=2, thread_name_prefix="detector")

    def get_table(name: str) -> DischargeTable:
        table = tables.get(name)
        if table is None:
            raise HTTPException(404, detail=f"unknown dataset {name!r}; have {sorted(tables)}")
        return table

    def check_dims(table: DischargeTable, dims: list[str]) -> None:
        for d in dims:
            if d not in table.schema.dimensions:
                raise HTTPException(
                    422,
                    detail=f"unknown dimension {d!r}; available: {list(table.schema.dimensions)}",
                )

    def check_base_year(table: DischargeTable, base_year: int | None) -> None:
        if base_year is None or table.row_count == 0:
            return
        lo, hi = int(table.years.min()), int(table.years.max())
        if not lo <= base_year <= hi:
            raise HTTPException(
                422, detail=f"base year {base_year} outside table year range [{lo}, {hi}]"
            )

    def launch(run_id: str, kind: str, job) -> dict:
        """Execute a job under the run index, waiting up to the sync timeout."""
        with runs_lock:
            existing = runs.get(run_id)
            if existing is not None and existing.status != "failed":
                record = existing
            else:
                record = _RunRecord(run_id=run_id, kind=kind, status="running")

                def wrapped() -> None:
                    try:
                        record.paths = job()
                        record.status = "done"
                    except Exception as exc:  # surfaced through the handle
                        record.status = "failed"
                        record.error = f"{type(exc).__name__}: {exc}"

                record.future = executor.submit(wrapped)
                runs[run_id] = record
        if record.future is not None:
            try:
                record.future.result(timeout=sync_timeout)
            except FutureTimeout:
                pass
        return record.handle()

    @app.get("/datasets")
    def list_datasets() -> list[dict]:
        return [
            {
                "name": name,
                "summary": _summary_dict(table),
                "dataset_fingerprint": table.fingerprint,
            }
            for name, table in sorted(tables.items())
        ]

    @app.get("/datasets/{name}/summary")
    def dataset_summary(name: str) -> dict:
        table = get_table(name)
        return {
            "name": name,
            "summary": _summary_dict(table),
            "dataset_fingerprint": table.fingerprint,
        }

    @app.get("/defaults")
    def defaults() -> dict:
        per_dataset = {}
        for name, table in sorted(tables.items()):
            years = (
                [] if table.row_count == 0
                else sorted(int(y) for y in set(table.years.tolist()))
            )
            per_dataset[name] = {
                "dimensions": list(table.schema.dimensions),
                "years": years,
                "default_base_year": years[0] if years else None,
            }
        return {
            "kmeans": KMeansParams().model_dump(),
            "small_cluster_threshold": 1,
            "max_outlier_iters": 10,
            "measures": [m.value for m in Measure],
            "datasets": per_dataset,
        }

    @app.post("/pivot")
    def run_pivot(body: PivotBody) -> dict:
        table = get_table(body.dataset)
        check_dims(table, body.dimensions)
        check_base_year(table, body.base_year)
        spec = PivotSpec(
            row_dims=tuple(body.dimensions), measure=body.measure, rebase=body.base_year
        )
        try:
            matrix = pivot(table, spec)
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        return {"matrix": matrix.to_dict(), "dataset_fingerprint": table.fingerprint}

    @app.post("/runs")
    def post_run(body: RunBody) -> dict:
        table = get_table(body.dataset)
        check_dims(table, body.dimensions)
        check_base_year(table, body.base_year)
        config = body.kmeans.to_config()

        def job() -> dict[str, Path]:
            _, _, paths = execute_run(
                table,
                tuple(body.dimensions),
                body.measure,
                body.base_year,
                config,
                small_cluster_threshold=body.small_cluster_threshold,
                max_outlier_iters=body.max_outlier_iters,
                out_dir=report_dir,
            )
            return paths

        # manifest hash is computable before execution, so the handle can
        # be returned even while the run is still in flight
        echo = detector_config_echo(
            "run",
            dims=tuple(body.dimensions),
            measure=body.measure,
            base_year=body.base_year,
            kmeans=config,
            small_cluster_threshold=body.small_cluster_threshold,
            max_outlier_iters=body.max_outlier_iters,
        )
        run_id = build_manifest(table, echo).run_id
        return launch(run_id, "run", job)

    @app.post("/searchlight")
    def post_searchlight(body: SearchlightBody) -> dict:
        table = get_table(body.dataset)
        dims = body.dimensions or list(table.schema.dimensions)
        check_dims(table, dims)
        check_base_year(table, body.base_year)
        config = SearchlightConfig(
            dimensions=tuple(dims),
            measure=body.measure,
            base_year=body.base_year,
            kmeans=body.kmeans.to_config(),
            small_cluster_threshold=body.small_cluster_threshold,
            max_outlier_iters=body.max_outlier_iters,
            pairs=body.pairs,
        )

        def job() -> dict[str, Path]:
            _, _, paths = execute_searchlight(table, config, out_dir=report_dir)
            return paths

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
        run_id = build_manifest(table, echo).run_id
        return launch(run_id, "searchlight", job)

    @app.post("/subset-scan")
    def post_subset_scan(body: SubsetScanBody) -> dict:
        table = get_table(body.dataset)
        check_dims(table, [body.primary_dim, *body.candidate_dims])
        check_base_year(table, body.base_year)
        try:
            request = SubsetScanRequest(
                primary_dim=body.primary_dim,
                outlier_values=tuple(body.outlier_values),
                candidate_dims=tuple(body.candidate_dims),
                measure=body.measure,
                base_year=body.base_year,
                kmeans=body.kmeans.to_config(),
                small_cluster_threshold=body.small_cluster_threshold,
                max_outlier_iters=body.max_outlier_iters,
                scope=body.scope,
            )
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        if request.scope is ScanScope.OUTLIERS_ONLY:
            known = set(table.dimension_values(request.primary_dim))
            unknown = [v for v in request.outlier_values if v not in known]
            if unknown:
                raise HTTPException(
                    422, detail=f"unknown {request.primary_dim!r} value(s): {unknown}"
                )

        def job() -> dict[str, Path]:
            _, _, paths = execute_subset_scan(table, request, out_dir=report_dir)
            return paths

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
        run_id = build_manifest(table, echo).run_id
        return launch(run_id, "subset-scan", job)

    @app.get("/runs")
    def list_runs() -> list[dict]:
        with runs_lock:
            return [r.handle() for r in sorted(runs.values(), key=lambda r: r.run_id)]

    def _artifact_response(run_id: str, key: str) -> Response:
        record = runs.get(run_id)
        if record is None:
            raise HTTPException(404, detail=f"unknown run {run_id!r}")
        if record.status == "running":
            if record.future is not None:
                try:
                    record.future.result(timeout=0.05)
                except FutureTimeout:
                    pass
            if record.status == "running":
                return Response(
                    content=json.dumps(record.handle()),
                    media_type="application/json",
                    status_code=202,
                )
        if record.status == "failed":
            raise HTTPException(500, detail=record.error or "run failed")
        return Response(
            content=record.paths[key].read_bytes(),
            media_type="application/json",
            headers={"X-Run-Id": run_id},
        )

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> Response:
        return _artifact_response(run_id, "report")

    @app.get("/runs/{run_id}/series")
    def get_series(run_id: str) -> Response:
        return _artifact_response(run_id, "series")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
