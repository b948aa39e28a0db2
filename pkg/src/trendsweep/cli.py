"""Command-line interface: synth, summary, pivot, run, searchlight, drill, serve.

Detector commands write the manifest/report/series artifacts and, unless
--no-figures is given, render a PNG figure next to them.
"""

from __future__ import annotations

from pathlib import Path

import click
import numpy as np

from .aggregate import Measure, PivotSpec, pivot
from .ingest import (
    DatasetSchema,
    DischargeTable,
    ErrorPolicy,
    load_csv,
    load_schema_profile,
    sparcs_schema,
    summarize,
)
from .kmeans import KMeansConfig, OutlierRun
from .pipeline import execute_run, execute_searchlight, execute_subset_scan
from .report import json_bytes
from .searchlight import SearchlightConfig
from .subsetscan import ScanScope, SubsetScanRequest
from .testkit import Plant, PlantSpec, generate_table, synth_schema, write_csv

_BUILTIN_SCHEMAS = {"sparcs": sparcs_schema, "synth": synth_schema}


def _resolve_schema(spec: str) -> DatasetSchema:
    builtin = _BUILTIN_SCHEMAS.get(spec)
    if builtin is not None:
        return builtin()
    path = Path(spec)
    if not path.exists():
        raise click.BadParameter(
            f"{spec!r} is neither a built-in profile ({sorted(_BUILTIN_SCHEMAS)}) nor a file"
        )
    return load_schema_profile(path)


def _load(data: str, schema: str, policy: str) -> DischargeTable:
    table = load_csv(Path(data), _resolve_schema(schema), ErrorPolicy(policy))
    if table.rejected:
        click.echo(f"rejected rows: {dict(sorted(table.rejected.items()))}", err=True)
    for w in table.load_warnings:
        click.echo(f"warning: {w}", err=True)
    return table


def _kmeans_config(k: int, seed: int, restarts: int, max_lloyd_iters: int, tol: float) -> KMeansConfig:
    return KMeansConfig(
        k=k, seed=seed, restarts=restarts, max_lloyd_iters=max_lloyd_iters, convergence_tol=tol
    )


data_option = click.option("--data", required=True, type=click.Path(exists=True), help="CSV file")
schema_option = click.option(
    "--schema", default="sparcs", show_default=True,
    help="schema profile: a file path or a built-in name (sparcs, synth)",
)
policy_option = click.option(
    "--policy", type=click.Choice(["skip", "strict"]), default="skip", show_default=True,
    help="what to do with unparsable rows",
)


def detector_options(f):
    f = click.option("--k", default=8, show_default=True, help="number of clusters")(f)
    f = click.option("--seed", default=0, show_default=True)(f)
    f = click.option("--restarts", default=8, show_default=True)(f)
    f = click.option("--max-lloyd-iters", default=300, show_default=True)(f)
    f = click.option("--tol", default=1e-6, show_default=True, help="relative inertia tolerance")(f)
    f = click.option(
        "--threshold", default=1, show_default=True,
        help="clusters at or below this size dissolve into outliers",
    )(f)
    f = click.option("--max-outlier-iters", default=10, show_default=True)(f)
    return f


@click.group()
def main() -> None:
    """Outlier exploration over tabular open data."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="output CSV path")
@click.option("--truth", type=click.Path(), help="ground-truth JSON path")
@click.option("--groups", default=100, show_default=True)
@click.option("--segments", default=5, show_default=True)
@click.option("--regions", default=4, show_default=True)
@click.option("--years", default="2009:2015", show_default=True, help="first:last calendar year")
@click.option("--base-count", default="100:200", show_default=True, help="min:max rows per group-year")
@click.option("--noise-sd", default=4.0, show_default=True)
@click.option("--plants", default=4, show_default=True, help="group-level spikes to plant")
@click.option("--pair-plants", default=0, show_default=True, help="(group, segment) spikes to plant")
@click.option("--magnitude", default=10.0, show_default=True, help="spike size in noise-sd units")
@click.option("--seed", default=7, show_default=True)
def synth(out, truth, groups, segments, regions, years, base_count, noise_sd,
          plants, pair_plants, magnitude, seed) -> None:
    """Write a synthetic discharge CSV with planted anomalies."""
    y0, y1 = (int(v) for v in years.split(":"))
    lo, hi = (int(v) for v in base_count.split(":"))
    year_list = tuple(range(y0, y1 + 1))
    placer = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 1])
    planted: list[Plant] = []
    n_plants = min(plants + pair_plants, groups)
    spike_groups = placer.choice(groups, size=n_plants, replace=False)
    # distinct years (base year excluded) keep spikes from co-clustering
    spike_years = placer.choice(
        year_list[1:], size=n_plants, replace=n_plants > len(year_list) - 1
    )
    for i in range(plants):
        planted.append(
            Plant(group=int(spike_groups[i]), year=int(spike_years[i]), magnitude=magnitude)
        )
    for i in range(pair_plants):
        seg = int(placer.integers(segments))
        planted.append(
            Plant(
                group=int(spike_groups[plants + i]),
                year=int(spike_years[plants + i]),
                magnitude=magnitude,
                segment=seg,
            )
        )
    spec = PlantSpec(
        n_groups=groups,
        years=year_list,
        base_count_range=(lo, hi),
        trend_noise_sd=noise_sd,
        n_segments=segments,
        n_regions=regions,
        plants=tuple(planted),
    )
    table, ground_truth = generate_table(spec, seed)
    write_csv(table, out)
    click.echo(f"wrote {table.row_count} rows to {out}")
    if truth:
        Path(truth).write_bytes(json_bytes(ground_truth.to_dict()))
        click.echo(f"wrote ground truth to {truth}")


@main.command()
@data_option
@schema_option
@policy_option
def summary(data, schema, policy) -> None:
    """Row counts, distinct values per dimension, year range, total cost."""
    table = _load(data, schema, policy)
    s = summarize(table)
    click.echo(f"rows: {s.row_count}")
    click.echo(f"year range: {s.year_range[0]}..{s.year_range[1]}" if s.year_range else "year range: none")
    click.echo(f"total cost: {s.total_cost:.2f}")
    for dim, count in s.distinct_values.items():
        click.echo(f"  {dim}: {count} distinct value(s)")


@main.command(name="pivot")
@data_option
@schema_option
@policy_option
@click.option("--dim", "dims", multiple=True, required=True, help="1 or 2 group-by dimensions")
@click.option("--measure", type=click.Choice([m.value for m in Measure]), default="count",
              show_default=True)
@click.option("--base-year", type=int, help="rebase to percent change against this year")
@click.option("--out", type=click.Path(), help=".csv or .json output (stdout CSV if omitted)")
def pivot_cmd(data, schema, policy, dims, measure, base_year, out) -> None:
    """Aggregate into a labeled trend matrix."""
    table = _load(data, schema, policy)
    spec = PivotSpec(row_dims=tuple(dims), measure=Measure(measure), rebase=base_year)
    matrix = pivot(table, spec)
    for w in matrix.warnings:
        click.echo(f"warning: {w}", err=True)
    if out is None:
        click.echo(matrix.to_csv_text(), nl=False)
    elif out.endswith(".json"):
        Path(out).write_bytes(json_bytes(matrix.to_dict()))
        click.echo(f"wrote {out}")
    else:
        Path(out).write_text(matrix.to_csv_text(), encoding="utf-8")
        click.echo(f"wrote {out}")


def _echo_run(run: OutlierRun) -> None:
    for step_no, step in enumerate(run.iterations, start=1):
        labels = [("/".join(r.label), round(r.score, 3)) for r in step.removed]
        click.echo(f"iteration {step_no}: removed {len(step.removed)} row(s) {labels}")
    click.echo(f"termination: {run.termination_reason.value}")
    click.echo(f"survivors: {len(run.survivor_indices)} row(s)")


@main.command(name="run")
@data_option
@schema_option
@policy_option
@click.option("--dim", "dims", multiple=True, required=True, help="1 or 2 group-by dimensions")
@click.option("--measure", type=click.Choice([m.value for m in Measure]), default="count",
              show_default=True)
@click.option("--base-year", type=int, required=True)
@detector_options
@click.option("--out-dir", default="reports", show_default=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="render a PNG next to the report")
def run_cmd(data, schema, policy, dims, measure, base_year, k, seed, restarts,
            max_lloyd_iters, tol, threshold, max_outlier_iters, out_dir, fmt, figures) -> None:
    """Detect outliers in one aggregation: pivot, rebase, iterate k-means."""
    table = _load(data, schema, policy)
    run, manifest, paths = execute_run(
        table,
        tuple(dims),
        Measure(measure),
        base_year,
        _kmeans_config(k, seed, restarts, max_lloyd_iters, tol),
        small_cluster_threshold=threshold,
        max_outlier_iters=max_outlier_iters,
        out_dir=out_dir,
        fmt=fmt,
    )
    _echo_run(run)
    if figures:
        from .figures import render_run

        png = Path(out_dir) / f"{manifest.run_id}.series.png"
        render_run(run, png, title=f"{'/'.join(dims)} ({measure}, base {base_year})",
                   ylabel=f"% change in {measure} vs {base_year}")
        paths["figure"] = png
    for kind, path in sorted(paths.items()):
        click.echo(f"{kind}: {path}")


@main.command(name="searchlight")
@data_option
@schema_option
@policy_option
@click.option("--dims", help="comma-separated candidate dimensions (default: all)")
@click.option("--measure", type=click.Choice([m.value for m in Measure]), default="count",
              show_default=True)
@click.option("--base-year", type=int, required=True)
@detector_options
@click.option("--pairs", is_flag=True, help="sweep over dimension pairs instead of single dimensions")
@click.option("--drill", "drill_dim", help="chain this dimension's outliers into a subset scan")
@click.option("--candidates", help="comma-separated drill candidates (default: all other dimensions)")
@click.option("--out-dir", default="reports", show_default=True, type=click.Path())
@click.option("--figures/--no-figures", default=True, show_default=True)
def searchlight_cmd(data, schema, policy, dims, measure, base_year, k, seed, restarts,
                    max_lloyd_iters, tol, threshold, max_outlier_iters, pairs, drill_dim,
                    candidates, out_dir, figures) -> None:
    """Sweep the detector across dimensions and rank them by outlier evidence."""
    table = _load(data, schema, policy)
    dimensions = tuple(d.strip() for d in dims.split(",")) if dims else table.schema.dimensions
    config = SearchlightConfig(
        dimensions=dimensions,
        measure=Measure(measure),
        base_year=base_year,
        kmeans=_kmeans_config(k, seed, restarts, max_lloyd_iters, tol),
        small_cluster_threshold=threshold,
        max_outlier_iters=max_outlier_iters,
        pairs=pairs,
    )
    result, manifest, paths = execute_searchlight(table, config, out_dir=out_dir)

    width = max((len(e.dimension) for e in result.entries), default=9)
    width = max(width, 9)
    click.echo(f"{'dimension':<{width}}  {'outliers':>8}  {'top score':>9}  termination")
    for e in result.entries:
        click.echo(
            f"{e.dimension:<{width}}  {e.outlier_count:>8}  {e.max_outlier_score:>9.3f}  "
            f"{e.run.termination_reason.value}"
        )
    for dim, reason in result.skipped:
        click.echo(f"skipped {dim}: {reason}")

    if figures and result.entries:
        from .figures import render_searchlight_ranking

        png = Path(out_dir) / f"{manifest.run_id}.ranking.png"
        render_searchlight_ranking(result, png)
        paths["figure"] = png
    for kind, path in sorted(paths.items()):
        click.echo(f"{kind}: {path}")

    if drill_dim:
        entry = result.entry(drill_dim)
        values = sorted({("/".join(r.label)) for r in entry.run.removals})
        if not values:
            click.echo(f"nothing to drill: {drill_dim} produced no outliers")
            return
        candidate_dims = (
            tuple(c.strip() for c in candidates.split(","))
            if candidates
            else tuple(d for d in table.schema.dimensions if d != drill_dim)
        )
        click.echo(f"drilling {drill_dim} outliers {values} across {list(candidate_dims)}")
        _drill(table, drill_dim, tuple(values), candidate_dims, Measure(measure), base_year,
               _kmeans_config(k, seed, restarts, max_lloyd_iters, tol), threshold,
               max_outlier_iters, out_dir, figures)


def _drill(table, primary_dim, values, candidate_dims, measure, base_year, kmeans_config,
           threshold, max_outlier_iters, out_dir, figures) -> None:
    request = SubsetScanRequest(
        primary_dim=primary_dim,
        outlier_values=values,
        candidate_dims=candidate_dims,
        measure=measure,
        base_year=base_year,
        kmeans=kmeans_config,
        small_cluster_threshold=threshold,
        max_outlier_iters=max_outlier_iters,
        scope=ScanScope.OUTLIERS_ONLY,
    )
    result, manifest, paths = execute_subset_scan(table, request, out_dir=out_dir)
    for e in result.entries:
        if e.skipped_reason:
            click.echo(f"{e.subset_dim}: skipped ({e.skipped_reason})")
            continue
        flag = "OUTLIERS" if e.produced_outliers else "clean"
        removed = [("/".join(r.label), round(r.score, 3)) for r in e.run.removals]
        note = f" removed {removed}" if removed else ""
        clamp = f" [k clamped to {e.clamped_k}]" if e.clamped_k is not None else ""
        click.echo(f"{e.subset_dim}: {flag} shape={e.matrix_shape}{clamp}{note}")
    if figures:
        from .figures import render_run

        for e in result.entries:
            if e.run is not None and e.produced_outliers:
                png = Path(out_dir) / f"{manifest.run_id}.{e.subset_dim}.png"
                render_run(e.run, png, title=f"{primary_dim} x {e.subset_dim}")
                paths[f"figure[{e.subset_dim}]"] = png
    for kind, path in sorted(paths.items()):
        click.echo(f"{kind}: {path}")


@main.command(name="drill")
@data_option
@schema_option
@policy_option
@click.option("--primary-dim", required=True)
@click.option("--value", "values", multiple=True, required=True,
              help="outlier value of the primary dimension (repeatable)")
@click.option("--candidates", help="comma-separated candidate dimensions (default: all others)")
@click.option("--measure", type=click.Choice([m.value for m in Measure]), default="count",
              show_default=True)
@click.option("--base-year", type=int, required=True)
@detector_options
@click.option("--out-dir", default="reports", show_default=True, type=click.Path())
@click.option("--figures/--no-figures", default=True, show_default=True)
def drill_cmd(data, schema, policy, primary_dim, values, candidates, measure, base_year,
              k, seed, restarts, max_lloyd_iters, tol, threshold, max_outlier_iters,
              out_dir, figures) -> None:
    """Cross chosen outlier values with each candidate dimension and re-run."""
    table = _load(data, schema, policy)
    candidate_dims = (
        tuple(c.strip() for c in candidates.split(","))
        if candidates
        else tuple(d for d in table.schema.dimensions if d != primary_dim)
    )
    _drill(table, primary_dim, tuple(values), candidate_dims, Measure(measure), base_year,
           _kmeans_config(k, seed, restarts, max_lloyd_iters, tol), threshold,
           max_outlier_iters, out_dir, figures)


@main.command()
@click.option("--data", "datasets", multiple=True, required=True,
              help="CSV path, or name=path to pick the dataset name (repeatable)")
@schema_option
@policy_option
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--report-dir", default="reports", show_default=True, type=click.Path())
@click.option("--ui-dir", type=click.Path(), help="static explorer assets mounted at /ui")
@click.option("--sync-timeout", default=30.0, show_default=True,
              help="seconds a run may take before the API returns a polling handle")
def serve(datasets, schema, policy, bind, report_dir, ui_dir, sync_timeout) -> None:
    """Serve loaded datasets over the HTTP JSON API."""
    import uvicorn

    from .service import create_app

    tables: dict[str, DischargeTable] = {}
    for entry in datasets:
        name, _, path = entry.rpartition("=")
        if not name:
            name, path = Path(path).stem, path
        tables[name] = _load(path, schema, policy)
        click.echo(f"loaded {name}: {tables[name].row_count} rows")
    app = create_app(tables, report_dir, sync_timeout=sync_timeout, ui_dir=ui_dir)
    host, _, port = bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
