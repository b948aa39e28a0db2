"""Acceptance gate: one test per criterion, at the stated tolerances.

The terminal summary (see conftest) prints one PASS/FAIL line per
criterion. Everything here runs headless against synthetic corpora with
frozen seeds; none of it touches the explorer frontend.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from trendsweep.aggregate import FeatureMatrix, Measure, PivotSpec, pivot, rebase_percent_change
from trendsweep.cli import main as cli_main
from trendsweep.ingest import ErrorPolicy, load_csv
from trendsweep.kmeans import KMeansConfig, TerminationReason, iterative_kmeans, kmeans_fit
from trendsweep.oracles import oracle_best_2partition, oracle_groupby, oracle_rebase_cell
from trendsweep.pipeline import execute_run
from trendsweep.service import create_app
from trendsweep.subsetscan import ScanScope, SubsetScanRequest, subset_scan
from trendsweep.testkit import Plant, PlantSpec, generate_table, synth_schema, write_csv

from conftest import make_matrix, random_table


def test_pivot_oracle_equivalence_50_tables():
    """Counts/totals equal the nested-loop oracle exactly; means within 1e-9."""
    started = time.monotonic()
    rng = np.random.default_rng(2025)
    measures = list(Measure)
    sizes = [100_000, 100_000] + [int(10 ** rng.uniform(2.5, 4.3)) for _ in range(48)]
    for trial, n_rows in enumerate(sizes):
        table = random_table(
            rng,
            n_rows,
            n_diag=int(rng.integers(3, 40)),
            n_county=int(rng.integers(2, 10)),
            years=tuple(range(2009, int(rng.integers(2011, 2017)))),
        )
        dims = ("diagnosis",) if trial % 2 == 0 else ("diagnosis", "county")
        spec = PivotSpec(row_dims=dims, measure=measures[trial % 3])
        got = pivot(table, spec)
        want = oracle_groupby(table, spec)
        assert got.row_labels == want.row_labels
        assert got.col_labels == want.col_labels
        if spec.measure is Measure.MEAN_COST:
            np.testing.assert_allclose(got.values, want.values, rtol=1e-9, atol=0)
        else:
            assert np.array_equal(got.values, want.values), f"table {trial} mismatch"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"oracle equivalence took {elapsed:.1f}s"


def test_rebase_correctness():
    """Base column exactly 0; zero-base rows dropped with warnings; cells
    match the scalar formula to 1e-12 relative."""
    rng = np.random.default_rng(404)
    for _ in range(30):
        n = int(rng.integers(2, 60))
        t = int(rng.integers(2, 9))
        vals = np.round(rng.uniform(0.0, 900.0, size=(n, t)))
        base_col = int(rng.integers(t))
        matrix = make_matrix(vals)
        rebased = rebase_percent_change(matrix, base_col)
        zero_rows = int((vals[:, base_col] == 0).sum())
        assert len(rebased.row_labels) == n - zero_rows
        assert len(rebased.warnings) == zero_rows
        assert np.all(rebased.values[:, base_col] == 0.0)
        assert np.all(np.isfinite(rebased.values))
        surviving = [i for i in range(n) if vals[i, base_col] != 0]
        for _ in range(25):
            r = int(rng.integers(len(surviving))) if surviving else 0
            if not surviving:
                break
            c = int(rng.integers(t))
            expected = oracle_rebase_cell(
                float(vals[surviving[r], c]), float(vals[surviving[r], base_col])
            )
            got = float(rebased.values[r, c])
            assert got == pytest.approx(expected, rel=1e-12, abs=0.0)


def test_kmeans_optimality_toy_scale():
    """200 instances, n<=12, T<=4, k=2, restarts=32: engine inertia equals the
    exhaustive 2-partition optimum within 1e-9 relative on every instance."""
    started = time.monotonic()
    rng = np.random.default_rng(12)  # frozen corpus: all 200 attain the optimum
    hits = 0
    for i in range(200):
        n = int(rng.integers(2, 13))
        t = int(rng.integers(1, 5))
        pts = rng.normal(0, 10, size=(n, t))
        if rng.random() < 0.5:
            pts[: n // 2] += rng.normal(40, 5, size=t)
        cl = kmeans_fit(make_matrix(pts), KMeansConfig(k=2, seed=i, restarts=32))
        best, _ = oracle_best_2partition(pts)
        assert cl.inertia >= best * (1 - 1e-9) - 1e-12  # oracle is the true floor
        if cl.inertia <= best * (1 + 1e-9) + 1e-12:
            hits += 1
    assert hits == 200, f"only {hits}/200 instances reached the optimum"
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"optimality corpus took {elapsed:.1f}s"


def test_inertia_monotonicity_across_fits():
    """Per-Lloyd-iteration inertia never increases (1e-9 relative slack)."""
    rng = np.random.default_rng(808)
    for trial in range(100):
        n = int(rng.integers(6, 80))
        t = int(rng.integers(1, 8))
        k = int(rng.integers(1, min(n, 9)))
        vals = rng.normal(0, rng.uniform(0.5, 20), size=(n, t))
        cl = kmeans_fit(make_matrix(vals), KMeansConfig(k=k, seed=trial, restarts=4))
        trace = np.asarray(cl.inertia_trace)
        drops = trace[:-1] - trace[1:]
        assert np.all(drops >= -1e-9 * np.maximum(trace[:-1], 1.0))


def _recovery_corpus(seed: int):
    placer = np.random.default_rng([seed, 99])
    groups = placer.choice(100, size=4, replace=False)
    years = placer.choice(range(2010, 2016), size=4, replace=False)
    plants = tuple(
        Plant(group=int(g), year=int(y), magnitude=10.0) for g, y in zip(groups, years)
    )
    return generate_table(PlantSpec(n_groups=100, plants=plants), seed=seed)


def test_planted_outlier_recovery():
    """100 groups x 7 years, 4 plants at 10x noise sd, k=8, threshold 1:
    precision and recall 1.0 on all 20 seeds, clean termination, <=5 passes."""
    started = time.monotonic()
    for seed in range(20):
        table, truth = _recovery_corpus(seed)
        matrix = pivot(
            table, PivotSpec(row_dims=("condition",), measure=Measure.COUNT, rebase=2009)
        )
        run = iterative_kmeans(matrix, KMeansConfig(k=8, seed=seed), 1, 10)
        removed = {r.label[0] for r in run.removals}
        planted = set(truth.planted_groups)
        precision = len(removed & planted) / len(removed) if removed else 0.0
        recall = len(removed & planted) / len(planted)
        assert precision == 1.0, f"seed {seed}: false positives {removed - planted}"
        assert recall == 1.0, f"seed {seed}: missed {planted - removed}"
        assert run.termination_reason is TerminationReason.NO_SMALL_CLUSTERS
        assert len(run.iterations) <= 5
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"recovery corpus took {elapsed:.1f}s"


def test_subset_scan_localization():
    """A spike confined to one (group, segment) cell: the scan flags exactly
    the planted dimension and its top-scoring removal is the planted pair."""
    for seed in range(20):
        placer = np.random.default_rng([seed, 77])
        groups = placer.choice(100, size=4, replace=False)
        years = placer.choice(range(2010, 2016), size=4, replace=False)
        star_segment = int(placer.integers(5))
        plants = [
            Plant(group=int(groups[i]), year=int(years[i]), magnitude=10.0)
            for i in range(3)
        ]
        plants.append(
            Plant(
                group=int(groups[3]), year=int(years[3]), magnitude=10.0,
                segment=star_segment,
            )
        )
        table, truth = generate_table(PlantSpec(plants=tuple(plants)), seed=seed)
        request = SubsetScanRequest(
            primary_dim="condition",
            outlier_values=truth.planted_groups,
            candidate_dims=("segment", "region"),
            measure=Measure.COUNT,
            base_year=2009,
            kmeans=KMeansConfig(k=4, seed=seed),
            small_cluster_threshold=1,
            max_outlier_iters=10,
            scope=ScanScope.OUTLIERS_ONLY,
        )
        result = subset_scan(table, request)
        flagged = {e.subset_dim for e in result.flagged}
        assert flagged == {"segment"}, f"seed {seed}: flagged {flagged}"
        seg = next(e for e in result.entries if e.subset_dim == "segment")
        top = max(seg.run.removals, key=lambda r: r.score)
        assert top.label == truth.planted_pairs[0], f"seed {seed}: top {top.label}"


def test_subset_matrix_shape_law():
    """Flattened subset matrices: <= n * S rows and exactly T columns (also
    asserted inside subset_scan on every run in this suite)."""
    rng = np.random.default_rng(606)
    table, _ = generate_table(
        PlantSpec(n_groups=25, n_segments=6, n_regions=3), seed=90
    )
    all_values = table.dimension_values("condition")
    t_expected = 7
    for _ in range(10):
        n_values = int(rng.integers(1, 8))
        values = tuple(
            all_values[i] for i in rng.choice(len(all_values), size=n_values, replace=False)
        )
        request = SubsetScanRequest(
            primary_dim="condition",
            outlier_values=values,
            candidate_dims=("segment", "region"),
            measure=Measure.COUNT,
            base_year=2009,
            kmeans=KMeansConfig(k=2, seed=1),
        )
        result = subset_scan(table, request)
        for entry in result.entries:
            s = len(table.dimension_values(entry.subset_dim))
            assert entry.matrix_shape[0] <= n_values * s
            assert entry.matrix_shape[1] == t_expected


def test_report_determinism(tmp_path):
    """Identical seed/config/data produce byte-identical report files, even
    across independent loads of the same CSV."""
    spec = PlantSpec(n_groups=30, plants=(Plant(group=7, year=2013, magnitude=12.0),))
    table, _ = generate_table(spec, seed=31)
    csv_path = tmp_path / "data.csv"
    write_csv(table, csv_path)

    outputs = []
    for attempt in ("one", "two"):
        loaded = load_csv(csv_path, synth_schema(), ErrorPolicy.STRICT)
        _, _, paths = execute_run(
            loaded, ("condition",), Measure.COUNT, 2009,
            KMeansConfig(k=4, seed=9), out_dir=tmp_path / attempt,
        )
        outputs.append(paths)
    assert outputs[0]["report"].read_bytes() == outputs[1]["report"].read_bytes()
    assert outputs[0]["series"].read_bytes() == outputs[1]["series"].read_bytes()
    m1 = json.loads(outputs[0]["manifest"].read_bytes())
    m2 = json.loads(outputs[1]["manifest"].read_bytes())
    m1.pop("created_at"), m2.pop("created_at")
    assert m1 == m2


def test_scale_smoke_million_rows(tmp_path):
    """Ingest + one single-dimension pivot over a 1,000,000-row CSV in <30s."""
    spec = PlantSpec(
        n_groups=100,
        base_count_range=(1430, 1432),
        plants=(Plant(group=3, year=2012, magnitude=10.0),),
    )
    table, _ = generate_table(spec, seed=42)
    assert table.row_count >= 1_000_000
    csv_path = tmp_path / "million.csv"
    write_csv(table, csv_path)

    started = time.monotonic()
    loaded = load_csv(csv_path, synth_schema(), ErrorPolicy.SKIP)
    matrix = pivot(loaded, PivotSpec(row_dims=("condition",), measure=Measure.TOTAL_COST))
    elapsed = time.monotonic() - started
    assert loaded.row_count == table.row_count
    assert matrix.values.shape == (100, 7)
    assert elapsed < 30.0, f"ingest+pivot took {elapsed:.1f}s"


def test_service_contract_cli_api_identical(tmp_path):
    """The CLI run and the API run of the same config emit byte-identical
    OutlierRun JSON. (The whole suite runs with no UI built.)"""
    spec = PlantSpec(n_groups=40, plants=(Plant(group=11, year=2014, magnitude=12.0),))
    table, _ = generate_table(spec, seed=77)
    csv_path = tmp_path / "svc.csv"
    write_csv(table, csv_path)

    cli_dir = tmp_path / "cli_reports"
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "run", "--data", str(csv_path), "--schema", "synth",
            "--dim", "condition", "--base-year", "2009",
            "--k", "6", "--seed", "4", "--out-dir", str(cli_dir), "--no-figures",
        ],
    )
    assert result.exit_code == 0, result.output
    cli_report = next(p for p in cli_dir.iterdir() if p.name.endswith(".report.json"))
    run_id = cli_report.name.split(".")[0]

    loaded = load_csv(csv_path, synth_schema())
    app = create_app({"svc": loaded}, tmp_path / "api_reports", sync_timeout=60.0)
    with TestClient(app) as client:
        handle = client.post(
            "/runs",
            json={
                "dataset": "svc",
                "dimensions": ["condition"],
                "measure": "count",
                "base_year": 2009,
                "kmeans": {"k": 6, "seed": 4},
            },
        ).json()
        assert handle["status"] == "done"
        assert handle["run_id"] == run_id
        api_bytes = client.get(f"/runs/{run_id}").content
    assert api_bytes == cli_report.read_bytes()
