"""Artifact emission: determinism, round-trips, series roles, re-scoring."""

from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from trendsweep.aggregate import Measure, PivotSpec, pivot
from trendsweep.kmeans import KMeansConfig, iterative_kmeans
from trendsweep.pipeline import detector_config_echo, execute_run
from trendsweep.report import (
    SeriesAxis,
    build_manifest,
    emit_plot_series,
    emit_report,
    json_bytes,
    outlier_run_to_dict,
)
from trendsweep.searchlight import outlier_score
from trendsweep.testkit import Plant, PlantSpec, generate_table

from conftest import make_matrix


@pytest.fixture(scope="module")
def corpus():
    plants = (Plant(group=5, year=2012, magnitude=12.0), Plant(group=11, year=2014, magnitude=10.0))
    table, truth = generate_table(PlantSpec(n_groups=40, plants=plants), seed=50)
    return table, truth


def _run(table, seed=0, k=4):
    matrix = pivot(
        table, PivotSpec(row_dims=("condition",), measure=Measure.COUNT, rebase=2009)
    )
    return iterative_kmeans(matrix, KMeansConfig(k=k, seed=seed), 1, 10)


def test_same_run_emitted_twice_is_byte_identical(tmp_path, corpus):
    table, _ = corpus
    run = _run(table)
    echo = {"kind": "run", "k": 4}
    m1 = build_manifest(table, echo)
    m2 = build_manifest(table, echo)
    p1 = emit_report(run, m1, tmp_path / "a")
    p2 = emit_report(run, m2, tmp_path / "b")
    assert p1["report"].read_bytes() == p2["report"].read_bytes()
    assert p1["series"].read_bytes() == p2["series"].read_bytes()
    # manifests agree except for the timestamp
    d1 = json.loads(p1["manifest"].read_bytes())
    d2 = json.loads(p2["manifest"].read_bytes())
    d1.pop("created_at"), d2.pop("created_at")
    assert d1 == d2
    assert m1.run_id == m2.run_id


def test_empty_removal_report_has_clusters(tmp_path):
    table, _ = generate_table(PlantSpec(n_groups=20), seed=51)
    matrix = pivot(table, PivotSpec(row_dims=("segment",), measure=Measure.COUNT, rebase=2009))
    run = iterative_kmeans(matrix, KMeansConfig(k=2, seed=0), 1, 10)
    assert run.outlier_count == 0
    payload = outlier_run_to_dict(run)
    assert payload["iterations"][0]["removed"] == []
    assert payload["final_clusters"]
    assert sum(c["size"] for c in payload["final_clusters"]) == len(matrix.row_labels)


def test_reloaded_report_rescores_identically(tmp_path, corpus):
    """Scores recomputed from serialized vectors match the originals exactly."""
    table, _ = corpus
    run = _run(table)
    assert run.outlier_count >= 1
    manifest = build_manifest(table, {"kind": "run"})
    paths = emit_report(run, manifest, tmp_path)
    payload = json.loads(paths["report"].read_bytes())
    for iteration in payload["iterations"]:
        centroids = np.asarray(iteration["surviving_centroids"], dtype=np.float64)
        rms = float(iteration["survivor_rms"])
        for removed in iteration["removed"]:
            vector = np.asarray(removed["vector"], dtype=np.float64)
            rescored = outlier_score(vector, centroids, rms)
            assert rescored == removed["score"]


def test_series_partition_and_roles(corpus):
    table, _ = corpus
    run = _run(table)
    series = emit_plot_series(run)
    assert len(series) == len(run.matrix.row_labels)
    ids = sorted(s.series_id for s in series)
    assert ids == sorted(run.matrix.row_labels)
    outliers = [s for s in series if s.role == "outlier"]
    assert len(outliers) == run.outlier_count
    for s in outliers:
        assert s.iteration_removed >= 1
    for s in series:
        if s.role == "cluster_member":
            assert 0 <= s.cluster_id < run.final_clustering.k


def test_series_axis_by_category_index(corpus):
    table, _ = corpus
    run = _run(table)
    by_year = emit_plot_series(run, SeriesAxis.BY_YEAR)
    by_idx = emit_plot_series(run, SeriesAxis.BY_CATEGORY_INDEX)
    assert by_year[0].x == tuple(float(y) for y in run.matrix.col_labels)
    assert by_idx[0].x == tuple(float(i) for i in range(len(run.matrix.col_labels)))
    assert by_year[0].y == by_idx[0].y


def test_series_zoom_is_matrix_row_slice(corpus):
    table, _ = corpus
    run = _run(table)
    series = emit_plot_series(run)
    target = series[3]
    idx = run.matrix.label_index()[target.series_id]
    assert list(target.y) == [float(v) for v in run.matrix.values[idx]]


def test_csv_report_round_trip(tmp_path, corpus):
    table, _ = corpus
    run, manifest, paths = execute_run(
        table, ("condition",), Measure.COUNT, 2009, KMeansConfig(k=4, seed=0),
        out_dir=tmp_path, fmt="csv",
    )
    text = paths["report"].read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    assert header[0] == "condition"
    year_cols = [int(y) for y in header[5:]]
    assert year_cols == list(run.matrix.col_labels)
    labels = [r[0] for r in body]
    assert labels == sorted(labels)
    index = run.matrix.label_index()
    for row in body:
        vals = [float(v) for v in row[5:]]
        assert vals == [float(v) for v in run.matrix.values[index[(row[0],)]]]
    score_of = {r.label: r.score for r in run.removals}
    for row in body:
        if row[1] == "outlier":
            assert float(row[4]) == score_of[(row[0],)]


def test_run_id_combines_fingerprint_and_config(corpus):
    table, _ = corpus
    echo_a = detector_config_echo(
        "run", dims=("condition",), measure=Measure.COUNT, base_year=2009,
        kmeans=KMeansConfig(k=4), small_cluster_threshold=1, max_outlier_iters=10,
    )
    echo_b = detector_config_echo(
        "run", dims=("condition",), measure=Measure.COUNT, base_year=2009,
        kmeans=KMeansConfig(k=5), small_cluster_threshold=1, max_outlier_iters=10,
    )
    a = build_manifest(table, echo_a)
    b = build_manifest(table, echo_b)
    assert a.run_id.split("-")[0] == b.run_id.split("-")[0]  # same data
    assert a.run_id != b.run_id  # different config


def test_json_bytes_sorted_and_stable():
    payload = {"b": 1.5, "a": [3, 2], "nested": {"z": None, "y": "x"}}
    one = json_bytes(payload)
    two = json_bytes(dict(reversed(list(payload.items()))))
    assert one == two
    assert one.index(b'"a"') < one.index(b'"b"')
