"""Seeded k-means and the iterative small-cluster outlier loop.

The clustering core is deliberately hand-rolled: assignment ties break to
the lower centroid index, empty centroids reseed at the point farthest
from its assigned centroid, and every random draw flows from a generator
derived from (seed, restart index), so identical inputs always produce
identical runs down to the removal order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .aggregate import FeatureMatrix

__all__ = [
    "KMeansConfig",
    "Clustering",
    "TerminationReason",
    "Removal",
    "OutlierIteration",
    "OutlierRun",
    "kmeans_fit",
    "iterative_kmeans",
    "nearest_centroid_distance",
    "survivor_rms",
]

_MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    seed: int = 0
    max_lloyd_iters: int = 300
    convergence_tol: float = 1e-6
    restarts: int = 8

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_lloyd_iters < 1:
            raise ValueError("max_lloyd_iters must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")


@dataclass(frozen=True)
class Clustering:
    """One converged k-means solution over a fixed row set."""

    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations_used: int
    inertia_trace: tuple[float, ...]

    def __post_init__(self) -> None:
        self.assignments.setflags(write=False)
        self.centroids.setflags(write=False)

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


class TerminationReason(str, Enum):
    NO_SMALL_CLUSTERS = "no_small_clusters"
    MAX_ITERATIONS = "max_iterations"
    TOO_FEW_ROWS = "too_few_rows"


@dataclass(frozen=True)
class Removal:
    label: tuple[str, ...]
    score: float
    row_index: int  # index into the original matrix


@dataclass(frozen=True)
class OutlierIteration:
    row_indices: np.ndarray  # original indices of the rows this fit saw
    clustering: Clustering
    removed: tuple[Removal, ...]


@dataclass(frozen=True)
class OutlierRun:
    """Full trace of an iterative k-means execution."""

    matrix: FeatureMatrix
    iterations: tuple[OutlierIteration, ...]
    survivor_indices: np.ndarray
    final_clustering: Clustering
    config: KMeansConfig
    small_cluster_threshold: int
    max_outlier_iters: int
    termination_reason: TerminationReason

    def __post_init__(self) -> None:
        self.survivor_indices.setflags(write=False)
        removed = [r.row_index for step in self.iterations for r in step.removed]
        if len(set(removed)) != len(removed):
            raise ValueError("removal sets across iterations must be disjoint")
        union = set(removed) | set(int(i) for i in self.survivor_indices)
        if union != set(range(len(self.matrix.row_labels))):
            raise ValueError("removed and survivors must partition the original rows")

    @property
    def removals(self) -> tuple[Removal, ...]:
        return tuple(r for step in self.iterations for r in step.removed)

    @property
    def outlier_count(self) -> int:
        return len(self.removals)

    @property
    def max_outlier_score(self) -> float:
        return max((r.score for r in self.removals), default=0.0)

    @property
    def survivor_labels(self) -> tuple[tuple[str, ...], ...]:
        return tuple(self.matrix.row_labels[int(i)] for i in self.survivor_indices)

    def iteration_removed(self, row_index: int) -> int | None:
        """1-based iteration at which a row was removed, or None for survivors."""
        for step_no, step in enumerate(self.iterations, start=1):
            for r in step.removed:
                if r.row_index == row_index:
                    return step_no
        return None


def nearest_centroid_distance(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Euclidean distance from each row to its nearest centroid."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if centroids.shape[0] == 0:
        raise ValueError("centroid set must be non-empty")
    if rows.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: rows have {rows.shape[1]}, centroids {centroids.shape[1]}"
        )
    d2 = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def survivor_rms(rows: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    """Root-mean-square distance of rows to their assigned centroids.

    Returns 1.0 when every row sits exactly on its centroid, so scores
    normalized by this value stay defined.
    """
    if rows.shape[0] == 0:
        return 1.0
    d2 = ((rows - centroids[assignments]) ** 2).sum(axis=1)
    rms = float(np.sqrt(d2.mean()))
    return rms if rms > 0.0 else 1.0


def _plusplus_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = values.shape[0]
    centroids = np.empty((k, values.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = values[first]
    if k == 1:
        return centroids
    d2 = ((values - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = values[idx]
        d2 = np.minimum(d2, ((values - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(
    values: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    n, dim = values.shape
    centroids = _plusplus_init(values, k, rng)
    prev: float | None = None
    trace: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    inertia = 0.0

    for it in range(max_iters):
        d2 = ((values[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)  # ties break to the lower centroid index
        inertia = float(d2[np.arange(n), labels].sum())
        trace.append(inertia)

        if prev is not None:
            if inertia > prev and (inertia - prev) > _MONOTONE_RTOL * max(prev, 1.0):
                raise AssertionError(
                    f"inertia increased {prev} -> {inertia} within a Lloyd run"
                )
            if prev == 0.0 or (prev - inertia) <= tol * prev:
                return labels, centroids, inertia, it + 1, trace
        if it == max_iters - 1:
            break

        counts = np.bincount(labels, minlength=k)
        sums = np.empty((k, dim), dtype=np.float64)
        for d in range(dim):
            sums[:, d] = np.bincount(labels, weights=values[:, d], minlength=k)
        nonzero = counts > 0
        new_centroids = centroids.copy()
        new_centroids[nonzero] = sums[nonzero] / counts[nonzero, None]

        empties = np.flatnonzero(~nonzero)
        if empties.size:
            # reseed each empty centroid at the point farthest from its
            # assigned (updated) centroid; ties and repeats resolved by
            # ascending row index for determinism
            dist_own = ((values - new_centroids[labels]) ** 2).sum(axis=1)
            order = np.argsort(-dist_own, kind="stable")
            used: set[int] = set()
            cursor = 0
            for j in empties:
                while int(order[cursor]) in used:
                    cursor += 1
                pick = int(order[cursor])
                used.add(pick)
                new_centroids[j] = values[pick]
        centroids = new_centroids
        prev = inertia

    return labels, centroids, inertia, len(trace), trace


def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, restart]))


def kmeans_fit(matrix: FeatureMatrix, config: KMeansConfig) -> Clustering:
    """Best-of-restarts Lloyd's k-means on the matrix rows.

    Each restart initializes with the k-means++ scheme from a generator
    derived from (seed, restart index); the minimum-inertia run wins,
    ties going to the lowest restart index.
    """
    values = matrix.values
    n = values.shape[0]
    if n < config.k:
        raise ValueError(f"need at least k={config.k} rows, have {n}")
    if values.size and not np.all(np.isfinite(values)):
        raise ValueError("matrix contains non-finite values")

    best: tuple[np.ndarray, np.ndarray, float, int, list[float]] | None = None
    for restart in range(config.restarts):
        rng = _restart_rng(config.seed, restart)
        result = _lloyd(values, config.k, rng, config.max_lloyd_iters, config.convergence_tol)
        if best is None or result[2] < best[2]:
            best = result

    labels, centroids, inertia, iters, trace = best
    clustering = Clustering(
        assignments=labels.copy(),
        centroids=centroids.copy(),
        inertia=inertia,
        iterations_used=iters,
        inertia_trace=tuple(trace),
    )
    recomputed = float(((values - centroids[labels]) ** 2).sum())
    if abs(recomputed - inertia) > _MONOTONE_RTOL * max(inertia, 1.0):
        raise AssertionError("stored inertia does not match assignments and centroids")
    return clustering


def iterative_kmeans(
    matrix: FeatureMatrix,
    config: KMeansConfig,
    small_cluster_threshold: int = 1,
    max_outlier_iters: int = 10,
) -> OutlierRun:
    """Repeated k-means where small clusters dissolve into the outlier set.

    Per pass: fit, dissolve every cluster of size <= threshold, score the
    dissolved rows against the surviving centroids, then re-fit what is
    left. Stops when a pass removes nothing, after max_outlier_iters
    passes, or once fewer than k + 1 rows remain. If every populated
    cluster is small, the largest one (ties to the lowest cluster index)
    is kept so a pass can never empty the matrix.
    """
    if small_cluster_threshold < 1:
        raise ValueError("small_cluster_threshold must be >= 1")
    if max_outlier_iters < 1:
        raise ValueError("max_outlier_iters must be >= 1")
    n = len(matrix.row_labels)
    if n < config.k + 1:
        raise ValueError(f"need at least k+1={config.k + 1} rows, have {n}")

    current = np.arange(n)
    steps: list[OutlierIteration] = []
    reason: TerminationReason
    final_clustering: Clustering | None = None
    step_no = 0

    while True:
        step_no += 1
        sub = matrix.take(current)
        clustering = kmeans_fit(sub, config)
        sizes = clustering.cluster_sizes()
        dissolved = [j for j in range(config.k) if sizes[j] <= small_cluster_threshold]
        if dissolved and not any(sizes[j] > small_cluster_threshold for j in range(config.k)):
            keep = int(np.argmax(sizes))
            dissolved = [j for j in dissolved if j != keep]

        removed_mask = np.isin(clustering.assignments, dissolved)
        removed_local = np.flatnonzero(removed_mask)
        survivor_local = np.flatnonzero(~removed_mask)

        removals: list[Removal] = []
        if removed_local.size:
            surviving_ids = [j for j in range(config.k) if j not in dissolved]
            surviving_centroids = clustering.centroids[surviving_ids]
            rms = survivor_rms(
                sub.values[survivor_local],
                clustering.assignments[survivor_local],
                clustering.centroids,
            )
            dists = nearest_centroid_distance(sub.values[removed_local], surviving_centroids)
            for pos, dist in zip(removed_local, dists):
                orig = int(current[pos])
                removals.append(
                    Removal(label=matrix.row_labels[orig], score=float(dist / rms), row_index=orig)
                )

        steps.append(
            OutlierIteration(
                row_indices=current.copy(), clustering=clustering, removed=tuple(removals)
            )
        )

        if not removals:
            reason = TerminationReason.NO_SMALL_CLUSTERS
            final_clustering = clustering
            break
        current = current[survivor_local]
        if step_no >= max_outlier_iters:
            reason = TerminationReason.MAX_ITERATIONS
            break
        if current.size < config.k + 1:
            reason = TerminationReason.TOO_FEW_ROWS
            break

    if final_clustering is None:
        # the loop ended right after a removal; re-fit so the reported
        # clusters describe the survivors (unless too few rows remain)
        if current.size >= config.k:
            final_clustering = kmeans_fit(matrix.take(current), config)
        else:
            final_clustering = steps[-1].clustering

    return OutlierRun(
        matrix=matrix,
        iterations=tuple(steps),
        survivor_indices=current,
        final_clustering=final_clustering,
        config=config,
        small_cluster_threshold=small_cluster_threshold,
        max_outlier_iters=max_outlier_iters,
        termination_reason=reason,
    )
