"""Synthetic discharge data with planted anomalies.

Generates tables whose pivoted count matrix shows flat noisy trends for
every group except at planted (group, year) or (group, segment, year)
coordinates, plus the ground truth needed to grade a detector against
the plants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import ColumnKind, ColumnSpec, DatasetSchema, DischargeTable

__all__ = ["Plant", "PlantSpec", "GroundTruth", "generate_table", "write_csv", "synth_schema"]

GROUP_DIM = "condition"
SEGMENT_DIM = "segment"
REGION_DIM = "region"


@dataclass(frozen=True)
class Plant:
    """One spike: magnitude is in units of the corpus noise sd.

    ``segment`` confines the spike to a single segment value; otherwise
    the extra rows spread evenly over segments.
    """

    group: int
    year: int
    magnitude: float
    segment: int | None = None

    def __post_init__(self) -> None:
        if self.magnitude <= 0:
            raise ValueError("plant magnitude must be > 0")


@dataclass(frozen=True)
class PlantSpec:
    n_groups: int = 100
    years: tuple[int, ...] = (2009, 2010, 2011, 2012, 2013, 2014, 2015)
    base_count_range: tuple[int, int] = (200, 200)
    trend_noise_sd: float = 4.0
    n_segments: int = 5
    n_regions: int = 4
    plants: tuple[Plant, ...] = ()
    cost_range: tuple[float, float] = (50.0, 500.0)
    exact_base_year: bool = True  # first year's counts carry no noise

    def __post_init__(self) -> None:
        if self.n_groups < 1 or self.n_segments < 1 or self.n_regions < 1:
            raise ValueError("n_groups, n_segments and n_regions must be >= 1")
        if len(self.years) < 2:
            raise ValueError("need at least 2 years")
        lo, hi = self.base_count_range
        if not 0 < lo <= hi:
            raise ValueError("base_count_range must satisfy 0 < lo <= hi")
        for p in self.plants:
            if p.group not in range(self.n_groups):
                raise ValueError(f"plant group {p.group} out of range")
            if p.year not in self.years:
                raise ValueError(f"plant year {p.year} not in {self.years}")
            if p.segment is not None and p.segment not in range(self.n_segments):
                raise ValueError(f"plant segment {p.segment} out of range")


@dataclass(frozen=True)
class GroundTruth:
    planted_groups: tuple[str, ...]
    planted_pairs: tuple[tuple[str, str], ...]  # (group label, segment label)
    plants: tuple[dict, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "planted_groups": list(self.planted_groups),
            "planted_pairs": [list(p) for p in self.planted_pairs],
            "plants": list(self.plants),
        }


def group_label(i: int) -> str:
    return f"condition_{i:03d}"


def segment_label(j: int) -> str:
    return f"segment_{j}"


def region_label(r: int) -> str:
    return f"region_{r}"


def synth_schema() -> DatasetSchema:
    """Schema of the synthetic corpus: condition/segment/region x cost x year."""
    return DatasetSchema(
        columns=(
            ColumnSpec(GROUP_DIM, ColumnKind.CATEGORICAL),
            ColumnSpec(SEGMENT_DIM, ColumnKind.CATEGORICAL),
            ColumnSpec(REGION_DIM, ColumnKind.CATEGORICAL),
            ColumnSpec("cost", ColumnKind.NUMERIC),
            ColumnSpec("year", ColumnKind.YEAR),
        ),
        measure_column="cost",
        year_column="year",
    )


def generate_table(spec: PlantSpec, seed: int) -> tuple[DischargeTable, GroundTruth]:
    """Build a synthetic table plus the labels of its planted anomalies.

    Counts per (group, year) are a per-group base level plus rounded
    Gaussian noise, clamped at zero; plant spikes add magnitude * noise_sd
    extra rows at their coordinate. With ``exact_base_year`` the first
    year stays at the base level so percent-change baselines are exact.
    Rows spread over segments and regions round-robin from a seeded
    random offset, so an unplanted secondary dimension stays
    proportionally flat.
    """
    rng = np.random.default_rng(seed)
    years = np.asarray(spec.years, dtype=np.int64)
    lo, hi = spec.base_count_range
    base = rng.integers(lo, hi + 1, size=spec.n_groups)
    noise = rng.normal(0.0, spec.trend_noise_sd, size=(spec.n_groups, years.size))
    if spec.exact_base_year:
        noise[:, 0] = 0.0
    counts = np.maximum(np.rint(base[:, None] + noise), 0).astype(np.int64)

    spike = np.zeros((spec.n_groups, years.size), dtype=np.int64)  # group-spread plants
    pair_spike: dict[tuple[int, int, int], int] = {}  # (group, segment, year idx) -> rows
    for p in spec.plants:
        extra = int(round(p.magnitude * spec.trend_noise_sd))
        t = int(np.flatnonzero(years == p.year)[0])
        if p.segment is None:
            spike[p.group, t] += extra
        else:
            key = (p.group, p.segment, t)
            pair_spike[key] = pair_spike.get(key, 0) + extra

    group_col: list[int] = []
    segment_col: list[int] = []
    region_col: list[int] = []
    year_col: list[int] = []

    for g in range(spec.n_groups):
        seg_offset = int(rng.integers(spec.n_segments))
        reg_offset = int(rng.integers(spec.n_regions))
        for t in range(years.size):
            n_rows = int(counts[g, t] + spike[g, t])
            for i in range(n_rows):
                group_col.append(g)
                segment_col.append((seg_offset + i) % spec.n_segments)
                region_col.append((reg_offset + i) % spec.n_regions)
                year_col.append(int(years[t]))
    for (g, s, t), extra in sorted(pair_spike.items()):
        reg_offset = int(rng.integers(spec.n_regions))
        for i in range(extra):
            group_col.append(g)
            segment_col.append(s)
            region_col.append((reg_offset + i) % spec.n_regions)
            year_col.append(int(years[t]))

    n = len(group_col)
    costs = np.round(rng.uniform(*spec.cost_range, size=n), 2)

    table = DischargeTable(
        schema=synth_schema(),
        codes={
            GROUP_DIM: np.asarray(group_col, dtype=np.int32),
            SEGMENT_DIM: np.asarray(segment_col, dtype=np.int32),
            REGION_DIM: np.asarray(region_col, dtype=np.int32),
        },
        dictionaries={
            GROUP_DIM: tuple(group_label(i) for i in range(spec.n_groups)),
            SEGMENT_DIM: tuple(segment_label(j) for j in range(spec.n_segments)),
            REGION_DIM: tuple(region_label(r) for r in range(spec.n_regions)),
        },
        costs=costs.astype(np.float64),
        years=np.asarray(year_col, dtype=np.int64),
    )

    truth = GroundTruth(
        planted_groups=tuple(sorted({group_label(p.group) for p in spec.plants})),
        planted_pairs=tuple(
            sorted(
                {
                    (group_label(p.group), segment_label(p.segment))
                    for p in spec.plants
                    if p.segment is not None
                }
            )
        ),
        plants=tuple(
            {
                "group": group_label(p.group),
                "segment": None if p.segment is None else segment_label(p.segment),
                "year": p.year,
                "magnitude": p.magnitude,
            }
            for p in spec.plants
        ),
    )
    return table, truth


def write_csv(table: DischargeTable, path: str | Path) -> None:
    """Serialize a table back to CSV in schema column order."""
    path = Path(path)
    dims = table.schema.dimensions
    dicts = {d: table.dictionaries[d] for d in dims}
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dims) + [table.schema.measure_column, table.schema.year_column])
        for i in range(table.row_count):
            row = [dicts[d][int(table.codes[d][i])] for d in dims]
            row.append(format(float(table.costs[i]), ".17g"))
            row.append(str(int(table.years[i])))
            writer.writerow(row)
