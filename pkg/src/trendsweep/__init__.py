"""Outlier exploration for large tabular open data.

Pipeline: dictionary-encoded ingest, pivot aggregation with percent-change
rebasing, iterative k-means outlier removal, a sweep across candidate
aggregation dimensions, and drill-down scans that cross outlier values
with secondary dimensions. Exposed as a library, CLI and HTTP service.
"""

__version__ = "0.1.0"

from .aggregate import FeatureMatrix, Measure, PivotSpec, pivot, pivot_subset, rebase_percent_change
from .ingest import (
    ColumnKind,
    ColumnSpec,
    DatasetSchema,
    DatasetSummary,
    DischargeTable,
    ErrorPolicy,
    LoadError,
    load_csv,
    load_schema_profile,
    sparcs_schema,
    summarize,
)
from .kmeans import (
    Clustering,
    KMeansConfig,
    OutlierRun,
    TerminationReason,
    iterative_kmeans,
    kmeans_fit,
)
from .searchlight import SearchlightConfig, SearchlightResult, outlier_score, run_searchlight
from .subsetscan import ScanScope, SubsetScanRequest, SubsetScanResult, subset_scan

__all__ = [
    "__version__",
    "ColumnKind",
    "ColumnSpec",
    "DatasetSchema",
    "DatasetSummary",
    "DischargeTable",
    "ErrorPolicy",
    "LoadError",
    "load_csv",
    "load_schema_profile",
    "sparcs_schema",
    "summarize",
    "FeatureMatrix",
    "Measure",
    "PivotSpec",
    "pivot",
    "pivot_subset",
    "rebase_percent_change",
    "Clustering",
    "KMeansConfig",
    "OutlierRun",
    "TerminationReason",
    "iterative_kmeans",
    "kmeans_fit",
    "SearchlightConfig",
    "SearchlightResult",
    "outlier_score",
    "run_searchlight",
    "ScanScope",
    "SubsetScanRequest",
    "SubsetScanResult",
    "subset_scan",
]
