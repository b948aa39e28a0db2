// Wire types mirroring the service's JSON responses.

export interface DatasetSummary {
  row_count: number;
  distinct_values: Record<string, number>;
  year_range: [number, number] | null;
  total_cost: number;
  dimensions: string[];
  rejected: Record<string, number>;
}

export interface DatasetEntry {
  name: string;
  summary: DatasetSummary;
  dataset_fingerprint: string;
}

export interface KMeansDefaults {
  k: number;
  seed: number;
  max_lloyd_iters: number;
  convergence_tol: number;
  restarts: number;
}

export interface Defaults {
  kmeans: KMeansDefaults;
  small_cluster_threshold: number;
  max_outlier_iters: number;
  measures: string[];
  datasets: Record<
    string,
    { dimensions: string[]; years: number[]; default_base_year: number | null }
  >;
}

export interface RunHandle {
  run_id: string;
  kind: string;
  status: "running" | "done" | "failed";
  result_url: string;
  error: string | null;
}

export interface RemovedRow {
  label: string[];
  score: number;
  vector: number[];
}

export interface RunIteration {
  iteration: number;
  rows: number;
  inertia: number;
  lloyd_iterations: number;
  cluster_sizes: number[];
  survivor_rms: number;
  surviving_centroids: number[][];
  removed: RemovedRow[];
}

export interface ClusterInfo {
  cluster: number;
  size: number;
  centroid: number[];
  members: string[][];
}

export interface RunReport {
  kind: "outlier_run";
  run_id: string;
  dataset_fingerprint: string;
  years: number[];
  row_count: number;
  iterations: RunIteration[];
  final_clusters: ClusterInfo[];
  survivors: string[][];
  outlier_count: number;
  max_outlier_score: number;
  termination_reason: string;
  matrix_warnings: string[];
  config: Record<string, unknown>;
}

export interface PlotSeriesDto {
  id: string[];
  x: number[];
  y: number[];
  role: "outlier" | "cluster_member";
  cluster: number | null;
  iteration_removed: number | null;
}

export interface SeriesResponse {
  kind: string;
  run_id: string;
  series: PlotSeriesDto[];
}

export interface SubsetEntryReport {
  matrix_shape: [number, number];
  produced_outliers: boolean;
  skipped_reason: string | null;
  clamped_k: number | null;
  run: RunReport | null;
}

export interface SubsetScanReport {
  kind: "subset_scan";
  run_id: string;
  dataset_fingerprint: string;
  primary_dimension: string;
  entries: Record<string, SubsetEntryReport>;
}

export interface RunRequestBody {
  dataset: string;
  dimensions: string[];
  measure: string;
  base_year: number;
  kmeans: Partial<KMeansDefaults>;
  small_cluster_threshold: number;
  max_outlier_iters: number;
}

export interface SubsetScanRequestBody {
  dataset: string;
  primary_dim: string;
  outlier_values: string[];
  candidate_dims: string[];
  measure: string;
  base_year: number;
  kmeans: Partial<KMeansDefaults>;
  small_cluster_threshold: number;
  max_outlier_iters: number;
}
