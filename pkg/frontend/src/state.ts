// Explorer state and its pure transitions. The DOM layer only dispatches
// these and renders the result, which keeps the loop logic testable
// without a browser.

import type { Defaults, RunRequestBody, SubsetScanRequestBody } from "./types.js";

export interface PivotForm {
  dimension: string;
  measure: string;
  baseYear: number | null;
}

export interface DetectorForm {
  k: number;
  threshold: number;
  seed: number;
}

export interface DrillForm {
  primaryDim: string;
  values: string[];
  candidates: string[];
}

export interface ExplorerState {
  dataset: string | null;
  dimensions: string[];
  measures: string[];
  years: number[];
  pivot: PivotForm;
  detector: DetectorForm;
  runToken: number;
  inFlight: boolean;
  currentRunId: string | null;
  selectedOutliers: string[][];
  drillOpen: boolean;
  drillRunId: string | null;
  error: string | null;
}

export function initialState(): ExplorerState {
  return {
    dataset: null,
    dimensions: [],
    measures: [],
    years: [],
    pivot: { dimension: "", measure: "count", baseYear: null },
    detector: { k: 8, threshold: 1, seed: 0 },
    runToken: 0,
    inFlight: false,
    currentRunId: null,
    selectedOutliers: [],
    drillOpen: false,
    drillRunId: null,
    error: null,
  };
}

// Forms echo server-side defaults so UI and engine cannot drift.
export function applyDefaults(
  state: ExplorerState,
  defaults: Defaults,
  dataset: string,
): ExplorerState {
  const info = defaults.datasets[dataset];
  if (!info) throw new Error(`unknown dataset ${dataset}`);
  return {
    ...state,
    dataset,
    dimensions: info.dimensions,
    measures: defaults.measures,
    years: info.years,
    pivot: {
      dimension: info.dimensions[0] ?? "",
      measure: defaults.measures[0] ?? "count",
      baseYear: info.default_base_year,
    },
    detector: {
      k: defaults.kmeans.k,
      threshold: defaults.small_cluster_threshold,
      seed: defaults.kmeans.seed,
    },
    currentRunId: null,
    selectedOutliers: [],
    drillOpen: false,
    drillRunId: null,
    error: null,
  };
}

// One in-flight run per panel: starting a run invalidates earlier tokens.
export function beginRun(state: ExplorerState): [ExplorerState, number] {
  const token = state.runToken + 1;
  return [
    { ...state, runToken: token, inFlight: true, error: null },
    token,
  ];
}

// Responses for superseded tokens are discarded.
export function completeRun(
  state: ExplorerState,
  token: number,
  runId: string,
): ExplorerState {
  if (token !== state.runToken) return state;
  return {
    ...state,
    inFlight: false,
    currentRunId: runId,
    selectedOutliers: [],
    drillOpen: false,
    drillRunId: null,
  };
}

export function failRun(state: ExplorerState, token: number, message: string): ExplorerState {
  if (token !== state.runToken) return state;
  return { ...state, inFlight: false, error: message };
}

export function toggleOutlier(state: ExplorerState, label: string[]): ExplorerState {
  const key = JSON.stringify(label);
  const selected = state.selectedOutliers.filter((l) => JSON.stringify(l) !== key);
  if (selected.length === state.selectedOutliers.length) selected.push(label);
  return { ...state, selectedOutliers: selected };
}

export function canDrill(state: ExplorerState): boolean {
  return state.selectedOutliers.length > 0;
}

// The drill panel opens only when at least one outlier is selected.
export function openDrill(state: ExplorerState): ExplorerState {
  if (!canDrill(state)) return { ...state, drillOpen: false };
  return { ...state, drillOpen: true };
}

export function drillCandidates(state: ExplorerState): string[] {
  return state.dimensions.filter((d) => d !== state.pivot.dimension);
}

export function buildDrillForm(state: ExplorerState): DrillForm | null {
  if (!canDrill(state)) return null;
  return {
    primaryDim: state.pivot.dimension,
    // single-dimension run labels are 1-tuples
    values: state.selectedOutliers.map((label) => label[0]),
    candidates: drillCandidates(state),
  };
}

// Selecting a flagged (primary value, subset value) row pre-fills the
// next drill: the subset dimension becomes the primary, its value the
// selection. This is the steering loop.
export function prefillFromFlaggedRow(
  state: ExplorerState,
  subsetDim: string,
  rowLabel: string[],
): ExplorerState {
  const subsetValue = rowLabel[rowLabel.length - 1];
  return {
    ...state,
    pivot: { ...state.pivot, dimension: subsetDim },
    selectedOutliers: [[subsetValue]],
    drillOpen: true,
  };
}

export function surfaceError(state: ExplorerState, message: string): ExplorerState {
  // forms are preserved: only the error field changes
  return { ...state, error: message };
}

export function clearError(state: ExplorerState): ExplorerState {
  return { ...state, error: null };
}

// Request bodies are built here so the DOM layer and the tests drive the
// service through identical payloads.
export function buildRunBody(state: ExplorerState): RunRequestBody | null {
  if (!state.dataset || !state.pivot.dimension || state.pivot.baseYear === null) return null;
  return {
    dataset: state.dataset,
    dimensions: [state.pivot.dimension],
    measure: state.pivot.measure,
    base_year: state.pivot.baseYear,
    kmeans: { k: state.detector.k, seed: state.detector.seed },
    small_cluster_threshold: state.detector.threshold,
    max_outlier_iters: 10,
  };
}

export function buildDrillBody(state: ExplorerState): SubsetScanRequestBody | null {
  const form = buildDrillForm(state);
  if (!form || !state.dataset || state.pivot.baseYear === null) return null;
  if (!form.candidates.length) return null;
  return {
    dataset: state.dataset,
    primary_dim: form.primaryDim,
    outlier_values: form.values,
    candidate_dims: form.candidates,
    measure: state.pivot.measure,
    base_year: state.pivot.baseYear,
    // drill matrices are much smaller than the primary run's, so the
    // cluster count steps down
    kmeans: { k: Math.max(2, Math.min(state.detector.k, 4)), seed: state.detector.seed },
    small_cluster_threshold: state.detector.threshold,
    max_outlier_iters: 10,
  };
}
