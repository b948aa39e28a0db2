// DOM wiring for the explorer: forms drive the service, responses drive
// the screen. All analytics come from service responses; the request log
// panel accounts for each of them.

import { ApiClient, ApiError } from "./api.js";
import { buildChart, toggleCluster } from "./chart.js";
import {
  ExplorerState,
  applyDefaults,
  beginRun,
  buildDrillBody,
  buildRunBody,
  canDrill,
  completeRun,
  drillCandidates,
  failRun,
  initialState,
  openDrill,
  prefillFromFlaggedRow,
  surfaceError,
  toggleOutlier,
} from "./state.js";
import type {
  Defaults,
  PlotSeriesDto,
  RunReport,
  SubsetScanReport,
} from "./types.js";

const api = new ApiClient("..");

let state: ExplorerState = initialState();
let defaults: Defaults | null = null;
let report: RunReport | null = null;
let series: PlotSeriesDto[] = [];
let scan: SubsetScanReport | null = null;
let activeTab: string | null = null;
let hiddenClusters = new Set<number>();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function setState(next: ExplorerState): void {
  state = next;
  renderError();
  renderControls();
  renderOutliers();
  renderDrill();
}

function renderError(): void {
  const panel = byId("error-panel");
  panel.textContent = state.error ?? "";
  panel.style.display = state.error ? "block" : "none";
}

function option(value: string, label?: string): HTMLOptionElement {
  return el("option", { value }, label ?? value);
}

function renderControls(): void {
  const dimSelect = byId("dimension") as HTMLSelectElement;
  const measureSelect = byId("measure") as HTMLSelectElement;
  const yearSelect = byId("base-year") as HTMLSelectElement;
  if (dimSelect.options.length !== state.dimensions.length) {
    dimSelect.replaceChildren(...state.dimensions.map((d) => option(d)));
    measureSelect.replaceChildren(...state.measures.map((m) => option(m)));
    yearSelect.replaceChildren(...state.years.map((y) => option(String(y))));
  }
  dimSelect.value = state.pivot.dimension;
  measureSelect.value = state.pivot.measure;
  if (state.pivot.baseYear !== null) yearSelect.value = String(state.pivot.baseYear);
  (byId("k") as HTMLInputElement).value = String(state.detector.k);
  (byId("threshold") as HTMLInputElement).value = String(state.detector.threshold);
  (byId("seed") as HTMLInputElement).value = String(state.detector.seed);
  (byId("run-btn") as HTMLButtonElement).disabled = state.inFlight || !state.dataset;
  byId("run-status").textContent = state.inFlight
    ? "running..."
    : state.currentRunId
      ? `run ${state.currentRunId}`
      : "";
}

function renderChart(): void {
  const mount = byId("chart");
  if (!series.length) {
    mount.innerHTML = "<p class='hint'>run the detector to see trend curves</p>";
    byId("legend").replaceChildren();
    return;
  }
  const render = buildChart(series, { hiddenClusters });
  mount.innerHTML = render.svg;
  const legend = byId("legend");
  legend.replaceChildren(
    ...render.legend.map((entry) => {
      const label =
        entry.kind === "cluster"
          ? `cluster ${entry.cluster} (${entry.count})`
          : `outliers (${entry.count})`;
      const chip = el(
        "button",
        {
          class: `legend-chip${entry.hidden ? " hidden-cluster" : ""}`,
          "data-cluster": String(entry.cluster ?? ""),
          type: "button",
        },
        el("span", { class: "swatch", style: `background:${entry.color}` }),
        label,
      );
      if (entry.kind === "cluster") {
        chip.addEventListener("click", () => {
          hiddenClusters = toggleCluster(hiddenClusters, entry.cluster ?? 0);
          renderChart();
        });
      }
      return chip;
    }),
  );
}

function renderOutliers(): void {
  const panel = byId("outliers");
  if (!report) {
    panel.replaceChildren(el("p", { class: "hint" }, "no run yet"));
    return;
  }
  const removals = report.iterations.flatMap((it) =>
    it.removed.map((r) => ({ ...r, iteration: it.iteration })),
  );
  if (!removals.length) {
    panel.replaceChildren(el("p", { class: "hint" }, "no outliers in this run"));
    return;
  }
  const selected = new Set(state.selectedOutliers.map((l) => JSON.stringify(l)));
  const rows = removals.map((r) => {
    const key = JSON.stringify(r.label);
    const checkbox = el("input", { type: "checkbox" }) as HTMLInputElement;
    checkbox.checked = selected.has(key);
    checkbox.addEventListener("change", () => setState(toggleOutlier(state, r.label)));
    return el(
      "tr",
      {},
      el("td", {}, checkbox),
      el("td", {}, r.label.join("/")),
      el("td", { class: "num" }, r.score.toFixed(2)),
      el("td", { class: "num" }, `#${r.iteration}`),
    );
  });
  const drillBtn = el(
    "button",
    { type: "button", id: "drill-btn" },
    "drill selected",
  ) as HTMLButtonElement;
  const candidates = drillCandidates(state);
  drillBtn.disabled = !canDrill(state) || candidates.length === 0;
  drillBtn.title = !candidates.length
    ? "no secondary dimensions to cross with"
    : canDrill(state)
      ? "cross the selected outliers with secondary dimensions"
      : "select at least one outlier to drill";
  drillBtn.addEventListener("click", () => {
    setState(openDrill(state));
    void runDrill();
  });
  panel.replaceChildren(
    el(
      "table",
      {},
      el(
        "thead",
        {},
        el("tr", {}, el("th", {}, ""), el("th", {}, "label"), el("th", {}, "score"), el("th", {}, "iter")),
      ),
      el("tbody", {}, ...rows),
    ),
    drillBtn,
  );
}

function renderDrill(): void {
  const panel = byId("drill-panel");
  panel.style.display = state.drillOpen ? "block" : "none";
  if (!state.drillOpen || !scan) {
    if (!scan) byId("drill-tabs").replaceChildren();
    return;
  }
  const tabs = byId("drill-tabs");
  const names = Object.keys(scan.entries).sort();
  if (activeTab === null || !names.includes(activeTab)) activeTab = names[0] ?? null;
  tabs.replaceChildren(
    ...names.map((name) => {
      const entry = scan!.entries[name];
      const flagged = entry.produced_outliers;
      const btn = el(
        "button",
        {
          type: "button",
          class:
            `tab${name === activeTab ? " active" : ""}` + (flagged ? " flagged" : ""),
          "data-dim": name,
        },
        flagged ? `${name} !` : name,
      );
      btn.addEventListener("click", () => {
        activeTab = name;
        renderDrill();
      });
      return btn;
    }),
  );
  const body = byId("drill-body");
  if (!activeTab) {
    body.replaceChildren();
    return;
  }
  const entry = scan.entries[activeTab];
  if (entry.skipped_reason) {
    body.replaceChildren(el("p", { class: "hint" }, `skipped: ${entry.skipped_reason}`));
    return;
  }
  const run = entry.run!;
  const removals = run.iterations.flatMap((it) =>
    it.removed.map((r) => ({ ...r, iteration: it.iteration })),
  );
  if (!removals.length) {
    body.replaceChildren(
      el("p", { class: "hint" }, `no outliers when crossed with ${activeTab}`),
    );
    return;
  }
  const rows = removals.map((r) => {
    const tr = el(
      "tr",
      { class: "drill-row", "data-label": r.label.join("/") },
      el("td", {}, r.label.join("/")),
      el("td", { class: "num" }, r.score.toFixed(2)),
      el("td", { class: "num" }, `#${r.iteration}`),
    );
    tr.addEventListener("click", () => {
      // steering loop: a flagged row seeds the next drill
      setState(prefillFromFlaggedRow(state, activeTab!, r.label));
    });
    return tr;
  });
  body.replaceChildren(
    el(
      "table",
      {},
      el(
        "thead",
        {},
        el("tr", {}, el("th", {}, "label"), el("th", {}, "score"), el("th", {}, "iter")),
      ),
      el("tbody", {}, ...rows),
    ),
  );
}

function renderLog(): void {
  const rows = api.log
    .all()
    .slice(-30)
    .reverse()
    .map((entry) =>
      el(
        "tr",
        { class: entry.ok ? "" : "failed" },
        el("td", {}, entry.method),
        el("td", {}, entry.path),
        el("td", { class: "num" }, String(entry.status)),
        el("td", { class: "num" }, `${entry.durationMs}ms`),
      ),
    );
  byId("request-log").replaceChildren(
    el(
      "table",
      {},
      el(
        "thead",
        {},
        el("tr", {}, el("th", {}, "method"), el("th", {}, "path"), el("th", {}, "status"), el("th", {}, "ms")),
      ),
      el("tbody", {}, ...rows),
    ),
  );
}

async function runDetector(): Promise<void> {
  const body = buildRunBody(state);
  if (!body) return;
  const [next, token] = beginRun(state);
  setState(next);
  try {
    const handle = await api.startRun(body);
    if (handle.status === "failed") throw new ApiError(500, handle.error ?? "run failed");
    report = await api.report(handle.run_id);
    series = (await api.series(handle.run_id)).series;
    scan = null;
    hiddenClusters = new Set();
    setState(completeRun(state, token, handle.run_id));
    renderChart();
  } catch (err) {
    const message = err instanceof ApiError ? err.detail : String(err);
    setState(failRun(state, token, message));
  } finally {
    renderLog();
  }
}

async function runDrill(): Promise<void> {
  const body = buildDrillBody(state);
  if (!body) return;
  try {
    const handle = await api.subsetScan(body);
    if (handle.status === "failed") throw new ApiError(500, handle.error ?? "scan failed");
    scan = await api.subsetScanReport(handle.run_id);
    activeTab = null;
    setState({ ...state, drillRunId: handle.run_id });
  } catch (err) {
    const message = err instanceof ApiError ? err.detail : String(err);
    setState(surfaceError(state, message));
  } finally {
    renderLog();
  }
}

async function boot(): Promise<void> {
  try {
    defaults = await api.defaults();
    const datasets = Object.keys(defaults.datasets).sort();
    const select = byId("dataset") as HTMLSelectElement;
    select.replaceChildren(...datasets.map((d) => option(d)));
    select.addEventListener("change", () => {
      setState(applyDefaults(initialState(), defaults!, select.value));
      report = null;
      series = [];
      scan = null;
      renderChart();
    });
    if (datasets.length) {
      select.value = datasets[0];
      setState(applyDefaults(state, defaults, datasets[0]));
    }
    byId("run-btn").addEventListener("click", () => void runDetector());
    for (const [id, apply] of [
      ["dimension", (v: string) => (state = { ...state, pivot: { ...state.pivot, dimension: v } })],
      ["measure", (v: string) => (state = { ...state, pivot: { ...state.pivot, measure: v } })],
      ["base-year", (v: string) => (state = { ...state, pivot: { ...state.pivot, baseYear: Number(v) } })],
      ["k", (v: string) => (state = { ...state, detector: { ...state.detector, k: Number(v) } })],
      ["threshold", (v: string) => (state = { ...state, detector: { ...state.detector, threshold: Number(v) } })],
      ["seed", (v: string) => (state = { ...state, detector: { ...state.detector, seed: Number(v) } })],
    ] as const) {
      byId(id).addEventListener("change", (event) =>
        apply((event.target as HTMLInputElement).value),
      );
    }
    renderChart();
    renderLog();
  } catch (err) {
    const message = err instanceof ApiError ? err.detail : String(err);
    setState(surfaceError(state, `failed to load defaults: ${message}`));
  }
}

if (typeof document !== "undefined") {
  void boot();
}
