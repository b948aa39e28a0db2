// The steering loop against a live service: load a synthetic dataset,
// run the detector, check the highlighted curves against the report,
// select the outliers, drill, and match the flagged tab to the testkit
// ground truth. No browser: the same modules the DOM layer uses drive
// the loop directly.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { buildChart } from "../src/chart.js";
import {
  applyDefaults,
  beginRun,
  buildDrillBody,
  buildRunBody,
  canDrill,
  completeRun,
  initialState,
  openDrill,
  toggleOutlier,
  type ExplorerState,
} from "../src/state.js";

const PORT = 8973;
const BASE = `http://127.0.0.1:${PORT}`;

let workDir: string;
let server: ChildProcess | null = null;
let truth: { planted_groups: string[]; planted_pairs: string[][] };

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/datasets`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "explorer-loop-"));
  const csvPath = join(workDir, "demo.csv");
  const truthPath = join(workDir, "truth.json");
  const synth = spawnSync(
    "python3",
    [
      "-m", "trendsweep.cli", "synth",
      "--out", csvPath, "--truth", truthPath,
      "--groups", "40", "--plants", "2", "--pair-plants", "1",
      "--magnitude", "12", "--seed", "5",
    ],
    { encoding: "utf-8" },
  );
  if (synth.status !== 0) throw new Error(`synth failed: ${synth.stderr}`);
  truth = JSON.parse(readFileSync(truthPath, "utf-8"));

  server = spawn(
    "python3",
    [
      "-m", "trendsweep.cli", "serve",
      "--data", `demo=${csvPath}`, "--schema", "synth",
      "--bind", `127.0.0.1:${PORT}`,
      "--report-dir", join(workDir, "reports"),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill("SIGTERM");
  rmSync(workDir, { recursive: true, force: true });
});

describe("explorer loop against the live service", () => {
  it("run -> highlighted curves -> select -> drill -> flagged tab matches ground truth", async () => {
    const api = new ApiClient(BASE);

    // load the dataset and echo server defaults into the forms
    const defaults = await api.defaults();
    let state: ExplorerState = applyDefaults(initialState(), defaults, "demo");
    expect(state.pivot.dimension).toBe("condition");
    expect(state.pivot.baseYear).toBe(2009);
    state = {
      ...state,
      detector: { ...state.detector, k: 6, seed: 3 },
    };

    // run the detector
    let token: number;
    [state, token] = beginRun(state);
    const handle = await api.startRun(buildRunBody(state)!);
    expect(handle.status).toBe("done");
    const report = await api.report(handle.run_id);
    const series = (await api.series(handle.run_id)).series;
    state = completeRun(state, token, handle.run_id);
    expect(state.currentRunId).toBe(handle.run_id);

    // highlighted curves match the report's removal count, members the rest
    const render = buildChart(series);
    expect(render.drawnOutliers).toBe(report.outlier_count);
    expect(render.drawnOutliers + render.drawnMembers).toBe(report.row_count);

    // the detector recovered exactly the planted groups
    const removedLabels = report.iterations.flatMap((it) => it.removed.map((r) => r.label));
    expect(removedLabels.map((l) => l[0]).sort()).toEqual([...truth.planted_groups].sort());

    // select every outlier, open the drill panel
    for (const label of removedLabels) state = toggleOutlier(state, label);
    expect(canDrill(state)).toBe(true);
    state = openDrill(state);
    expect(state.drillOpen).toBe(true);

    // drill across the secondary dimensions
    const drillBody = buildDrillBody(state)!;
    expect(drillBody.candidate_dims).toEqual(["segment", "region"]);
    const scanHandle = await api.subsetScan(drillBody);
    expect(scanHandle.status).toBe("done");
    const scan = await api.subsetScanReport(scanHandle.run_id);

    // the flagged tab names exactly the planted dimension and pair
    const flagged = Object.entries(scan.entries)
      .filter(([, e]) => e.produced_outliers)
      .map(([dim]) => dim);
    expect(flagged).toEqual(["segment"]);
    const segRun = scan.entries.segment.run!;
    const removals = segRun.iterations.flatMap((it) => it.removed);
    const top = removals.reduce((a, b) => (b.score > a.score ? b : a));
    expect(top.label).toEqual(truth.planted_pairs[0]);

    // every number on screen is traceable to a logged service response
    const paths = api.log.all().map((e) => e.path);
    expect(paths).toContain("/defaults");
    expect(paths).toContain("/runs");
    expect(paths).toContain(`/runs/${handle.run_id}`);
    expect(paths).toContain("/subset-scan");
    expect(api.log.all().every((e) => e.ok)).toBe(true);
  }, 60_000);

  it("stale run ids surface a 404 and the form is preserved", async () => {
    const api = new ApiClient(BASE);
    const defaults = await api.defaults();
    const state = applyDefaults(initialState(), defaults, "demo");
    const err = await api.report("ffffffffffff-ffffffffffff").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    // the form survives the failure untouched
    expect(state.pivot.dimension).toBe("condition");
  });

  it("server-side validation errors carry the field detail", async () => {
    const api = new ApiClient(BASE);
    const err = await api
      .startRun({
        dataset: "demo",
        dimensions: ["bogus"],
        measure: "count",
        base_year: 2009,
        kmeans: { k: 4 },
        small_cluster_threshold: 1,
        max_outlier_iters: 10,
      })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.detail).toContain("bogus");
  });
});
