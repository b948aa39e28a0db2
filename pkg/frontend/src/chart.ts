// Hand-rolled SVG line chart. Pure string construction: given series and
// options it returns markup plus a legend model, so tests can assert on
// the exact drawing without a DOM.

import type { PlotSeriesDto } from "./types.js";

export const CLUSTER_PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
];

export const OUTLIER_COLOR = "#c1121f";

export interface ChartOptions {
  width?: number;
  height?: number;
  hiddenClusters?: Set<number>;
}

export interface LegendEntry {
  kind: "cluster" | "outlier";
  cluster: number | null;
  color: string;
  count: number;
  hidden: boolean;
}

export interface ChartRender {
  svg: string;
  legend: LegendEntry[];
  drawnOutliers: number;
  drawnMembers: number;
}

export function clusterColor(cluster: number): string {
  return CLUSTER_PALETTE[((cluster % 10) + 10) % 10];
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function buildChart(series: PlotSeriesDto[], options: ChartOptions = {}): ChartRender {
  const width = options.width ?? 860;
  const height = options.height ?? 420;
  const hidden = options.hiddenClusters ?? new Set<number>();
  const pad = { left: 56, right: 16, top: 12, bottom: 28 };

  const visible = series.filter(
    (s) => s.role === "outlier" || !hidden.has(s.cluster ?? 0),
  );
  const xs = visible.flatMap((s) => s.x);
  const ys = visible.flatMap((s) => s.y);
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const sx = (x: number) =>
    pad.left + ((x - x0) / (x1 - x0)) * (width - pad.left - pad.right);
  const sy = (y: number) =>
    height - pad.bottom - ((y - y0) / (y1 - y0)) * (height - pad.top - pad.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img">`,
  );
  // axes and the zero line
  const zeroY = y0 <= 0 && 0 <= y1 ? sy(0) : null;
  parts.push(
    `<line class="axis" x1="${pad.left}" y1="${height - pad.bottom}" ` +
      `x2="${width - pad.right}" y2="${height - pad.bottom}" stroke="#999"/>`,
  );
  parts.push(
    `<line class="axis" x1="${pad.left}" y1="${pad.top}" ` +
      `x2="${pad.left}" y2="${height - pad.bottom}" stroke="#999"/>`,
  );
  if (zeroY !== null) {
    parts.push(
      `<line class="zero" x1="${pad.left}" y1="${zeroY.toFixed(1)}" ` +
        `x2="${width - pad.right}" y2="${zeroY.toFixed(1)}" stroke="#ccc" stroke-dasharray="2 4"/>`,
    );
  }
  for (const x of [...new Set(xs)].sort((a, b) => a - b)) {
    parts.push(
      `<text class="tick" x="${sx(x).toFixed(1)}" y="${height - 8}" ` +
        `text-anchor="middle" font-size="11">${x}</text>`,
    );
  }
  for (const y of [y0, (y0 + y1) / 2, y1]) {
    parts.push(
      `<text class="tick" x="${pad.left - 6}" y="${(sy(y) + 4).toFixed(1)}" ` +
        `text-anchor="end" font-size="11">${y.toFixed(1)}</text>`,
    );
  }

  let drawnOutliers = 0;
  let drawnMembers = 0;
  const memberParts: string[] = [];
  const outlierParts: string[] = [];
  for (const s of visible) {
    const points = s.x
      .map((x, i) => `${sx(x).toFixed(1)},${sy(s.y[i]).toFixed(1)}`)
      .join(" ");
    const label = s.id.join("/");
    const hover = `${label}: ${s.y.map((v) => v.toFixed(1)).join(", ")}`;
    if (s.role === "outlier") {
      drawnOutliers += 1;
      // iteration badge at the series' peak magnitude
      let peak = 0;
      for (let i = 1; i < s.y.length; i++) {
        if (Math.abs(s.y[i]) > Math.abs(s.y[peak])) peak = i;
      }
      outlierParts.push(
        `<g class="series outlier" data-label="${escapeXml(label)}" ` +
          `data-iteration="${s.iteration_removed}">` +
          `<title>${escapeXml(hover)} (removed in iteration ${s.iteration_removed})</title>` +
          `<polyline points="${points}" fill="none" stroke="${OUTLIER_COLOR}" ` +
          `stroke-width="2" stroke-dasharray="6 3"/>` +
          `<text class="badge" x="${sx(s.x[peak]).toFixed(1)}" ` +
          `y="${(sy(s.y[peak]) - 6).toFixed(1)}" text-anchor="middle" font-size="11" ` +
          `fill="${OUTLIER_COLOR}">#${s.iteration_removed}</text>` +
          `</g>`,
      );
    } else {
      drawnMembers += 1;
      const color = clusterColor(s.cluster ?? 0);
      memberParts.push(
        `<g class="series member" data-label="${escapeXml(label)}" ` +
          `data-cluster="${s.cluster ?? 0}">` +
          `<title>${escapeXml(hover)} (cluster ${s.cluster ?? 0})</title>` +
          `<polyline points="${points}" fill="none" stroke="${color}" ` +
          `stroke-width="1" opacity="0.75"/>` +
          `</g>`,
      );
    }
  }
  parts.push(...memberParts, ...outlierParts, "</svg>");

  const clusterCounts = new Map<number, number>();
  let outlierCount = 0;
  for (const s of series) {
    if (s.role === "outlier") outlierCount += 1;
    else {
      const c = s.cluster ?? 0;
      clusterCounts.set(c, (clusterCounts.get(c) ?? 0) + 1);
    }
  }
  const legend: LegendEntry[] = [...clusterCounts.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([cluster, count]) => ({
      kind: "cluster" as const,
      cluster,
      color: clusterColor(cluster),
      count,
      hidden: hidden.has(cluster),
    }));
  if (outlierCount > 0) {
    legend.push({
      kind: "outlier",
      cluster: null,
      color: OUTLIER_COLOR,
      count: outlierCount,
      hidden: false,
    });
  }
  return { svg: parts.join("\n"), legend, drawnOutliers, drawnMembers };
}

export function toggleCluster(hidden: Set<number>, cluster: number): Set<number> {
  const next = new Set(hidden);
  if (next.has(cluster)) next.delete(cluster);
  else next.add(cluster);
  return next;
}
