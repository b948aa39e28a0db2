// Typed client for the outlier service. fetch is injectable so tests can
// run without a browser or a live server.

import type {
  DatasetEntry,
  Defaults,
  RunHandle,
  RunReport,
  RunRequestBody,
  SeriesResponse,
  SubsetScanReport,
  SubsetScanRequestBody,
} from "./types.js";
import { RequestLog } from "./requestlog.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly log: RequestLog;
  private readonly fetchImpl: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
    log?: RequestLog,
  ) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
    this.log = log ?? new RequestLog();
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const started = Date.now();
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    this.log.record({
      method,
      path,
      status: response.status,
      ok: response.ok,
      durationMs: Date.now() - started,
      at: new Date(started).toISOString(),
    });
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : response.statusText || "request failed";
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  datasets(): Promise<DatasetEntry[]> {
    return this.request("GET", "/datasets");
  }

  defaults(): Promise<Defaults> {
    return this.request("GET", "/defaults");
  }

  startRun(body: RunRequestBody): Promise<RunHandle> {
    return this.request("POST", "/runs", body);
  }

  report(runId: string): Promise<RunReport> {
    return this.request("GET", `/runs/${runId}`);
  }

  series(runId: string): Promise<SeriesResponse> {
    return this.request("GET", `/runs/${runId}/series`);
  }

  subsetScan(body: SubsetScanRequestBody): Promise<RunHandle> {
    return this.request("POST", "/subset-scan", body);
  }

  subsetScanReport(runId: string): Promise<SubsetScanReport> {
    return this.request("GET", `/runs/${runId}`);
  }
}
