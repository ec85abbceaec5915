// Thin typed client over the service HTTP API. Every mutation goes
// through here; the UI never touches server state directly.

import type {
  ApiErrorBody,
  CurvePayload,
  DatasetInfo,
  JobInfo,
  LegendEntryJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public details: unknown[] = [],
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StudioApi {
  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await resp.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; fall through with the status line
      }
      throw new ApiError(
        resp.status,
        body?.error ?? `${resp.status} ${resp.statusText}`,
        body?.details ?? [],
      );
    }
    return resp;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.request(path, init);
    return (await resp.json()) as T;
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.json("/datasets");
  }

  getDataset(id: string): Promise<DatasetInfo> {
    return this.json(`/datasets/${id}`);
  }

  listJobs(datasetId?: string): Promise<JobInfo[]> {
    const q = datasetId ? `?dataset_id=${encodeURIComponent(datasetId)}` : "";
    return this.json(`/jobs${q}`);
  }

  getJob(jobId: string): Promise<JobInfo> {
    return this.json(`/jobs/${jobId}`);
  }

  submitJob(body: {
    dataset_id: string;
    mode: string;
    method: string;
    seed: number;
    params: Record<string, unknown>;
  }): Promise<{ job_id: string }> {
    return this.json("/jobs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async jobLabels(jobId: string): Promise<ArrayBuffer> {
    const resp = await this.request(`/jobs/${jobId}/labels.bnd`);
    return resp.arrayBuffer();
  }

  jobClusters(jobId: string): Promise<{ job_id: string; clusters: Array<Record<string, unknown>> }> {
    return this.json(`/jobs/${jobId}/clusters`);
  }

  curves(
    datasetId: string,
    params: { method: string; kmin: number; kmax: number; mode?: string },
  ): Promise<CurvePayload> {
    const q = new URLSearchParams({
      method: params.method,
      kmin: String(params.kmin),
      kmax: String(params.kmax),
      ...(params.mode ? { mode: params.mode } : {}),
    });
    return this.json(`/datasets/${datasetId}/curves?${q.toString()}`);
  }

  refine(
    jobId: string,
    body: {
      min_size: number;
      connectivity?: number;
      remaps: Array<[number, number]>;
      legend: LegendEntryJson[];
    },
  ): Promise<{ revision_id: string }> {
    return this.json(`/jobs/${jobId}/refine`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  exportUrl(jobId: string, revisionId: string): string {
    return `${this.baseUrl}/jobs/${jobId}/revisions/${revisionId}/export`;
  }

  async exportFile(
    jobId: string,
    revisionId: string,
    name: "map.png" | "labels.bnd" | "legend.json" | "provenance.json",
  ): Promise<ArrayBuffer> {
    const resp = await this.request(
      `/jobs/${jobId}/revisions/${revisionId}/export/${name}`,
    );
    return resp.arrayBuffer();
  }

  previewUrl(datasetId: string): string {
    return `${this.baseUrl}/datasets/${datasetId}/preview.png`;
  }

  mapUrl(jobId: string): string {
    return `${this.baseUrl}/jobs/${jobId}/map.png`;
  }
}
