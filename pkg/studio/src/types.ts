// Shapes of the service's JSON bodies, as served.

export interface DatasetInfo {
  dataset_id: string;
  width: number;
  height: number;
  bands: number;
  has_bathymetry: boolean;
}

export interface ClusterStat {
  label: number;
  size_px: number;
  mean_features: number[];
  mean_color: [number, number, number] | number[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobInfo {
  job_id: string;
  dataset_id: string;
  state: JobState;
  transitions: string[];
  config: JobConfig;
  created: number;
  finished: number | null;
  revisions: string[];
  metrics?: Record<string, number | string>;
  cluster_stats?: ClusterStat[];
  error?: string;
}

export interface JobConfig {
  mode: string;
  method: string;
  k?: number | null;
  eps?: number | null;
  min_pts?: number | null;
  seed: number;
  normalization?: string;
  [key: string]: unknown;
}

export interface CurvePayload {
  method: "wcss" | "bic";
  points: Array<[number, number]>;
  proposed_k: number | null;
}

export interface LegendEntryJson {
  label: number;
  class: string;
  color: string; // #RRGGBB
}

export interface ApiErrorBody {
  error: string;
  details: unknown[];
}

export type Rgb = [number, number, number];
