// Studio state and its reducers. The server is the source of truth
// for datasets, jobs and revisions; the only client-owned state is
// the in-progress legend draft and pending remaps (kept per job and
// persisted to localStorage by the shell). Reloading the page and
// refetching therefore reconstructs the same view.

import type { LegendDraft } from "./legend.js";
import type { JobConfig, JobInfo } from "./types.js";

export const HISTORY_CAP = 12;

export type Layout = "clustered" | "reference" | "split";

export interface StudioState {
  datasetId: string | null;
  jobs: JobInfo[];
  selectedJobId: string | null;
  drafts: Record<string, LegendDraft>;
  pendingRemaps: Record<string, Array<[number, number]>>;
  history: string[]; // most recent first, capped
  layout: Layout;
}

export function initialState(): StudioState {
  return {
    datasetId: null,
    jobs: [],
    selectedJobId: null,
    drafts: {},
    pendingRemaps: {},
    history: [],
    layout: "split",
  };
}

export type Action =
  | { type: "dataset-loaded"; datasetId: string }
  | { type: "jobs-fetched"; jobs: JobInfo[] }
  | { type: "job-submitted"; job: JobInfo }
  | { type: "job-selected"; jobId: string }
  | { type: "draft-edited"; jobId: string; draft: LegendDraft }
  | { type: "remaps-edited"; jobId: string; remaps: Array<[number, number]> }
  | { type: "layout-changed"; layout: Layout };

function pushHistory(history: string[], jobId: string): string[] {
  const next = [jobId, ...history.filter((id) => id !== jobId)];
  return next.slice(0, HISTORY_CAP);
}

export function reduce(state: StudioState, action: Action): StudioState {
  switch (action.type) {
    case "dataset-loaded":
      return { ...initialState(), datasetId: action.datasetId, layout: state.layout };
    case "jobs-fetched": {
      const jobs = [...action.jobs].sort((a, b) => a.created - b.created);
      const selected = jobs.some((j) => j.job_id === state.selectedJobId)
        ? state.selectedJobId
        : jobs.length > 0
          ? jobs[jobs.length - 1].job_id
          : null;
      return { ...state, jobs, selectedJobId: selected };
    }
    case "job-submitted": {
      const jobs = [...state.jobs, action.job];
      return {
        ...state,
        jobs,
        selectedJobId: action.job.job_id,
        history: pushHistory(state.history, action.job.job_id),
      };
    }
    case "job-selected":
      if (!state.jobs.some((j) => j.job_id === action.jobId)) {
        return state;
      }
      return {
        ...state,
        selectedJobId: action.jobId,
        history: pushHistory(state.history, action.jobId),
      };
    case "draft-edited":
      return {
        ...state,
        drafts: { ...state.drafts, [action.jobId]: action.draft },
      };
    case "remaps-edited":
      return {
        ...state,
        pendingRemaps: { ...state.pendingRemaps, [action.jobId]: action.remaps },
      };
    case "layout-changed":
      return { ...state, layout: action.layout };
  }
}

// Submitting the exact same request again would only recompute the
// same labels; flag it instead so the user can jump to the prior job.
export function findDuplicateJob(
  jobs: JobInfo[],
  params: { mode: string; method: string; k?: number | null; seed: number },
): JobInfo | undefined {
  return jobs.find(
    (j) =>
      j.config.mode === params.mode &&
      j.config.method === params.method &&
      (j.config.k ?? null) === (params.k ?? null) &&
      j.config.seed === params.seed &&
      j.state !== "failed",
  );
}

// The reload path: everything except drafts comes back from the
// service; drafts are whatever the shell persisted locally.
export function deriveFromServer(
  datasetId: string,
  jobs: JobInfo[],
  persistedDrafts: Record<string, LegendDraft>,
  persistedRemaps: Record<string, Array<[number, number]>> = {},
): StudioState {
  let state: StudioState = { ...initialState(), datasetId };
  state = reduce(state, { type: "jobs-fetched", jobs });
  const known = new Set(jobs.map((j) => j.job_id));
  for (const [jobId, draft] of Object.entries(persistedDrafts)) {
    if (known.has(jobId)) {
      state = reduce(state, { type: "draft-edited", jobId, draft });
    }
  }
  for (const [jobId, remaps] of Object.entries(persistedRemaps)) {
    if (known.has(jobId)) {
      state = reduce(state, { type: "remaps-edited", jobId, remaps });
    }
  }
  return state;
}

export function describeJob(config: JobConfig): string {
  const kpart = config.k != null ? ` k=${config.k}` : "";
  return `${config.method}${kpart} seed=${config.seed} (${config.mode})`;
}
