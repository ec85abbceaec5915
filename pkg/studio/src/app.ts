// Browser shell: wires the state, API client, and canvas panes into
// the assess / re-run / label loop. All logic that can live outside
// the DOM is in the sibling modules; this file only glues.

import { StudioApi, ApiError } from "./api.js";
import { labelGridFromBnd, presentLabels, type LabelGrid } from "./bnd.js";
import {
  clampDivider,
  fitViewport,
  pan,
  pickPixel,
  zoomAt,
  type Viewport,
} from "./compare.js";
import { toChartModel } from "./curves.js";
import {
  applyPreset,
  BENTHIC_PRESET,
  completeness,
  draftToColorTable,
  draftToPayload,
  GEOMORPHIC_PRESET,
  mergeSuggestions,
  setEntry,
  type LegendDraft,
} from "./legend.js";
import { categoricalColor, rgbToHex } from "./palette.js";
import { recolorIndexed } from "./recolor.js";
import {
  describeJob,
  deriveFromServer,
  findDuplicateJob,
  initialState,
  reduce,
  type Action,
  type StudioState,
} from "./state.js";
import type { ClusterStat, JobInfo } from "./types.js";

const DRAFTS_KEY = "reefseg-studio-drafts";
const REMAPS_KEY = "reefseg-studio-remaps";
const POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Shell {
  api: StudioApi;
  state: StudioState = initialState();
  grid: LabelGrid | null = null;
  clusters: ClusterStat[] = [];
  viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
  divider = 0.5;
  reference: HTMLImageElement | null = null;
  clusteredLayer: HTMLCanvasElement | null = null;
  canvas: HTMLCanvasElement;
  dragging: "pan" | "divider" | null = null;
  lastPointer: [number, number] = [0, 0];

  constructor() {
    const params = new URLSearchParams(location.search);
    const base = params.get("api") ?? "http://127.0.0.1:8077";
    this.api = new StudioApi(base);
    this.canvas = el<HTMLCanvasElement>("compare-canvas");
    this.bindUi();
    void this.boot(params.get("dataset"));
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    if (action.type === "draft-edited" || action.type === "remaps-edited") {
      localStorage.setItem(DRAFTS_KEY, JSON.stringify(this.state.drafts));
      localStorage.setItem(REMAPS_KEY, JSON.stringify(this.state.pendingRemaps));
    }
    this.renderSidebar();
    this.renderLegendPanel();
    this.redraw();
  }

  async boot(datasetFromUrl: string | null): Promise<void> {
    try {
      const datasets = await this.api.listDatasets();
      const dataset =
        datasets.find((d) => d.dataset_id === datasetFromUrl) ?? datasets[0];
      if (!dataset) {
        this.status("no datasets registered; POST /datasets first");
        return;
      }
      const jobs = await this.api.listJobs(dataset.dataset_id);
      const drafts = JSON.parse(localStorage.getItem(DRAFTS_KEY) ?? "{}");
      const remaps = JSON.parse(localStorage.getItem(REMAPS_KEY) ?? "{}");
      this.state = deriveFromServer(dataset.dataset_id, jobs, drafts, remaps);
      this.loadReference(this.api.previewUrl(dataset.dataset_id));
      await this.loadSelectedJob();
      this.renderSidebar();
      this.renderLegendPanel();
      setInterval(() => void this.poll(), POLL_MS);
    } catch (err) {
      this.status(`boot failed: ${String(err)}`);
    }
  }

  async poll(): Promise<void> {
    if (!this.state.datasetId) return;
    const jobs = await this.api.listJobs(this.state.datasetId);
    const prevSelected = this.state.selectedJobId;
    const prevStates = new Map(this.state.jobs.map((j) => [j.job_id, j.state]));
    this.dispatch({ type: "jobs-fetched", jobs });
    const selected = this.selectedJob();
    if (
      selected &&
      (selected.job_id !== prevSelected ||
        prevStates.get(selected.job_id) !== selected.state)
    ) {
      await this.loadSelectedJob();
    }
  }

  selectedJob(): JobInfo | undefined {
    return this.state.jobs.find((j) => j.job_id === this.state.selectedJobId);
  }

  async loadSelectedJob(): Promise<void> {
    const job = this.selectedJob();
    this.grid = null;
    this.clusters = [];
    if (!job || job.state !== "done") {
      this.redraw();
      this.renderLegendPanel();
      return;
    }
    const [labels, stats] = await Promise.all([
      this.api.jobLabels(job.job_id),
      this.api.jobClusters(job.job_id),
    ]);
    this.grid = labelGridFromBnd(labels);
    this.clusters = stats.clusters as unknown as ClusterStat[];
    this.viewport = fitViewport(
      this.grid.width,
      this.grid.height,
      this.canvas.width,
      this.canvas.height,
    );
    this.redraw();
    this.renderLegendPanel();
  }

  // -- rendering ---------------------------------------------------------

  activeDraft(): LegendDraft {
    const job = this.selectedJob();
    if (!job) return {};
    const stored = this.state.drafts[job.job_id];
    if (stored && Object.keys(stored).length > 0) return stored;
    if (!this.grid) return {};
    const draft: LegendDraft = {};
    for (const label of presentLabels(this.grid)) {
      draft[label] = {
        className: `cluster ${label}`,
        color: rgbToHex(categoricalColor(label)),
      };
    }
    return draft;
  }

  rebuildClusteredLayer(): void {
    if (!this.grid) {
      this.clusteredLayer = null;
      return;
    }
    const rgba = recolorIndexed(this.grid.labels, draftToColorTable(this.activeDraft()));
    const layer = document.createElement("canvas");
    layer.width = this.grid.width;
    layer.height = this.grid.height;
    const ctx = layer.getContext("2d")!;
    ctx.putImageData(
      new ImageData(rgba, this.grid.width, this.grid.height),
      0,
      0,
    );
    this.clusteredLayer = layer;
  }

  redraw(): void {
    this.rebuildClusteredLayer();
    const ctx = this.canvas.getContext("2d")!;
    ctx.fillStyle = "#181c20";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.imageSmoothingEnabled = false;
    const splitX = this.canvas.width * (this.state.layout === "split" ? this.divider : 1);
    const drawLayer = (
      layer: CanvasImageSource | null,
      fromX: number,
      toX: number,
    ) => {
      if (!layer || toX <= fromX) return;
      ctx.save();
      ctx.beginPath();
      ctx.rect(fromX, 0, toX - fromX, this.canvas.height);
      ctx.clip();
      ctx.translate(this.viewport.offsetX, this.viewport.offsetY);
      ctx.scale(this.viewport.scale, this.viewport.scale);
      ctx.drawImage(layer, 0, 0);
      ctx.restore();
    };
    const referenceHint = (fromX: number) => {
      if (this.reference) return;
      ctx.fillStyle = "#667";
      ctx.font = "13px system-ui";
      ctx.fillText(
        "no reference image — upload one above",
        fromX + 16,
        this.canvas.height / 2,
      );
    };
    if (this.state.layout === "reference") {
      drawLayer(this.reference, 0, this.canvas.width);
      referenceHint(0);
    } else if (this.state.layout === "clustered") {
      drawLayer(this.clusteredLayer, 0, this.canvas.width);
    } else {
      drawLayer(this.clusteredLayer, 0, splitX);
      drawLayer(this.reference, splitX, this.canvas.width);
      referenceHint(splitX);
      ctx.fillStyle = "#f5f5f5";
      ctx.fillRect(splitX - 1, 0, 2, this.canvas.height);
    }
    const job = this.selectedJob();
    if (job && job.state !== "done") {
      ctx.fillStyle = "rgba(20, 22, 26, 0.75)";
      ctx.fillRect(0, 0, this.canvas.width, 34);
      ctx.fillStyle = "#ffd166";
      ctx.font = "14px system-ui";
      ctx.fillText(`job ${job.job_id}: ${job.state}`, 12, 22);
    }
  }

  loadReference(url: string): void {
    const img = new Image();
    img.crossOrigin = "anonymous";
    img.onload = () => {
      this.reference = img;
      this.redraw();
    };
    img.src = url;
  }

  // -- panels -------------------------------------------------------------

  status(text: string): void {
    el<HTMLDivElement>("status").textContent = text;
  }

  renderSidebar(): void {
    const list = el<HTMLUListElement>("job-list");
    list.innerHTML = "";
    const visible = this.state.history.length
      ? this.state.history
          .map((id) => this.state.jobs.find((j) => j.job_id === id))
          .filter((j): j is JobInfo => Boolean(j))
      : this.state.jobs.slice(-12).reverse();
    for (const job of visible) {
      const item = document.createElement("li");
      item.className = job.job_id === this.state.selectedJobId ? "selected" : "";
      const badge = `<span class="state ${job.state}">${job.state}</span>`;
      item.innerHTML = `${badge} <span>${describeJob(job.config)}</span>`;
      item.onclick = () => {
        this.dispatch({ type: "job-selected", jobId: job.job_id });
        void this.loadSelectedJob();
      };
      list.appendChild(item);
    }
  }

  renderLegendPanel(): void {
    const host = el<HTMLDivElement>("legend-rows");
    host.innerHTML = "";
    const job = this.selectedJob();
    if (!job || !this.grid) {
      el<HTMLButtonElement>("export-btn").disabled = true;
      return;
    }
    const labels = presentLabels(this.grid);
    const draft = this.activeDraft();
    for (const label of labels) {
      const entry = draft[label] ?? { className: "", color: "#888888" };
      const stat = this.clusters.find((c) => c.label === label);
      const row = document.createElement("div");
      row.className = "legend-row";
      row.innerHTML = `
        <input type="color" value="${entry.color}" data-label="${label}">
        <input type="text" value="${entry.className}" placeholder="class name" data-label="${label}">
        <span class="size">${stat ? `${stat.size_px} px` : ""}</span>`;
      const [colorInput, nameInput] = row.querySelectorAll("input");
      const commit = () => {
        const updated = setEntry(
          draft,
          label,
          (nameInput as HTMLInputElement).value,
          (colorInput as HTMLInputElement).value.toUpperCase(),
        );
        this.dispatch({ type: "draft-edited", jobId: job.job_id, draft: updated });
      };
      colorInput.addEventListener("input", commit);
      nameInput.addEventListener("change", commit);
      host.appendChild(row);
    }
    const { complete, missing } = completeness(draft, labels);
    const gaps = el<HTMLDivElement>("legend-gaps");
    gaps.textContent = complete
      ? "legend complete"
      : `unlabeled clusters: ${missing.join(", ")}`;
    gaps.className = complete ? "ok" : "warn";
    el<HTMLButtonElement>("export-btn").disabled = !complete;

    const suggestions = mergeSuggestions(draft);
    const hints = el<HTMLDivElement>("merge-hints");
    hints.innerHTML = "";
    for (const s of suggestions) {
      const div = document.createElement("div");
      div.textContent = `clusters ${s.from} and ${s.to} share "${s.className}" — remap ${s.from} into ${s.to}?`;
      const btn = document.createElement("button");
      btn.textContent = "add remap";
      btn.onclick = () => {
        const current = this.state.pendingRemaps[job.job_id] ?? [];
        this.dispatch({
          type: "remaps-edited",
          jobId: job.job_id,
          remaps: [...current, [s.from, s.to]],
        });
        this.renderRemaps();
      };
      div.appendChild(btn);
      hints.appendChild(div);
    }
    this.renderRemaps();
  }

  renderRemaps(): void {
    const job = this.selectedJob();
    const host = el<HTMLDivElement>("remap-list");
    host.innerHTML = "";
    if (!job) return;
    const remaps = this.state.pendingRemaps[job.job_id] ?? [];
    remaps.forEach(([from, to], idx) => {
      const row = document.createElement("div");
      row.textContent = `${from} -> ${to}`;
      const rm = document.createElement("button");
      rm.textContent = "x";
      rm.onclick = () => {
        const next = remaps.filter((_, i) => i !== idx);
        this.dispatch({ type: "remaps-edited", jobId: job.job_id, remaps: next });
        this.renderRemaps();
      };
      row.appendChild(rm);
      host.appendChild(row);
    });
  }

  async showCurves(): Promise<void> {
    if (!this.state.datasetId) return;
    const method = el<HTMLSelectElement>("curve-method").value;
    const job = this.selectedJob();
    try {
      const payload = await this.api.curves(this.state.datasetId, {
        method,
        kmin: 1,
        kmax: 8,
        mode: job?.config.mode ?? "benthic",
      });
      const model = toChartModel(payload);
      const svg = el<HTMLElement>("curve-svg");
      const marker =
        model.proposedX == null
          ? ""
          : `<line x1="${model.proposedX}" y1="0" x2="${model.proposedX}" y2="1" class="marker"/>` +
            `<text x="${model.proposedX}" y="0.08" class="marker-label">k=${model.proposedK}</text>`;
      svg.innerHTML =
        `<polyline points="${model.polyline}" class="curve"/>` +
        model.points
          .map((p) => `<circle cx="${p.x}" cy="${p.y}" r="0.015"/>`)
          .join("") +
        marker;
      this.status(
        `${model.method} curve; proposed k = ${model.proposedK ?? "none"}`,
      );
    } catch (err) {
      this.status(`curves failed: ${String(err)}`);
    }
  }

  async rerun(): Promise<void> {
    if (!this.state.datasetId) return;
    const method = el<HTMLSelectElement>("rerun-method").value;
    const k = Number(el<HTMLInputElement>("rerun-k").value);
    const seed = Number(el<HTMLInputElement>("rerun-seed").value);
    const mode = el<HTMLSelectElement>("rerun-mode").value;
    const dup = findDuplicateJob(this.state.jobs, { mode, method, k, seed });
    if (dup) {
      this.status(`duplicate of job ${dup.job_id}; selecting it instead`);
      this.dispatch({ type: "job-selected", jobId: dup.job_id });
      await this.loadSelectedJob();
      return;
    }
    try {
      const params: Record<string, unknown> =
        method === "dbscan" ? {} : { k };
      const { job_id } = await this.api.submitJob({
        dataset_id: this.state.datasetId,
        mode,
        method,
        seed,
        params,
      });
      const job = await this.api.getJob(job_id);
      this.dispatch({ type: "job-submitted", job });
      this.status(`submitted ${job_id}`);
    } catch (err) {
      if (err instanceof ApiError) {
        this.status(`rejected: ${err.message} ${JSON.stringify(err.details)}`);
      } else {
        this.status(String(err));
      }
    }
  }

  async exportFinal(): Promise<void> {
    const job = this.selectedJob();
    if (!job || !this.grid) return;
    const draft = this.activeDraft();
    const labels = presentLabels(this.grid);
    const remaps = this.state.pendingRemaps[job.job_id] ?? [];
    // Labels that were remapped away no longer need legend entries.
    const remapped = new Set(remaps.map(([from]) => from));
    const payload = draftToPayload(draft).filter(
      (e) => labels.includes(e.label) && !remapped.has(e.label),
    );
    const minSize = Number(el<HTMLInputElement>("min-size").value) || 1;
    try {
      const { revision_id } = await this.api.refine(job.job_id, {
        min_size: minSize,
        remaps,
        legend: payload,
      });
      const a = document.createElement("a");
      a.href = this.api.exportUrl(job.job_id, revision_id);
      a.download = `reefseg-${job.job_id}-${revision_id}.zip`;
      a.click();
      this.status(`revision ${revision_id} exported`);
    } catch (err) {
      if (err instanceof ApiError) {
        this.status(`export rejected: ${err.message} ${JSON.stringify(err.details)}`);
      } else {
        this.status(String(err));
      }
    }
  }

  // -- input --------------------------------------------------------------

  bindUi(): void {
    const canvas = this.canvas;
    canvas.addEventListener("pointerdown", (ev) => {
      const near = Math.abs(ev.offsetX - canvas.width * this.divider) < 8;
      this.dragging = this.state.layout === "split" && near ? "divider" : "pan";
      this.lastPointer = [ev.offsetX, ev.offsetY];
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (this.dragging === "divider") {
        this.divider = clampDivider(ev.offsetX / canvas.width);
        this.redraw();
      } else if (this.dragging === "pan") {
        this.viewport = pan(
          this.viewport,
          ev.offsetX - this.lastPointer[0],
          ev.offsetY - this.lastPointer[1],
        );
        this.lastPointer = [ev.offsetX, ev.offsetY];
        this.redraw();
      }
    });
    canvas.addEventListener("pointerup", (ev) => {
      const moved =
        Math.abs(ev.offsetX - this.lastPointer[0]) +
        Math.abs(ev.offsetY - this.lastPointer[1]);
      if (this.dragging === "pan" && moved < 3 && this.grid) {
        const idx = pickPixel(
          this.viewport,
          ev.offsetX,
          ev.offsetY,
          this.grid.width,
          this.grid.height,
        );
        if (idx != null) {
          const label = this.grid.labels[idx];
          const stat = this.clusters.find((c) => c.label === label);
          this.status(
            label < 0
              ? `pixel ${idx}: ${label === -1 ? "noise" : "nodata"}`
              : `pixel ${idx}: cluster ${label}` +
                  (stat ? ` (${stat.size_px} px)` : ""),
          );
        }
      }
      this.dragging = null;
    });
    canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.viewport = zoomAt(this.viewport, ev.offsetX, ev.offsetY, factor);
      this.redraw();
    });

    el<HTMLSelectElement>("layout-select").onchange = (ev) => {
      const layout = (ev.target as HTMLSelectElement).value as StudioState["layout"];
      this.dispatch({ type: "layout-changed", layout });
    };
    el<HTMLButtonElement>("preset-benthic").onclick = () =>
      this.applyPresetClicked(BENTHIC_PRESET);
    el<HTMLButtonElement>("preset-geomorphic").onclick = () =>
      this.applyPresetClicked(GEOMORPHIC_PRESET);
    el<HTMLButtonElement>("rerun-btn").onclick = () => void this.rerun();
    el<HTMLButtonElement>("curves-btn").onclick = () => void this.showCurves();
    el<HTMLButtonElement>("export-btn").onclick = () => void this.exportFinal();
    el<HTMLInputElement>("reference-file").onchange = (ev) => {
      const file = (ev.target as HTMLInputElement).files?.[0];
      if (file) this.loadReference(URL.createObjectURL(file));
    };
  }

  applyPresetClicked(preset: Array<[string, string]>): void {
    const job = this.selectedJob();
    if (!job || !this.grid) return;
    const labels = presentLabels(this.grid);
    const remaps = this.state.pendingRemaps[job.job_id] ?? [];
    const remapped = new Set(remaps.map(([from]) => from));
    const effective = labels.filter((l) => !remapped.has(l));
    try {
      const draft = applyPreset(effective, preset);
      // Remapped-away clusters inherit their target's entry for the
      // live preview.
      for (const [from, to] of remaps) {
        if (draft[to]) draft[from] = draft[to];
      }
      this.dispatch({ type: "draft-edited", jobId: job.job_id, draft });
    } catch (err) {
      this.status(String(err));
    }
  }
}

window.addEventListener("DOMContentLoaded", () => {
  new Shell();
});
