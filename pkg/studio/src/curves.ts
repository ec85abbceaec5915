// Turns a service curve payload into plot geometry for a plain SVG
// chart: normalized polyline points plus the proposed-k marker.

import type { CurvePayload } from "./types.js";

export interface ChartModel {
  method: string;
  polyline: string; // "x1,y1 x2,y2 ..." in a [0,1]x[0,1] frame, y down
  points: Array<{ k: number; score: number; x: number; y: number }>;
  proposedK: number | null;
  proposedX: number | null;
}

export function toChartModel(payload: CurvePayload): ChartModel {
  const pts = payload.points;
  if (pts.length === 0) {
    return {
      method: payload.method,
      polyline: "",
      points: [],
      proposedK: payload.proposed_k,
      proposedX: null,
    };
  }
  const ks = pts.map(([k]) => k);
  const scores = pts.map(([, s]) => s);
  const kMin = Math.min(...ks);
  const kMax = Math.max(...ks);
  const sMin = Math.min(...scores);
  const sMax = Math.max(...scores);
  const xSpan = kMax - kMin || 1;
  const ySpan = sMax - sMin || 1;
  const points = pts.map(([k, score]) => ({
    k,
    score,
    x: (k - kMin) / xSpan,
    y: 1 - (score - sMin) / ySpan, // larger scores plot higher
  }));
  const polyline = points
    .map((p) => `${p.x.toFixed(4)},${p.y.toFixed(4)}`)
    .join(" ");
  const proposedX =
    payload.proposed_k == null ? null : (payload.proposed_k - kMin) / xSpan;
  return {
    method: payload.method,
    polyline,
    points,
    proposedK: payload.proposed_k,
    proposedX,
  };
}
