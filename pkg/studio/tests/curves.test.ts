import { describe, expect, it } from "vitest";

import { toChartModel } from "../src/curves.js";

describe("toChartModel", () => {
  it("normalizes both axes into the unit frame", () => {
    const model = toChartModel({
      method: "wcss",
      points: [
        [1, 100],
        [2, 50],
        [5, 20],
      ],
      proposed_k: 2,
    });
    expect(model.points[0]).toMatchObject({ k: 1, x: 0, y: 0 });
    expect(model.points[2]).toMatchObject({ k: 5, x: 1, y: 1 });
    expect(model.points[1].x).toBeCloseTo(0.25);
    expect(model.points[1].y).toBeCloseTo(1 - 30 / 80);
    expect(model.proposedX).toBeCloseTo(0.25);
    expect(model.polyline.split(" ")).toHaveLength(3);
  });

  it("handles flat curves and missing proposals", () => {
    const model = toChartModel({
      method: "bic",
      points: [
        [1, 7],
        [2, 7],
      ],
      proposed_k: null,
    });
    expect(model.points.every((p) => p.y === 1)).toBe(true);
    expect(model.proposedX).toBeNull();
  });

  it("tolerates an empty payload", () => {
    const model = toChartModel({ method: "wcss", points: [], proposed_k: null });
    expect(model.polyline).toBe("");
    expect(model.points).toEqual([]);
  });
});
