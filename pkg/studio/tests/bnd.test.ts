import { describe, expect, it } from "vitest";

import { labelGridFromBnd, parseBnd, presentLabels } from "../src/bnd.js";

function buildBnd(width: number, height: number, bands: number, values: number[]): ArrayBuffer {
  const buf = new ArrayBuffer(16 + values.length * 4);
  const view = new DataView(buf);
  view.setUint8(0, 0x42); // B
  view.setUint8(1, 0x4e); // N
  view.setUint8(2, 0x44); // D
  view.setUint8(3, 0x31); // 1
  view.setUint32(4, width, true);
  view.setUint32(8, height, true);
  view.setUint32(12, bands, true);
  values.forEach((v, i) => view.setFloat32(16 + i * 4, v, true));
  return buf;
}

describe("parseBnd", () => {
  it("decodes header and samples", () => {
    const raster = parseBnd(buildBnd(2, 1, 1, [2.5, -1]));
    expect(raster.width).toBe(2);
    expect(raster.height).toBe(1);
    expect(raster.bands).toBe(1);
    expect(Array.from(raster.samples)).toEqual([2.5, -1]);
  });

  it("rejects a bad magic", () => {
    const buf = buildBnd(1, 1, 1, [0]);
    new DataView(buf).setUint8(3, 0x32); // "BND2"
    expect(() => parseBnd(buf)).toThrow(/magic/);
  });

  it("rejects truncated payloads", () => {
    const buf = buildBnd(4, 4, 1, [0]); // header promises 16 samples
    expect(() => parseBnd(buf)).toThrow(/truncated/);
  });

  it("rejects zero dimensions", () => {
    expect(() => parseBnd(buildBnd(0, 1, 1, []))).toThrow(/zero/);
  });
});

describe("labelGridFromBnd", () => {
  it("rounds float labels to ints and keeps sentinels", () => {
    const grid = labelGridFromBnd(buildBnd(2, 2, 1, [0, -1, 3, -2]));
    expect(Array.from(grid.labels)).toEqual([0, -1, 3, -2]);
  });

  it("rejects multi-band rasters", () => {
    expect(() => labelGridFromBnd(buildBnd(1, 1, 2, [0, 0]))).toThrow(/single-band/);
  });

  it("lists present non-sentinel labels sorted", () => {
    const grid = labelGridFromBnd(buildBnd(2, 2, 1, [5, -1, 0, 5]));
    expect(presentLabels(grid)).toEqual([0, 5]);
  });
});
