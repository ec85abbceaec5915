// Client-side palette substitution on an indexed label grid.
//
// This mirrors the server's rendering rule exactly: every non-sentinel
// label must have a color; sentinel pixels (noise, never-clustered)
// take the background color, black unless one is provided. Because
// both sides apply the same 8-bit colors to the same label grid, a
// live recolor here and a server-rendered export match byte-for-byte
// per pixel.

import type { Rgb } from "./types.js";

export type ColorTable = Map<number, Rgb>;

export function recolorIndexed(
  labels: Int32Array,
  table: ColorTable,
  background: Rgb = [0, 0, 0],
): Uint8ClampedArray<ArrayBuffer> {
  const missing = new Set<number>();
  for (const v of labels) {
    if (v >= 0 && !table.has(v)) missing.add(v);
  }
  if (missing.size > 0) {
    throw new Error(
      `color table is missing labels ${[...missing].sort((a, b) => a - b).join(", ")}`,
    );
  }
  const out = new Uint8ClampedArray(labels.length * 4);
  for (let i = 0; i < labels.length; i++) {
    const v = labels[i];
    const [r, g, b] = v < 0 ? background : (table.get(v) as Rgb);
    const o = i * 4;
    out[o] = r;
    out[o + 1] = g;
    out[o + 2] = b;
    out[o + 3] = 255;
  }
  return out;
}
