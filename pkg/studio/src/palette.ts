// Color handling. The categorical table mirrors the server's raw-map
// palette exactly, so a recolored preview and a served map.png agree
// pixel-for-pixel before any legend exists.

import type { Rgb } from "./types.js";

export const CATEGORICAL_COLORS: Rgb[] = [
  [230, 25, 75],
  [60, 180, 75],
  [255, 225, 25],
  [0, 130, 200],
  [245, 130, 48],
  [145, 30, 180],
  [70, 240, 240],
  [240, 50, 230],
  [210, 245, 60],
  [250, 190, 212],
  [0, 128, 128],
  [220, 190, 255],
];

export function categoricalColor(label: number): Rgb {
  const idx = ((label % CATEGORICAL_COLORS.length) + CATEGORICAL_COLORS.length) %
    CATEGORICAL_COLORS.length;
  return CATEGORICAL_COLORS[idx];
}

export function hexToRgb(hex: string): Rgb {
  const h = hex.replace(/^#/, "");
  if (!/^[0-9a-fA-F]{6}$/.test(h)) {
    throw new Error(`not a #RRGGBB color: ${hex}`);
  }
  return [
    parseInt(h.slice(0, 2), 16),
    parseInt(h.slice(2, 4), 16),
    parseInt(h.slice(4, 6), 16),
  ];
}

export function rgbToHex([r, g, b]: Rgb): string {
  const pad = (v: number) => v.toString(16).padStart(2, "0").toUpperCase();
  return `#${pad(r)}${pad(g)}${pad(b)}`;
}
