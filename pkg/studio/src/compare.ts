// Geometry for the synchronized split-pane comparison: one shared
// viewport (scale + offset in image coordinates) drives both panes,
// and the divider clips which pane paints which half.

export interface Viewport {
  scale: number;
  offsetX: number; // canvas position of image pixel (0, 0)
  offsetY: number;
}

export const MIN_SCALE = 0.25;
export const MAX_SCALE = 64;

export function fitViewport(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): Viewport {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function pan(vp: Viewport, dx: number, dy: number): Viewport {
  return { ...vp, offsetX: vp.offsetX + dx, offsetY: vp.offsetY + dy };
}

// Zoom toward a cursor position, keeping the image point under the
// cursor fixed on screen.
export function zoomAt(
  vp: Viewport,
  cursorX: number,
  cursorY: number,
  factor: number,
): Viewport {
  const scale = Math.min(Math.max(vp.scale * factor, MIN_SCALE), MAX_SCALE);
  const applied = scale / vp.scale;
  return {
    scale,
    offsetX: cursorX - (cursorX - vp.offsetX) * applied,
    offsetY: cursorY - (cursorY - vp.offsetY) * applied,
  };
}

export function screenToImage(
  vp: Viewport,
  x: number,
  y: number,
): { x: number; y: number } {
  return { x: (x - vp.offsetX) / vp.scale, y: (y - vp.offsetY) / vp.scale };
}

export function clampDivider(position: number): number {
  return Math.min(Math.max(position, 0), 1);
}

// Row-major pixel index under a canvas point, or null outside the image.
export function pickPixel(
  vp: Viewport,
  canvasX: number,
  canvasY: number,
  imageW: number,
  imageH: number,
): number | null {
  const { x, y } = screenToImage(vp, canvasX, canvasY);
  const px = Math.floor(x);
  const py = Math.floor(y);
  if (px < 0 || py < 0 || px >= imageW || py >= imageH) {
    return null;
  }
  return py * imageW + px;
}
