// Decoder for the BND1 float32 raster container the service exports.
// Layout: "BND1", u32le width/height/bands, then float32le samples,
// band-sequential and row-major within each band.

export interface BndRaster {
  width: number;
  height: number;
  bands: number;
  samples: Float32Array;
}

export interface LabelGrid {
  width: number;
  height: number;
  labels: Int32Array; // row-major; -1 noise, -2 never clustered
}

const MAGIC = 0x31444e42; // "BND1" little-endian

export function parseBnd(buf: ArrayBuffer): BndRaster {
  if (buf.byteLength < 16) {
    throw new Error("truncated BND1 header");
  }
  const view = new DataView(buf);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new Error("bad BND1 magic");
  }
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const bands = view.getUint32(12, true);
  if (width === 0 || height === 0 || bands === 0) {
    throw new Error("zero width/height/bands");
  }
  const count = width * height * bands;
  if (buf.byteLength < 16 + count * 4) {
    throw new Error("truncated BND1 payload");
  }
  return { width, height, bands, samples: new Float32Array(buf, 16, count) };
}

export function labelGridFromBnd(buf: ArrayBuffer): LabelGrid {
  const raster = parseBnd(buf);
  if (raster.bands !== 1) {
    throw new Error(`label rasters are single-band, got ${raster.bands}`);
  }
  const labels = new Int32Array(raster.width * raster.height);
  for (let i = 0; i < labels.length; i++) {
    labels[i] = Math.round(raster.samples[i]);
  }
  return { width: raster.width, height: raster.height, labels };
}

export function presentLabels(grid: LabelGrid): number[] {
  const seen = new Set<number>();
  for (const v of grid.labels) {
    if (v >= 0) seen.add(v);
  }
  return [...seen].sort((a, b) => a - b);
}
