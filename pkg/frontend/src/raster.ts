/** Helpers to interpret decoded label-map rasters.
 *
 * Label maps arrive as paletted PNGs where the pixel value is the class
 * id; after canvas/pngjs decoding we only see RGBA. Class colors are
 * unique in the catalog and the unlabeled sentinel renders pure white,
 * so ids are recoverable by exact color lookup.
 */

import type { CatalogEntry } from "./types.js";

export const SENTINEL = 255;

function key(r: number, g: number, b: number): number {
  return (r << 16) | (g << 8) | b;
}

export function classColorLUT(catalog: CatalogEntry[]): Map<number, number> {
  const lut = new Map<number, number>();
  for (const c of catalog) {
    lut.set(key(c.color[0], c.color[1], c.color[2]), c.id);
  }
  lut.set(key(255, 255, 255), SENTINEL);
  return lut;
}

/** 1 where the RGBA pixel is the white sentinel (needs labeling). */
export function sentinelMask(rgba: Uint8Array | Uint8ClampedArray, pixels: number): Uint8Array {
  const mask = new Uint8Array(pixels);
  for (let i = 0; i < pixels; i++) {
    const o = i * 4;
    if (rgba[o] === 255 && rgba[o + 1] === 255 && rgba[o + 2] === 255) {
      mask[i] = 1;
    }
  }
  return mask;
}

/** Per-pixel class ids from RGBA using the catalog palette; unknown colors -> -1. */
export function classIdGrid(
  rgba: Uint8Array | Uint8ClampedArray,
  pixels: number,
  catalog: CatalogEntry[],
): Int16Array {
  const lut = classColorLUT(catalog);
  const out = new Int16Array(pixels);
  for (let i = 0; i < pixels; i++) {
    const o = i * 4;
    const id = lut.get(key(rgba[o], rgba[o + 1], rgba[o + 2]));
    out[i] = id === undefined ? -1 : id;
  }
  return out;
}
