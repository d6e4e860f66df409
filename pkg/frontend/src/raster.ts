/** Pixel buffers and variant rasterization.
 *
 * The studio sends pixels, not edit scripts: a request image is the base
 * screenshot with every element's fill override painted at its current
 * geometry. Buffers are plain RGB byte arrays so the same code runs in
 * the browser and in node tests.
 */

import { Bbox, Rgb, StudioVariant, StudioError } from "./types.js";

export interface ImageBuffer {
  readonly width: number;
  readonly height: number;
  /** Row-major RGB, length width * height * 3. */
  readonly data: Uint8ClampedArray;
}

export function makeImage(width: number, height: number, data?: Uint8ClampedArray): ImageBuffer {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new StudioError(`image extent must be positive integers, got ${width}x${height}`);
  }
  const expected = width * height * 3;
  if (data === undefined) {
    data = new Uint8ClampedArray(expected);
  } else if (data.length !== expected) {
    throw new StudioError(`image data has ${data.length} bytes, expected ${expected}`);
  }
  return { width, height, data };
}

export function solidImage(width: number, height: number, rgb: Rgb): ImageBuffer {
  const img = makeImage(width, height);
  for (let i = 0; i < img.data.length; i += 3) {
    img.data[i] = rgb[0];
    img.data[i + 1] = rgb[1];
    img.data[i + 2] = rgb[2];
  }
  return img;
}

export function cloneImage(img: ImageBuffer): ImageBuffer {
  return { width: img.width, height: img.height, data: new Uint8ClampedArray(img.data) };
}

export function paintRect(img: ImageBuffer, bbox: Bbox, rgb: Rgb): void {
  const [x0, y0, x1, y1] = bbox;
  for (let y = y0; y < y1; y++) {
    let i = (y * img.width + x0) * 3;
    for (let x = x0; x < x1; x++) {
      img.data[i] = rgb[0];
      img.data[i + 1] = rgb[1];
      img.data[i + 2] = rgb[2];
      i += 3;
    }
  }
}

export function pixelAt(img: ImageBuffer, x: number, y: number): Rgb {
  const i = (y * img.width + x) * 3;
  return [img.data[i] ?? 0, img.data[i + 1] ?? 0, img.data[i + 2] ?? 0];
}

/** Base pixels plus every fill override painted at current geometry. */
export function rasterizeVariant(base: ImageBuffer, variant: StudioVariant): ImageBuffer {
  if (base.width !== variant.width || base.height !== variant.height) {
    throw new StudioError(
      `variant ${variant.name} is ${variant.width}x${variant.height} ` +
        `but its image is ${base.width}x${base.height}`,
    );
  }
  const out = cloneImage(base);
  for (const el of variant.elements) {
    if (el.fill !== null) {
      paintRect(out, el.bbox, el.fill);
    }
  }
  return out;
}

/**
 * Clamps a requested box to the canvas, preserving at least one pixel of
 * extent. The box keeps its size where possible and slides inward at the
 * borders (a resize that reaches past an edge stops at that edge).
 */
export function clampBoxToCanvas(bbox: Bbox, width: number, height: number): Bbox {
  let [x0, y0, x1, y1] = bbox.map(Math.round) as [number, number, number, number];
  if (x1 < x0) [x0, x1] = [x1, x0];
  if (y1 < y0) [y0, y1] = [y1, y0];
  x1 = Math.max(x1, x0 + 1);
  y1 = Math.max(y1, y0 + 1);

  const w = Math.min(x1 - x0, width);
  const h = Math.min(y1 - y0, height);
  x0 = Math.min(Math.max(x0, 0), width - w);
  y0 = Math.min(Math.max(y0, 0), height - h);
  return [x0, y0, x0 + w, y0 + h];
}
