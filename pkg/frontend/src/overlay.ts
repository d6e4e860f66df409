/** Saliency overlay: per-element brightness, color, and value labels.
 *
 * Brightness is the element's value over the maximum value, so the
 * brightest element is always the argmax and brightness rank order
 * equals value rank order. The colormap is one fixed perceptual ramp
 * sampled monotonically in luminance.
 */

import { ElementId, Bbox, OverlayState, Rgb, StudioVariant, isStale } from "./types.js";

/** Inferno-style ramp, dark to bright, monotone in perceived luminance. */
const RAMP: ReadonlyArray<Rgb> = [
  [0, 0, 4],
  [31, 12, 72],
  [85, 15, 109],
  [136, 34, 106],
  [186, 54, 85],
  [227, 89, 51],
  [249, 140, 10],
  [249, 201, 50],
  [252, 255, 164],
];

export function sampleColormap(t: number): Rgb {
  const x = Math.min(1, Math.max(0, t)) * (RAMP.length - 1);
  const lo = Math.floor(x);
  const hi = Math.min(lo + 1, RAMP.length - 1);
  const f = x - lo;
  const a = RAMP[lo]!;
  const b = RAMP[hi]!;
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

export function formatValue(value: number): string {
  return value.toFixed(2);
}

export interface OverlayCell {
  readonly id: ElementId;
  readonly bbox: Bbox;
  readonly value: number;
  /** value / max(values); the argmax element is always 1. */
  readonly brightness: number;
  readonly color: Rgb;
  readonly opacity: number;
  readonly label: string | null;
}

export interface Overlay {
  readonly cells: ReadonlyArray<OverlayCell>;
  /** True when the variant changed after this prediction was made. */
  readonly stale: boolean;
  readonly revision: number;
}

/**
 * Renders the variant's stored prediction into overlay cells. Elements
 * that joined the variant after the prediction simply have no cell; the
 * stale flag tells the UI to badge the whole overlay.
 */
export function overlayFor(variant: StudioVariant, state: OverlayState): Overlay | null {
  const pred = variant.prediction;
  if (pred === null) {
    return null;
  }
  const boxes = new Map(variant.elements.map((el) => [el.id, el.bbox]));
  const max = Math.max(...pred.entries.map((row) => row.value));
  const cells = pred.entries
    .filter((row) => boxes.has(row.id))
    .map((row) => {
      const brightness = max > 0 ? row.value / max : 0;
      return Object.freeze({
        id: row.id,
        bbox: boxes.get(row.id)!,
        value: row.value,
        brightness,
        color: sampleColormap(brightness),
        opacity: state.opacity,
        label: state.showValues ? formatValue(row.value) : null,
      });
    });
  return Object.freeze({ cells: Object.freeze(cells), stale: isStale(variant), revision: pred.revision });
}
