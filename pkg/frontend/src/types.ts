/** Core studio value types: variants, elements, predictions, overlay state. */

export type ElementId = number | string;

/** Half-open pixel box [x0, y0, x1, y1] with x0 < x1 and y0 < y1. */
export type Bbox = readonly [number, number, number, number];

export type Rgb = readonly [number, number, number];

export interface StudioElement {
  readonly id: ElementId;
  readonly bbox: Bbox;
  /** Optional fill-color override painted into the rasterized request image. */
  readonly fill: Rgb | null;
}

/**
 * An immutable per-element prediction, tagged with the variant revision
 * whose pixels and boxes produced it. Staleness is revision mismatch;
 * the snapshot itself is never edited.
 */
export interface PredictionSnapshot {
  readonly revision: number;
  readonly entries: ReadonlyArray<{ readonly id: ElementId; readonly value: number }>;
}

export interface StudioVariant {
  readonly name: string;
  /** Key into the studio's image store; the canvas is that image's extent. */
  readonly imageRef: string;
  readonly width: number;
  readonly height: number;
  readonly elements: ReadonlyArray<StudioElement>;
  /** Bumped by every edit; predictions are tagged with the value at request time. */
  readonly revision: number;
  readonly prediction: PredictionSnapshot | null;
}

export interface OverlayState {
  /** Fixed perceptual ramp; the studio ships exactly one. */
  readonly colormap: "inferno";
  /** Clamped to [0, 1] at construction. */
  readonly opacity: number;
  readonly showValues: boolean;
}

export class StudioError extends Error {}

const PREDICTION_SUM_TOL = 1e-4;

export function validateBbox(bbox: Bbox, width: number, height: number): void {
  const [x0, y0, x1, y1] = bbox;
  if (![x0, y0, x1, y1].every(Number.isInteger)) {
    throw new StudioError(`bbox must be integers, got [${bbox}]`);
  }
  if (!(x0 >= 0 && x0 < x1 && x1 <= width && y0 >= 0 && y0 < y1 && y1 <= height)) {
    throw new StudioError(`bbox [${bbox}] outside ${width}x${height} canvas`);
  }
}

export function validateElements(
  elements: ReadonlyArray<StudioElement>,
  width: number,
  height: number,
): void {
  const seen = new Set<string>();
  for (const el of elements) {
    const key = `${typeof el.id}:${el.id}`;
    if (seen.has(key)) {
      throw new StudioError(`duplicate element id ${String(el.id)}`);
    }
    seen.add(key);
    validateBbox(el.bbox, width, height);
  }
}

/** Freezes a prediction snapshot; rejects one that is not a distribution. */
export function makePrediction(
  entries: ReadonlyArray<{ id: ElementId; value: number }>,
  revision: number,
): PredictionSnapshot {
  if (entries.length === 0) {
    throw new StudioError("a prediction needs at least one element");
  }
  let sum = 0;
  for (const row of entries) {
    if (!Number.isFinite(row.value) || row.value < 0) {
      throw new StudioError(`prediction value for ${String(row.id)} is not a finite nonnegative number`);
    }
    sum += row.value;
  }
  if (Math.abs(sum - 1) > PREDICTION_SUM_TOL) {
    throw new StudioError(`prediction sums to ${sum}, expected 1 +- ${PREDICTION_SUM_TOL}`);
  }
  const frozen = entries.map((row) => Object.freeze({ id: row.id, value: row.value }));
  return Object.freeze({ revision, entries: Object.freeze(frozen) });
}

export function makeOverlayState(opacity: number, showValues: boolean): OverlayState {
  const clamped = Number.isFinite(opacity) ? Math.min(1, Math.max(0, opacity)) : 1;
  return Object.freeze({ colormap: "inferno", opacity: clamped, showValues });
}

export function makeVariant(
  name: string,
  imageRef: string,
  width: number,
  height: number,
  elements: ReadonlyArray<StudioElement>,
): StudioVariant {
  if (!name) {
    throw new StudioError("variant name must be non-empty");
  }
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new StudioError(`canvas must have positive integer extent, got ${width}x${height}`);
  }
  validateElements(elements, width, height);
  return Object.freeze({
    name,
    imageRef,
    width,
    height,
    elements: Object.freeze(elements.map((el) => Object.freeze({ ...el }))),
    revision: 0,
    prediction: null,
  });
}

/** A fresh prediction matches the variant's current revision. */
export function isStale(variant: StudioVariant): boolean {
  return variant.prediction === null || variant.prediction.revision !== variant.revision;
}
