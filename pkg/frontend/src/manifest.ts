/** Import and export of variants as dataset-manifest screen entries.
 *
 * The screen schema is the toolkit's interchange format:
 *
 *     {"id": "s0", "image": "imgs/s0.png", "width": 360, "height": 640,
 *      "elements": [{"id": 0, "bbox": [x0, y0, x1, y1]}, ...],
 *      "gt_element_saliency": [...]}            // optional, sums to 1
 *
 * Exported entries pair with the rasterized PNG so a saved variant can
 * feed the toolkit CLI as a dataset of one screen.
 */

import { encodePng } from "./png.js";
import { ImageBuffer, rasterizeVariant } from "./raster.js";
import { StudioError, StudioVariant, isStale, makeVariant } from "./types.js";

export interface ManifestElement {
  readonly id: number | string;
  readonly bbox: readonly [number, number, number, number];
}

export interface ManifestScreen {
  readonly id: string;
  readonly image: string;
  readonly width: number;
  readonly height: number;
  readonly elements: ReadonlyArray<ManifestElement>;
  readonly gt_element_saliency?: ReadonlyArray<number>;
}

export function variantFromScreen(screen: ManifestScreen, imageRef: string): StudioVariant {
  if (typeof screen.id !== "string" || !screen.id) {
    throw new StudioError("screen id must be a non-empty string");
  }
  if (!Array.isArray(screen.elements) || screen.elements.length === 0) {
    throw new StudioError(`screen ${screen.id} has no elements`);
  }
  const elements = screen.elements.map((el) => {
    if (!Array.isArray(el.bbox) || el.bbox.length !== 4) {
      throw new StudioError(`screen ${screen.id} element ${String(el.id)} has a malformed bbox`);
    }
    return {
      id: el.id,
      bbox: [el.bbox[0], el.bbox[1], el.bbox[2], el.bbox[3]] as const,
      fill: null,
    };
  });
  return makeVariant(screen.id, imageRef, screen.width, screen.height, elements);
}

export interface ExportedScreen {
  readonly screen: ManifestScreen;
  /** Rasterized pixels (fills applied), encoded as the referenced PNG. */
  readonly png: Uint8Array;
}

/**
 * Serializes the variant at its current geometry. A fresh prediction is
 * written as gt_element_saliency so the export round-trips as labeled
 * data; a stale or missing one is omitted.
 */
export function screenFromVariant(
  variant: StudioVariant,
  base: ImageBuffer,
  imagePath: string,
): ExportedScreen {
  const pixels = rasterizeVariant(base, variant);
  const screen: {
    id: string;
    image: string;
    width: number;
    height: number;
    elements: ManifestElement[];
    gt_element_saliency?: number[];
  } = {
    id: variant.name,
    image: imagePath,
    width: variant.width,
    height: variant.height,
    elements: variant.elements.map((el) => ({
      id: el.id,
      bbox: [el.bbox[0], el.bbox[1], el.bbox[2], el.bbox[3]],
    })),
  };
  if (variant.prediction !== null && !isStale(variant)) {
    const values = new Map(variant.prediction.entries.map((row) => [row.id, row.value]));
    if (variant.elements.every((el) => values.has(el.id))) {
      screen.gt_element_saliency = variant.elements.map((el) => values.get(el.id)!);
    }
  }
  return { screen, png: encodePng(pixels) };
}
