/** Variant editing: pure functions from variant to variant.
 *
 * Every edit bumps the revision, which is what marks any stored
 * prediction stale; the prediction snapshot itself is carried over
 * untouched. Geometry is always clamped to the canvas.
 */

import { clampBoxToCanvas } from "./raster.js";
import {
  Bbox,
  ElementId,
  Rgb,
  StudioElement,
  StudioError,
  StudioVariant,
  validateElements,
} from "./types.js";

export type EditAction =
  | { readonly kind: "move"; readonly dx: number; readonly dy: number }
  | { readonly kind: "resize"; readonly bbox: Bbox }
  | { readonly kind: "delete" }
  | { readonly kind: "duplicate"; readonly newId: ElementId; readonly offset?: readonly [number, number] }
  | { readonly kind: "recolor"; readonly fill: Rgb | null };

function findIndex(variant: StudioVariant, id: ElementId): number {
  const index = variant.elements.findIndex((el) => el.id === id);
  if (index < 0) {
    throw new StudioError(`variant ${variant.name} has no element ${String(id)}`);
  }
  return index;
}

function withElements(
  variant: StudioVariant,
  elements: ReadonlyArray<StudioElement>,
): StudioVariant {
  validateElements(elements, variant.width, variant.height);
  return Object.freeze({
    ...variant,
    elements: Object.freeze(elements.map((el) => Object.freeze({ ...el }))),
    revision: variant.revision + 1,
  });
}

function movedBox(bbox: Bbox, dx: number, dy: number, w: number, h: number): Bbox {
  const [x0, y0, x1, y1] = bbox;
  return clampBoxToCanvas([x0 + dx, y0 + dy, x1 + dx, y1 + dy], w, h);
}

export function editElement(
  variant: StudioVariant,
  id: ElementId,
  action: EditAction,
): StudioVariant {
  const index = findIndex(variant, id);
  const el = variant.elements[index]!;
  const elements = variant.elements.slice();

  switch (action.kind) {
    case "move":
      elements[index] = { ...el, bbox: movedBox(el.bbox, action.dx, action.dy, variant.width, variant.height) };
      break;
    case "resize":
      elements[index] = { ...el, bbox: clampBoxToCanvas(action.bbox, variant.width, variant.height) };
      break;
    case "delete":
      elements.splice(index, 1);
      break;
    case "duplicate": {
      const [ox, oy] = action.offset ?? [0, 0];
      elements.push({
        id: action.newId,
        bbox: movedBox(el.bbox, ox, oy, variant.width, variant.height),
        fill: el.fill,
      });
      break;
    }
    case "recolor":
      elements[index] = { ...el, fill: action.fill };
      break;
  }
  return withElements(variant, elements);
}
