/** The studio store: variants, edits, predictions, comparisons.
 *
 * State changes are synchronous and pure (new frozen variant objects);
 * the only async paths are the service calls. At most one prediction is
 * in flight per variant: a newer request aborts and supersedes an older
 * one, and a superseded response is discarded, never stored.
 */

import { PredictRequest, ServiceClient } from "./client.js";
import { buildCompareTable, CompareTable } from "./compare.js";
import { EditAction, editElement } from "./edit.js";
import { Overlay, overlayFor } from "./overlay.js";
import { ImageBuffer, rasterizeVariant } from "./raster.js";
import { base64Encode, encodePng } from "./png.js";
import {
  ElementId,
  OverlayState,
  StudioElement,
  StudioError,
  StudioVariant,
  isStale,
  makePrediction,
  makeVariant,
} from "./types.js";

interface Inflight {
  seq: number;
  controller: AbortController;
}

export class Studio {
  private readonly images = new Map<string, ImageBuffer>();
  private readonly variantsByName = new Map<string, StudioVariant>();
  private readonly inflight = new Map<string, Inflight>();

  constructor(private readonly client: ServiceClient) {}

  addImage(ref: string, image: ImageBuffer): void {
    if (this.images.has(ref)) {
      throw new StudioError(`image ref ${ref} already exists`);
    }
    this.images.set(ref, image);
  }

  getImage(ref: string): ImageBuffer {
    const image = this.images.get(ref);
    if (image === undefined) {
      throw new StudioError(`unknown image ref ${ref}`);
    }
    return image;
  }

  addVariant(name: string, imageRef: string, elements: ReadonlyArray<StudioElement>): StudioVariant {
    if (this.variantsByName.has(name)) {
      throw new StudioError(`variant ${name} already exists`);
    }
    const image = this.getImage(imageRef);
    const variant = makeVariant(name, imageRef, image.width, image.height, elements);
    this.variantsByName.set(name, variant);
    return variant;
  }

  getVariant(name: string): StudioVariant {
    const variant = this.variantsByName.get(name);
    if (variant === undefined) {
      throw new StudioError(`unknown variant ${name}`);
    }
    return variant;
  }

  variantNames(): string[] {
    return [...this.variantsByName.keys()];
  }

  edit(name: string, id: ElementId, action: EditAction): StudioVariant {
    const next = editElement(this.getVariant(name), id, action);
    this.variantsByName.set(name, next);
    return next;
  }

  /** Prediction requires at least one element; the UI disables the button on this. */
  canPredict(name: string): boolean {
    return this.getVariant(name).elements.length > 0;
  }

  isStale(name: string): boolean {
    return isStale(this.getVariant(name));
  }

  /** The exact request body the service would receive for this variant now. */
  buildRequest(name: string): PredictRequest {
    const variant = this.getVariant(name);
    if (variant.elements.length === 0) {
      throw new StudioError(`variant ${name} has no elements to predict`);
    }
    const pixels = rasterizeVariant(this.getImage(variant.imageRef), variant);
    return {
      image_png_base64: base64Encode(encodePng(pixels)),
      elements: variant.elements.map((el) => ({ id: el.id, bbox: el.bbox })),
    };
  }

  /**
   * Rasterizes, posts, and stores a fresh prediction snapshot tagged with
   * the revision that produced the pixels. A request superseded by a newer
   * one for the same variant resolves to the stored variant unchanged. A
   * service failure on the latest request propagates after leaving the
   * stored variant (and any stale overlay) intact.
   */
  async predict(name: string): Promise<StudioVariant> {
    const variant = this.getVariant(name);
    const request = this.buildRequest(name);
    const requestRevision = variant.revision;

    const prev = this.inflight.get(name);
    prev?.controller.abort();
    const seq = (prev?.seq ?? 0) + 1;
    const controller = new AbortController();
    this.inflight.set(name, { seq, controller });

    let saliency;
    try {
      ({ saliency } = await this.client.predict(request, controller.signal));
    } catch (err) {
      if (this.inflight.get(name)?.seq !== seq) {
        return this.getVariant(name); // superseded; cancellation is not an error
      }
      this.inflight.delete(name);
      if (err instanceof Error && err.name === "AbortError") {
        return this.getVariant(name);
      }
      throw err;
    }
    if (this.inflight.get(name)?.seq !== seq) {
      return this.getVariant(name);
    }
    this.inflight.delete(name);

    const snapshot = makePrediction(
      saliency.map((row) => ({ id: row.id, value: row.value })),
      requestRevision,
    );
    const current = this.getVariant(name);
    const updated = Object.freeze({ ...current, prediction: snapshot });
    this.variantsByName.set(name, updated);
    return updated;
  }

  overlay(name: string, state: OverlayState): Overlay | null {
    return overlayFor(this.getVariant(name), state);
  }

  /** Side-by-side comparison; deltas come verbatim from the service. */
  async compare(names: ReadonlyArray<string>): Promise<CompareTable> {
    if (names.length < 2) {
      throw new StudioError("comparison needs at least two variants");
    }
    const variants = names.map((name) => this.getVariant(name));
    const requests = names.map((name) => this.buildRequest(name));
    const response = await this.client.compare(requests);
    return buildCompareTable(variants, response);
  }
}
