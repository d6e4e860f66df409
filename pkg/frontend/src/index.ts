export type {
  Bbox,
  ElementId,
  OverlayState,
  PredictionSnapshot,
  Rgb,
  StudioElement,
  StudioVariant,
} from "./types.js";
export {
  StudioError,
  isStale,
  makeOverlayState,
  makePrediction,
  makeVariant,
  validateBbox,
  validateElements,
} from "./types.js";
export type { EditAction } from "./edit.js";
export { editElement } from "./edit.js";
export type { ImageBuffer } from "./raster.js";
export {
  clampBoxToCanvas,
  cloneImage,
  makeImage,
  paintRect,
  pixelAt,
  rasterizeVariant,
  solidImage,
} from "./raster.js";
export { adler32, base64Encode, crc32, encodePng, zlibStored } from "./png.js";
export type {
  CompareResponse,
  CompareVariantResult,
  DeltaRow,
  FetchLike,
  HealthResponse,
  HttpResponseLike,
  PredictRequest,
  PredictResponse,
  RequestElement,
  SaliencyRow,
} from "./client.js";
export { ServiceClient, ServiceError } from "./client.js";
export type { Overlay, OverlayCell } from "./overlay.js";
export { formatValue, overlayFor, sampleColormap } from "./overlay.js";
export type { CellStatus, CompareCell, CompareRow, CompareTable } from "./compare.js";
export { buildCompareTable, sortRowsByDelta } from "./compare.js";
export { Studio } from "./studio.js";
export type { ExportedScreen, ManifestElement, ManifestScreen } from "./manifest.js";
export { screenFromVariant, variantFromScreen } from "./manifest.js";
