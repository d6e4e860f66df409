/** Browser wiring for the studio: canvas, toolbar, compare table.
 *
 * All logic lives in src/; this file only binds it to the DOM. The
 * studio talks to a running `uisal serve` instance, default same origin,
 * override with ?service=http://host:port.
 */

import { ServiceClient, ServiceError } from "../src/client.js";
import { sortRowsByDelta, CompareTable } from "../src/compare.js";
import { EditAction } from "../src/edit.js";
import { ImageBuffer, makeImage, solidImage } from "../src/raster.js";
import { Studio } from "../src/studio.js";
import { StudioError, makeOverlayState } from "../src/types.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const studio = new Studio(new ServiceClient(baseUrl, (url, init) => fetch(url, init)));

const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusLine = document.getElementById("status")!;
const staleBadge = document.getElementById("stale-badge")!;
const variantSelect = document.getElementById("variant") as HTMLSelectElement;
const elementSelect = document.getElementById("element") as HTMLSelectElement;
const opacityInput = document.getElementById("opacity") as HTMLInputElement;
const showValuesInput = document.getElementById("show-values") as HTMLInputElement;
const compareOut = document.getElementById("compare")!;

let selectedVariant = "a";

function say(text: string): void {
  statusLine.textContent = text;
}

function imageToCanvas(img: ImageBuffer): ImageData {
  const rgba = new Uint8ClampedArray(img.width * img.height * 4);
  for (let p = 0, q = 0; p < img.data.length; p += 3, q += 4) {
    rgba[q] = img.data[p]!;
    rgba[q + 1] = img.data[p + 1]!;
    rgba[q + 2] = img.data[p + 2]!;
    rgba[q + 3] = 255;
  }
  return new ImageData(rgba, img.width, img.height);
}

function redraw(): void {
  const variant = studio.getVariant(selectedVariant);
  const image = studio.getImage(variant.imageRef);
  canvas.width = image.width;
  canvas.height = image.height;
  ctx.putImageData(imageToCanvas(image), 0, 0);

  for (const el of variant.elements) {
    if (el.fill !== null) {
      ctx.fillStyle = `rgb(${el.fill[0]},${el.fill[1]},${el.fill[2]})`;
      ctx.fillRect(el.bbox[0], el.bbox[1], el.bbox[2] - el.bbox[0], el.bbox[3] - el.bbox[1]);
    }
    ctx.strokeStyle = "#888";
    ctx.strokeRect(el.bbox[0] + 0.5, el.bbox[1] + 0.5, el.bbox[2] - el.bbox[0] - 1, el.bbox[3] - el.bbox[1] - 1);
  }

  const state = makeOverlayState(Number(opacityInput.value), showValuesInput.checked);
  const overlay = studio.overlay(selectedVariant, state);
  staleBadge.hidden = !(overlay?.stale ?? false);
  if (overlay !== null) {
    for (const cell of overlay.cells) {
      const [r, g, b] = cell.color;
      ctx.fillStyle = `rgba(${r},${g},${b},${cell.opacity})`;
      ctx.fillRect(cell.bbox[0], cell.bbox[1], cell.bbox[2] - cell.bbox[0], cell.bbox[3] - cell.bbox[1]);
      if (cell.label !== null) {
        ctx.fillStyle = "#fff";
        ctx.font = "10px monospace";
        ctx.fillText(cell.label, cell.bbox[0] + 2, cell.bbox[1] + 10);
      }
    }
  }

  elementSelect.replaceChildren(
    ...variant.elements.map((el) => {
      const opt = document.createElement("option");
      opt.value = String(el.id);
      opt.textContent = `element ${String(el.id)}`;
      return opt;
    }),
  );
  (document.getElementById("predict") as HTMLButtonElement).disabled =
    !studio.canPredict(selectedVariant);
}

function currentElementId(): number | string {
  const raw = elementSelect.value;
  const variant = studio.getVariant(selectedVariant);
  const match = variant.elements.find((el) => String(el.id) === raw);
  if (match === undefined) {
    throw new StudioError("select an element first");
  }
  return match.id;
}

function applyEdit(action: EditAction): void {
  try {
    studio.edit(selectedVariant, currentElementId(), action);
    redraw();
    say("edited; prediction is stale until you predict again");
  } catch (err) {
    say(String(err));
  }
}

function nextElementId(): number {
  const variant = studio.getVariant(selectedVariant);
  const numeric = variant.elements.map((el) => (typeof el.id === "number" ? el.id : -1));
  return numeric.length > 0 ? Math.max(...numeric) + 1 : 0;
}

function randomFill(): [number, number, number] {
  return [
    64 + Math.floor(Math.random() * 191),
    64 + Math.floor(Math.random() * 191),
    64 + Math.floor(Math.random() * 191),
  ];
}

const actions: Record<string, () => EditAction> = {
  "move-left": () => ({ kind: "move", dx: -4, dy: 0 }),
  "move-right": () => ({ kind: "move", dx: 4, dy: 0 }),
  "move-up": () => ({ kind: "move", dx: 0, dy: -4 }),
  "move-down": () => ({ kind: "move", dx: 0, dy: 4 }),
  grow: () => {
    const el = studio
      .getVariant(selectedVariant)
      .elements.find((e) => String(e.id) === elementSelect.value)!;
    return { kind: "resize", bbox: [el.bbox[0] - 4, el.bbox[1] - 4, el.bbox[2] + 4, el.bbox[3] + 4] };
  },
  shrink: () => {
    const el = studio
      .getVariant(selectedVariant)
      .elements.find((e) => String(e.id) === elementSelect.value)!;
    return { kind: "resize", bbox: [el.bbox[0] + 4, el.bbox[1] + 4, el.bbox[2] - 4, el.bbox[3] - 4] };
  },
  delete: () => ({ kind: "delete" }),
  duplicate: () => ({ kind: "duplicate", newId: nextElementId(), offset: [8, 8] }),
  recolor: () => ({ kind: "recolor", fill: randomFill() }),
};

for (const [id, build] of Object.entries(actions)) {
  document.getElementById(id)?.addEventListener("click", () => applyEdit(build()));
}

document.getElementById("predict")!.addEventListener("click", () => {
  say("predicting...");
  void studio
    .predict(selectedVariant)
    .then(() => {
      redraw();
      say("prediction fresh");
    })
    .catch((err: unknown) => {
      redraw(); // stale overlay stays visible, badge included
      say(err instanceof ServiceError ? `service error: ${err.message}` : String(err));
    });
});

document.getElementById("compare-btn")!.addEventListener("click", () => {
  say("comparing...");
  void studio
    .compare(studio.variantNames())
    .then((table) => {
      renderCompare(sortRowsByDelta(table, 1));
      say("compared against variant a");
    })
    .catch((err: unknown) => say(String(err)));
});

function renderCompare(table: CompareTable): void {
  const header = `<tr><th>element</th>${table.variantNames
    .map((n) => `<th>${n} value</th><th>${n} delta</th>`)
    .join("")}</tr>`;
  const rows = table.rows
    .map((row) => {
      const cells = row.cells
        .map((cell) => {
          const value = cell.value === null ? cell.status : cell.value.toFixed(3);
          const delta = cell.delta === null ? "" : cell.delta.toFixed(3);
          const mark = cell.changed ? " *" : "";
          return `<td>${value}${mark}</td><td>${delta}</td>`;
        })
        .join("");
      return `<tr><td>${String(row.id)}</td>${cells}</tr>`;
    })
    .join("");
  compareOut.innerHTML = `<table>${header}${rows}</table>`;
}

variantSelect.addEventListener("change", () => {
  selectedVariant = variantSelect.value;
  redraw();
});
opacityInput.addEventListener("input", redraw);
showValuesInput.addEventListener("change", redraw);

// Demo scene: one gray phone-ish screen, two variants of the same layout.
const demo = solidImage(180, 320, [235, 235, 235]);
studio.addImage("demo", demo);
studio.addVariant("a", "demo", [
  { id: 0, bbox: [20, 24, 160, 88], fill: [66, 133, 244] },
  { id: 1, bbox: [20, 120, 86, 184], fill: [219, 68, 55] },
  { id: 2, bbox: [94, 120, 160, 184], fill: [244, 180, 0] },
  { id: 3, bbox: [20, 232, 160, 288], fill: [15, 157, 88] },
]);
studio.addVariant("b", "demo", [
  { id: 0, bbox: [20, 24, 160, 88], fill: [66, 133, 244] },
  { id: 1, bbox: [20, 120, 86, 184], fill: [219, 68, 55] },
  { id: 2, bbox: [94, 120, 160, 184], fill: [244, 180, 0] },
  { id: 3, bbox: [20, 232, 160, 288], fill: [15, 157, 88] },
]);

const file = document.getElementById("screenshot") as HTMLInputElement;
file.addEventListener("change", () => {
  const chosen = file.files?.[0];
  if (chosen === undefined) {
    return;
  }
  void createImageBitmap(chosen).then((bitmap) => {
    const scratch = document.createElement("canvas");
    scratch.width = bitmap.width;
    scratch.height = bitmap.height;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(bitmap, 0, 0);
    const rgba = sctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
    const rgb = new Uint8ClampedArray(bitmap.width * bitmap.height * 3);
    for (let p = 0, q = 0; q < rgba.length; p += 3, q += 4) {
      rgb[p] = rgba[q]!;
      rgb[p + 1] = rgba[q + 1]!;
      rgb[p + 2] = rgba[q + 2]!;
    }
    const ref = `upload-${Date.now()}`;
    studio.addImage(ref, makeImage(bitmap.width, bitmap.height, rgb));
    const name = `upload-${studio.variantNames().length}`;
    studio.addVariant(name, ref, [
      { id: 0, bbox: [0, 0, bitmap.width, bitmap.height], fill: null },
    ]);
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    variantSelect.append(opt);
    variantSelect.value = name;
    selectedVariant = name;
    redraw();
    say(`loaded ${name}; add boxes by duplicating and resizing`);
  });
});

redraw();
say("ready; point ?service= at a running prediction service");
