/** Side-by-side comparison table built from a service compare response.
 *
 * Values and deltas are stored exactly as the service returned them;
 * the table never recomputes a delta. Rows cover the union of element
 * ids, baseline ids first, and each cell is labeled shared, added
 * (present here, absent from the baseline), removed (the reverse), or
 * absent (an id another variant added).
 */

import { CompareResponse } from "./client.js";
import { ElementId, StudioError, StudioVariant } from "./types.js";

export type CellStatus = "shared" | "added" | "removed" | "absent";

export interface CompareCell {
  readonly status: CellStatus;
  readonly value: number | null;
  /** Verbatim service delta against variant 0; null when not shared. */
  readonly delta: number | null;
  /** True when this variant's element geometry or fill differs from the baseline's. */
  readonly changed: boolean;
}

export interface CompareRow {
  readonly id: ElementId;
  readonly cells: ReadonlyArray<CompareCell>;
}

export interface CompareTable {
  readonly variantNames: ReadonlyArray<string>;
  readonly rows: ReadonlyArray<CompareRow>;
}

function sameGeometry(a: StudioVariant, b: StudioVariant, id: ElementId): boolean {
  const ea = a.elements.find((el) => el.id === id);
  const eb = b.elements.find((el) => el.id === id);
  if (ea === undefined || eb === undefined) {
    return false;
  }
  const sameBox = ea.bbox.every((v, i) => v === eb.bbox[i]);
  const sameFill =
    (ea.fill === null && eb.fill === null) ||
    (ea.fill !== null && eb.fill !== null && ea.fill.every((v, i) => v === eb.fill![i]));
  return sameBox && sameFill;
}

export function buildCompareTable(
  variants: ReadonlyArray<StudioVariant>,
  response: CompareResponse,
): CompareTable {
  if (variants.length < 2) {
    throw new StudioError("comparison needs at least two variants");
  }
  if (response.variants.length !== variants.length) {
    throw new StudioError(
      `service returned ${response.variants.length} variants, expected ${variants.length}`,
    );
  }

  const ids: ElementId[] = [];
  const seen = new Set<ElementId>();
  for (const result of response.variants) {
    for (const row of result.saliency) {
      if (!seen.has(row.id)) {
        seen.add(row.id);
        ids.push(row.id);
      }
    }
  }

  const baseline = response.variants[0]!;
  const baselineIds = new Set(baseline.saliency.map((row) => row.id));
  const rows = ids.map((id) => {
    const cells = response.variants.map((result, v) => {
      const valueRow = result.saliency.find((row) => row.id === id);
      const deltaRow = result.deltas.find((row) => row.id === id);
      let status: CellStatus;
      if (valueRow !== undefined) {
        status = baselineIds.has(id) ? "shared" : "added";
      } else {
        status = baselineIds.has(id) ? "removed" : "absent";
      }
      const changed =
        v > 0 && valueRow !== undefined && status === "shared"
          ? !sameGeometry(variants[0]!, variants[v]!, id)
          : false;
      return Object.freeze({
        status,
        value: valueRow?.value ?? null,
        delta: deltaRow?.delta ?? null,
        changed,
      });
    });
    return Object.freeze({ id, cells: Object.freeze(cells) });
  });

  return Object.freeze({
    variantNames: Object.freeze(variants.map((v) => v.name)),
    rows: Object.freeze(rows),
  });
}

/** Rows reordered by a variant's delta, largest first by default; rows
 * without a delta in that column sink to the bottom. Stable, pure. */
export function sortRowsByDelta(
  table: CompareTable,
  variantIndex: number,
  descending = true,
): CompareTable {
  if (variantIndex < 0 || variantIndex >= table.variantNames.length) {
    throw new StudioError(`no variant at index ${variantIndex}`);
  }
  const keyed = table.rows.map((row, i) => ({ row, i, delta: row.cells[variantIndex]?.delta ?? null }));
  keyed.sort((a, b) => {
    if (a.delta === null && b.delta === null) return a.i - b.i;
    if (a.delta === null) return 1;
    if (b.delta === null) return -1;
    const diff = descending ? b.delta - a.delta : a.delta - b.delta;
    return diff !== 0 ? diff : a.i - b.i;
  });
  return Object.freeze({
    variantNames: table.variantNames,
    rows: Object.freeze(keyed.map((k) => k.row)),
  });
}
