import { describe, expect, it } from "vitest";

import { PredictRequest } from "../src/client.js";
import { sortRowsByDelta } from "../src/compare.js";
import { ServiceClient } from "../src/client.js";
import { Studio } from "../src/studio.js";
import { StudioError } from "../src/types.js";
import { solidImage } from "../src/raster.js";
import { RecordedCall, element, mockFetch } from "./helpers.js";

/** Mirrors the service: saliency per variant, deltas vs variant 0 on shared ids. */
function compareResponder(perVariant: Array<Array<{ id: number | string; value: number }>>) {
  return (call: RecordedCall) => {
    if (!call.url.endsWith("/api/compare")) {
      throw new Error(`unexpected url ${call.url}`);
    }
    const base = new Map(perVariant[0]!.map((row) => [row.id, row.value]));
    return {
      status: 200,
      payload: {
        variants: perVariant.map((saliency) => ({
          saliency,
          deltas: saliency
            .filter((row) => base.has(row.id))
            .map((row) => ({ id: row.id, delta: row.value - base.get(row.id)! })),
        })),
      },
    };
  };
}

function twoVariantStudio(respond: Parameters<typeof mockFetch>[0]) {
  const { fetch, calls } = mockFetch(respond);
  const studio = new Studio(new ServiceClient("http://s", fetch));
  studio.addImage("base", solidImage(40, 30, [200, 200, 200]));
  studio.addVariant("a", "base", [element(0, [2, 3, 10, 9]), element(1, [12, 5, 30, 25])]);
  studio.addVariant("b", "base", [element(0, [2, 3, 10, 9]), element(1, [12, 5, 30, 25])]);
  return { studio, calls };
}

describe("compare_variants", () => {
  it("identical variants give all-zero deltas", async () => {
    const rows = [
      [{ id: 0, value: 0.6 }, { id: 1, value: 0.4 }],
      [{ id: 0, value: 0.6 }, { id: 1, value: 0.4 }],
    ];
    const { studio } = twoVariantStudio(compareResponder(rows));
    const table = await studio.compare(["a", "b"]);
    expect(table.variantNames).toEqual(["a", "b"]);
    for (const row of table.rows) {
      for (const cell of row.cells) {
        expect(cell.status).toBe("shared");
        expect(cell.delta).toBe(0);
      }
    }
  });

  it("the delta table matches service-returned deltas exactly", async () => {
    // Deliberately inconsistent numbers: the table must echo the service,
    // not recompute value differences.
    const payload = {
      variants: [
        {
          saliency: [{ id: 0, value: 0.5 }, { id: 1, value: 0.5 }],
          deltas: [{ id: 0, delta: 0 }, { id: 1, delta: 0 }],
        },
        {
          saliency: [{ id: 0, value: 0.75 }, { id: 1, value: 0.25 }],
          deltas: [{ id: 0, delta: 0.123456789 }, { id: 1, delta: -0.25 }],
        },
      ],
    };
    const { studio } = twoVariantStudio(() => ({ status: 200, payload }));
    const table = await studio.compare(["a", "b"]);
    const row0 = table.rows.find((r) => r.id === 0)!;
    const row1 = table.rows.find((r) => r.id === 1)!;
    expect(row0.cells[1]!.delta).toBe(0.123456789);
    expect(row1.cells[1]!.delta).toBe(-0.25);
  });

  it("an enlarged element is flagged changed", async () => {
    const rows = [
      [{ id: 0, value: 0.5 }, { id: 1, value: 0.5 }],
      [{ id: 0, value: 0.7 }, { id: 1, value: 0.3 }],
    ];
    const { studio } = twoVariantStudio(compareResponder(rows));
    studio.edit("b", 0, { kind: "resize", bbox: [2, 3, 20, 15] });
    const table = await studio.compare(["a", "b"]);
    const row0 = table.rows.find((r) => r.id === 0)!;
    const row1 = table.rows.find((r) => r.id === 1)!;
    expect(row0.cells[1]!.changed).toBe(true);
    expect(row1.cells[1]!.changed).toBe(false);
    expect(row0.cells[0]!.changed).toBe(false); // baseline column is never "changed"
  });

  it("unmatched ids are shown as added and removed", async () => {
    const rows = [
      [{ id: 0, value: 0.5 }, { id: 1, value: 0.5 }],
      [{ id: 0, value: 0.4 }, { id: 9, value: 0.6 }],
    ];
    const { studio } = twoVariantStudio(compareResponder(rows));
    studio.edit("b", 1, { kind: "delete" });
    studio.edit("b", 0, { kind: "duplicate", newId: 9, offset: [5, 5] });
    const table = await studio.compare(["a", "b"]);

    const gone = table.rows.find((r) => r.id === 1)!;
    expect(gone.cells[0]!.status).toBe("shared");
    expect(gone.cells[1]!.status).toBe("removed");
    expect(gone.cells[1]!.value).toBeNull();
    expect(gone.cells[1]!.delta).toBeNull();

    const added = table.rows.find((r) => r.id === 9)!;
    expect(added.cells[0]!.status).toBe("absent");
    expect(added.cells[1]!.status).toBe("added");
    expect(added.cells[1]!.value).toBe(0.6);
    expect(added.cells[1]!.delta).toBeNull(); // no baseline to diff against
  });

  it("rows sort by a variant's delta with missing deltas last", async () => {
    const rows = [
      [{ id: 0, value: 0.2 }, { id: 1, value: 0.3 }, { id: 2, value: 0.5 }],
      [{ id: 0, value: 0.5 }, { id: 1, value: 0.1 }, { id: 3, value: 0.4 }],
    ];
    const { studio } = twoVariantStudio(compareResponder(rows));
    studio.edit("a", 0, { kind: "duplicate", newId: 2, offset: [0, 10] });
    studio.edit("b", 0, { kind: "duplicate", newId: 3, offset: [0, 10] });
    const table = await studio.compare(["a", "b"]);
    const sorted = sortRowsByDelta(table, 1);
    expect(sorted.rows.map((r) => r.id)).toEqual([0, 1, 2, 3]);
    const ascending = sortRowsByDelta(table, 1, false);
    expect(ascending.rows.map((r) => r.id)).toEqual([1, 0, 2, 3]);
    expect(() => sortRowsByDelta(table, 5)).toThrow(StudioError);
  });

  it("requires at least two variants and posts one body per variant", async () => {
    const rows = [
      [{ id: 0, value: 0.5 }, { id: 1, value: 0.5 }],
      [{ id: 0, value: 0.5 }, { id: 1, value: 0.5 }],
    ];
    const { studio, calls } = twoVariantStudio(compareResponder(rows));
    await expect(studio.compare(["a"])).rejects.toThrow(/at least two/);
    await studio.compare(["a", "b"]);
    expect(calls).toHaveLength(1);
    const body = calls[0]!.body as { variants: PredictRequest[] };
    expect(body.variants).toHaveLength(2);
    expect(body.variants[0]!.elements.map((el) => el.id)).toEqual([0, 1]);
    expect(typeof body.variants[0]!.image_png_base64).toBe("string");
  });
});
