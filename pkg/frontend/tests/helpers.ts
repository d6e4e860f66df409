/** Shared test scaffolding: a scripted fetch stand-in and tiny fixtures. */

import { FetchLike, HttpResponseLike, PredictRequest } from "../src/client.js";
import { solidImage } from "../src/raster.js";
import { Studio } from "../src/studio.js";
import { ServiceClient } from "../src/client.js";
import { ElementId, StudioElement } from "../src/types.js";

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
  signal: AbortSignal | undefined;
}

export type Responder = (call: RecordedCall) => { status: number; payload: unknown } | Promise<{ status: number; payload: unknown }>;

/** A fetch stand-in that records calls and answers from a script. */
export function mockFetch(respond: Responder): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetch: FetchLike = async (url, init) => {
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body !== undefined ? JSON.parse(init.body) : undefined,
      signal: init?.signal,
    };
    calls.push(call);
    const { status, payload } = await respond(call);
    const resp: HttpResponseLike = {
      status,
      json: async () => payload,
    };
    return resp;
  };
  return { fetch, calls };
}

/** Answers every /api/predict with values proportional to the given weights. */
export function predictResponder(weights: ReadonlyArray<number>): Responder {
  return (call) => {
    const body = call.body as PredictRequest;
    const k = body.elements.length;
    const w = weights.slice(0, k);
    const total = w.reduce((a, b) => a + b, 0);
    return {
      status: 200,
      payload: {
        saliency: body.elements.map((el, i) => ({ id: el.id, value: (w[i] ?? 0) / total })),
      },
    };
  };
}

export function element(id: ElementId, bbox: [number, number, number, number]): StudioElement {
  return { id, bbox, fill: null };
}

/** A studio over one 40x30 gray screen with the given elements. */
export function studioWith(
  respond: Responder,
  elements: ReadonlyArray<StudioElement>,
): { studio: Studio; calls: RecordedCall[] } {
  const { fetch, calls } = mockFetch(respond);
  const studio = new Studio(new ServiceClient("http://service.test", fetch));
  studio.addImage("base", solidImage(40, 30, [128, 128, 128]));
  studio.addVariant("main", "base", elements);
  return { studio, calls };
}
