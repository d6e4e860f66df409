/** The single typed client for the saliency service.
 *
 * Every service exchange in the studio flows through this class; tests
 * inject a fetch stand-in, so no unit test touches the network. Response
 * bodies are shape-checked before they reach studio state.
 */

import { ElementId } from "./types.js";

export interface RequestElement {
  readonly id: ElementId;
  readonly bbox: readonly [number, number, number, number];
}

export interface PredictRequest {
  readonly image_png_base64: string;
  readonly elements: ReadonlyArray<RequestElement>;
}

export interface SaliencyRow {
  readonly id: ElementId;
  readonly value: number;
}

export interface PredictResponse {
  readonly saliency: ReadonlyArray<SaliencyRow>;
}

export interface DeltaRow {
  readonly id: ElementId;
  readonly delta: number;
}

export interface CompareVariantResult {
  readonly saliency: ReadonlyArray<SaliencyRow>;
  readonly deltas: ReadonlyArray<DeltaRow>;
}

export interface CompareResponse {
  readonly variants: ReadonlyArray<CompareVariantResult>;
}

export interface HealthResponse {
  readonly status: string;
  readonly model_version: string;
}

/** Non-2xx replies and transport failures both surface as this error. */
export class ServiceError extends Error {
  constructor(
    readonly status: number | null,
    message: string,
  ) {
    super(message);
  }
}

export interface HttpResponseLike {
  readonly status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
    signal?: AbortSignal;
  },
) => Promise<HttpResponseLike>;

function isId(v: unknown): v is ElementId {
  return typeof v === "string" || (typeof v === "number" && Number.isFinite(v));
}

function checkSaliencyRows(rows: unknown, context: string): SaliencyRow[] {
  if (!Array.isArray(rows)) {
    throw new ServiceError(null, `${context}: saliency is not a list`);
  }
  return rows.map((row, i) => {
    if (
      typeof row !== "object" || row === null ||
      !isId((row as Record<string, unknown>)["id"]) ||
      typeof (row as Record<string, unknown>)["value"] !== "number"
    ) {
      throw new ServiceError(null, `${context}: saliency row ${i} is malformed`);
    }
    const r = row as { id: ElementId; value: number };
    return { id: r.id, value: r.value };
  });
}

function checkDeltaRows(rows: unknown, context: string): DeltaRow[] {
  if (!Array.isArray(rows)) {
    throw new ServiceError(null, `${context}: deltas is not a list`);
  }
  return rows.map((row, i) => {
    if (
      typeof row !== "object" || row === null ||
      !isId((row as Record<string, unknown>)["id"]) ||
      typeof (row as Record<string, unknown>)["delta"] !== "number"
    ) {
      throw new ServiceError(null, `${context}: delta row ${i} is malformed`);
    }
    const r = row as { id: ElementId; delta: number };
    return { id: r.id, delta: r.delta };
  });
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async post(path: string, body: unknown, signal?: AbortSignal): Promise<unknown> {
    let resp: HttpResponseLike;
    try {
      resp = await this.fetchFn(this.baseUrl + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
        signal,
      });
    } catch (err) {
      if (err instanceof Error && err.name === "AbortError") {
        throw err;
      }
      throw new ServiceError(null, `service unreachable: ${String(err)}`);
    }
    let payload: unknown;
    try {
      payload = await resp.json();
    } catch {
      payload = null;
    }
    if (resp.status < 200 || resp.status >= 300) {
      const detail =
        typeof payload === "object" && payload !== null && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `status ${resp.status}`;
      throw new ServiceError(resp.status, detail);
    }
    return payload;
  }

  async health(): Promise<HealthResponse> {
    let resp: HttpResponseLike;
    try {
      resp = await this.fetchFn(this.baseUrl + "/api/health", { method: "GET" });
    } catch (err) {
      throw new ServiceError(null, `service unreachable: ${String(err)}`);
    }
    if (resp.status !== 200) {
      throw new ServiceError(resp.status, `health check failed with status ${resp.status}`);
    }
    const payload = (await resp.json()) as Record<string, unknown>;
    if (typeof payload?.["status"] !== "string" || typeof payload?.["model_version"] !== "string") {
      throw new ServiceError(null, "health response is malformed");
    }
    return { status: payload["status"], model_version: payload["model_version"] };
  }

  async predict(request: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    const payload = await this.post("/api/predict", request, signal);
    if (typeof payload !== "object" || payload === null) {
      throw new ServiceError(null, "predict response is not an object");
    }
    return { saliency: checkSaliencyRows((payload as Record<string, unknown>)["saliency"], "predict") };
  }

  async compare(
    variants: ReadonlyArray<PredictRequest>,
    signal?: AbortSignal,
  ): Promise<CompareResponse> {
    const payload = await this.post("/api/compare", { variants }, signal);
    if (typeof payload !== "object" || payload === null) {
      throw new ServiceError(null, "compare response is not an object");
    }
    const raw = (payload as Record<string, unknown>)["variants"];
    if (!Array.isArray(raw)) {
      throw new ServiceError(null, "compare response has no variants list");
    }
    const out = raw.map((entry, i) => {
      if (typeof entry !== "object" || entry === null) {
        throw new ServiceError(null, `compare variant ${i} is malformed`);
      }
      const rec = entry as Record<string, unknown>;
      return {
        saliency: checkSaliencyRows(rec["saliency"], `compare variant ${i}`),
        deltas: checkDeltaRows(rec["deltas"], `compare variant ${i}`),
      };
    });
    return { variants: out };
  }
}
