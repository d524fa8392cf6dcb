import type { ApiError, ModelInfo, Step1Response, Step2Response } from "./types.js";

async function parseError(response: Response): Promise<ApiError> {
  let message = `${response.status}`;
  let fields: string[] = [];
  try {
    const body = (await response.json()) as Record<string, unknown>;
    if (typeof body.error === "string") message = body.error;
    for (const key of ["missing", "extra", "fields"]) {
      const value = body[key];
      if (Array.isArray(value)) fields = fields.concat(value.map(String));
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return { status: response.status, message, fields };
}

/** Thin typed client for the triage service; throws ApiError objects. */
export class TriageApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request<ModelInfo>("/v1/model");
  }

  step1(features: Record<string, number>): Promise<Step1Response> {
    return this.request<Step1Response>("/v1/step1", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(features),
    });
  }

  step2(
    ref: { session_id: string } | { meta2: number[] },
    features: Record<string, number>,
  ): Promise<Step2Response> {
    return this.request<Step2Response>("/v1/step2", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...ref, features }),
    });
  }
}
