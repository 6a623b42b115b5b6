/** Thin client for the workbench service. All responses arrive in the
 * `{ok, result, error}` envelope; failures surface as ApiError with the
 * HTTP status, so callers can distinguish conflicts (409) from the rest.
 */

import type { ApiEnvelope, SessionPayload } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type SessionAction =
  | { type: "drop"; metric: string }
  | { type: "undo" }
  | { type: "set_k"; k: number }
  | { type: "set_threshold"; name: string; value: number }
  | { type: "auto_refine" };

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
  } catch (cause) {
    throw new ApiError(0, "network", `service unreachable: ${String(cause)}`);
  }
  let envelope: ApiEnvelope<T>;
  try {
    envelope = (await response.json()) as ApiEnvelope<T>;
  } catch {
    throw new ApiError(response.status, "bad_envelope", "response was not JSON");
  }
  if (!envelope.ok || envelope.result === null) {
    const error = envelope.error ?? { code: "unknown", message: "unknown error" };
    throw new ApiError(response.status, error.code, error.message);
  }
  return envelope.result;
}

export interface DatasetSummary {
  dataset_id: string;
  n_entities: number;
  n_metrics: number;
  metrics: { raw: string; construct: string; metric: string; tool: string | null }[];
}

export function uploadDataset(csv: string, name?: string): Promise<DatasetSummary> {
  return request("/datasets", {
    method: "POST",
    body: JSON.stringify({ csv, name }),
  });
}

export function createSession(
  datasetId: string,
  k: number,
  expected?: Record<string, string>,
  config?: Record<string, unknown>,
): Promise<SessionPayload> {
  return request("/sessions", {
    method: "POST",
    body: JSON.stringify({ dataset_id: datasetId, k, expected, config: config ?? {} }),
  });
}

export function getSession(sessionId: string): Promise<SessionPayload> {
  return request(`/sessions/${sessionId}`);
}

export function postAction(
  sessionId: string,
  action: SessionAction,
  rationale = "",
): Promise<SessionPayload> {
  return request(`/sessions/${sessionId}/actions`, {
    method: "POST",
    body: JSON.stringify({ action, rationale }),
  });
}

export function exportSpec(sessionId: string): Promise<Record<string, unknown>> {
  return request(`/sessions/${sessionId}/export`, { method: "POST" });
}

export function fitCfa(
  datasetId: string,
  document: Record<string, unknown>,
): Promise<Record<string, unknown>> {
  return request("/cfa/fit", {
    method: "POST",
    body: JSON.stringify({ dataset_id: datasetId, document }),
  });
}
