/** Payload types for the session API, plus runtime validation.
 *
 * The workbench displays numbers; it never derives them. Everything here
 * mirrors the service's published session schema, and a payload that does
 * not match (wrong shape or wrong schema version) is rejected before any
 * rendering happens.
 */

export const SUPPORTED_SCHEMA_VERSION = 1;

export interface ApiEnvelope<T> {
  ok: boolean;
  result: T | null;
  error: { code: string; message: string } | null;
}

export interface ProblemPayload {
  kind: "low_communality" | "cross_loading" | "wrong_factor";
  metric: string;
  severity: number;
  evidence: Record<string, unknown>;
  retain_for_now: boolean;
}

export interface SolutionPayload {
  loadings: number[][];
  factor_correlations: number[][];
  communalities: number[];
  eigenvalues: number[];
  variance_explained: number;
  assignment: Record<string, number>;
  rotation: string;
  heywood: boolean;
  suppressed_threshold: number;
  digest: string;
}

export interface StepPayload {
  action: { type: string; metric?: string; k?: number; name?: string; value?: number };
  rationale: string;
  digest: string;
  warnings: string[];
  problem_count: number;
}

export interface StopPayload {
  clean: boolean;
  active_problems: number;
  retained_problems: number;
  variance_explained: number;
  variance_ok: boolean;
  factor_sizes: Record<string, number>;
  factor_sizes_ok: boolean;
}

export interface AdvicePayload {
  eigenvalues: number[];
  parallel_suggested: number;
  parallel_thresholds: number[];
  kaiser_suggested: number;
  scree_elbow_candidates: number[];
}

export interface SessionPayload {
  schema_version: number;
  id: string;
  k: number;
  factor_names: string[];
  metrics: string[];
  dropped: string[];
  expected: Record<string, string>;
  thresholds: Record<string, number>;
  solution: SolutionPayload;
  problems: ProblemPayload[];
  stop: StopPayload;
  history: StepPayload[];
  advice: AdvicePayload;
}

export type Validated =
  | { ok: true; session: SessionPayload }
  | { ok: false; message: string };

function isNumberMatrix(value: unknown): value is number[][] {
  return Array.isArray(value) &&
    value.every((row) => Array.isArray(row) && row.every((v) => typeof v === "number"));
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((v) => typeof v === "string");
}

/** Structural check of a session payload; returns a banner message on mismatch. */
export function validateSession(payload: unknown): Validated {
  if (typeof payload !== "object" || payload === null) {
    return { ok: false, message: "session payload is not an object" };
  }
  const p = payload as Record<string, unknown>;
  if (p.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    return {
      ok: false,
      message:
        `schema version mismatch: workbench supports v${SUPPORTED_SCHEMA_VERSION}, ` +
        `service sent v${String(p.schema_version ?? "unknown")}`,
    };
  }
  const solution = p.solution as Record<string, unknown> | undefined;
  const shapeOk =
    typeof p.id === "string" &&
    typeof p.k === "number" &&
    isStringArray(p.factor_names) &&
    isStringArray(p.metrics) &&
    isStringArray(p.dropped) &&
    Array.isArray(p.problems) &&
    Array.isArray(p.history) &&
    typeof p.stop === "object" && p.stop !== null &&
    typeof p.advice === "object" && p.advice !== null &&
    solution !== undefined &&
    isNumberMatrix(solution.loadings) &&
    Array.isArray(solution.communalities) &&
    typeof solution.suppressed_threshold === "number" &&
    typeof solution.variance_explained === "number" &&
    typeof solution.digest === "string";
  if (!shapeOk) {
    return {
      ok: false,
      message: `malformed session payload (schema v${SUPPORTED_SCHEMA_VERSION})`,
    };
  }
  return { ok: true, session: p as unknown as SessionPayload };
}
